//! Surface syntax: operation examples, round-trip printing, glyph/ASCII
//! equivalence, and the static diagnostics.

mod common;

use cheesescript::syntax::ast::{ExprKind, PatKind};
use cheesescript::syntax::{
    parse_expression, parse_pattern_str, parse_program, pretty_program, tokenize, TokKind,
};

#[test]
fn tokenize_conditional() {
    let toks = tokenize("t", "n ?? (0 -> 1)").unwrap();
    let kinds: Vec<(TokKind, &str)> = toks
        .iter()
        .filter(|t| t.kind != TokKind::Eof)
        .map(|t| (t.kind, &*t.text))
        .collect();
    assert_eq!(
        kinds,
        vec![
            (TokKind::Ident, "n"),
            (TokKind::Punct, "??"),
            (TokKind::Punct, "("),
            (TokKind::Int, "0"),
            (TokKind::Punct, "->"),
            (TokKind::Int, "1"),
            (TokKind::Punct, ")"),
        ]
    );
}

#[test]
fn parse_factorial_definition_shape() {
    let parsed = parse_program(
        "t",
        "factorial(n |-> Integer) |->|-> Integer :=: n ?? (0 -> 1, (> 0) -> n * factorial(n - 1));;",
    )
    .unwrap();
    assert_eq!(parsed.items.len(), 1);
    let def = match &parsed.items[0].kind {
        ExprKind::Define(d) => d,
        other => panic!("expected definition, got {other:?}"),
    };
    let (arms, catch_arms) = match &def.body.kind {
        ExprKind::Cond {
            arms, catch_arms, ..
        } => (arms, catch_arms),
        other => panic!("expected conditional body, got {other:?}"),
    };
    assert!(catch_arms.is_empty());
    assert!(matches!(
        arms[0].pattern.as_ref().unwrap().kind,
        PatKind::Lit(_)
    ));
    assert!(matches!(
        arms[1].pattern.as_ref().unwrap().kind,
        PatKind::Guard { .. }
    ));
}

#[test]
fn empty_program_has_no_items() {
    assert!(parse_program("t", "").unwrap().items.is_empty());
    assert!(parse_program("t", "  // just a comment\n")
        .unwrap()
        .items
        .is_empty());
}

#[test]
fn list_spread_shape() {
    let parsed = parse_program("t", "[1, 2, ...[3, 4]];;").unwrap();
    match &parsed.items[0].kind {
        ExprKind::ListExpr(items) => {
            assert_eq!(items.len(), 3);
            assert_eq!(
                items.iter().map(|(_, s)| *s).collect::<Vec<_>>(),
                vec![false, false, true]
            );
            assert!(matches!(items[2].0.kind, ExprKind::ListExpr(_)));
        }
        other => panic!("expected list, got {other:?}"),
    }
}

#[test]
fn parse_expression_dot_send() {
    let e = parse_expression("t", "Point(5, 3).y").unwrap();
    match &e.kind {
        ExprKind::DotSend {
            recv,
            selector,
            args,
        } => {
            assert_eq!(&**selector, "y");
            assert!(args.is_none());
            assert!(matches!(recv.kind, ExprKind::Call { .. }));
        }
        other => panic!("expected send, got {other:?}"),
    }
}

#[test]
fn parse_expression_future_call() {
    let e = parse_expression("t", "future f()").unwrap();
    match &e.kind {
        ExprKind::FutureExpr(inner) => assert!(matches!(inner.kind, ExprKind::Call { .. })),
        other => panic!("expected future, got {other:?}"),
    }
}

#[test]
fn wildcard_pattern() {
    let p = parse_pattern_str("t", "?").unwrap();
    assert!(matches!(p.kind, PatKind::Wildcard));
    let p = parse_pattern_str("t", "? |-> Integer").unwrap();
    assert!(matches!(p.kind, PatKind::TypedWildcard(_)));
    let p = parse_pattern_str("t", "=?").unwrap();
    assert!(matches!(p.kind, PatKind::Eq(_)));
}

#[test]
fn sort_pivot_pattern_two_spreads() {
    let p = parse_pattern_str("t", "[...initial, pivot |-> Number, ...final]").unwrap();
    match &p.kind {
        PatKind::ListPat(items) => {
            assert_eq!(items.len(), 3);
            assert!(items[0].1 && !items[1].1 && items[2].1);
        }
        other => panic!("expected list pattern, got {other:?}"),
    }
}

#[test]
fn corpus_round_trips() {
    for (name, source) in common::corpus_files() {
        let first =
            parse_program(&name, &source).unwrap_or_else(|e| panic!("{name} failed to parse: {e}"));
        let printed = pretty_program(&first.items);
        let second = parse_program(&name, &printed)
            .unwrap_or_else(|e| panic!("{name} failed to re-parse its printout: {e}\n{printed}"));
        assert_eq!(first.items, second.items, "round trip changed {name}");
    }
}

/// Replacing ASCII spellings with the glyph forms must parse to the same
/// tree. (Replacement order matters: longest spellings first.)
fn to_glyphs(src: &str) -> String {
    src.replace("|->|->", "\u{21A6}\u{21A6}")
        .replace("|->", "\u{21A6}")
        .replace("|-", "\u{22A2}")
        .replace(":=:", "\u{2261}")
        .replace("->", "\u{2192}")
        .replace("<-", "\u{2190}")
        .replace(">=", "\u{2265}")
        .replace("<=", "\u{2264}")
        .replace("=>", "\u{21D2}")
}

#[test]
fn ascii_and_glyph_forms_parse_identically() {
    for (name, source) in common::corpus_files() {
        if name == "json.acts" {
            continue; // string contents must not be rewritten
        }
        let ascii = parse_program(&name, &source).unwrap();
        let glyphs = to_glyphs(&source);
        let uni = parse_program(&name, &glyphs)
            .unwrap_or_else(|e| panic!("{name} glyph form failed: {e}"));
        assert_eq!(ascii.items, uni.items, "glyph form changed {name}");
    }
}

#[test]
fn glyph_tokens_match_ascii_tokens() {
    let a = tokenize("t", "x |-> Integer").unwrap();
    let b = tokenize("t", "x \u{21A6} Integer").unwrap();
    let texts = |ts: &[cheesescript::syntax::Tok]| {
        ts.iter()
            .map(|t| (t.kind, t.text.to_string()))
            .collect::<Vec<_>>()
    };
    assert_eq!(texts(&a), texts(&b));
}

#[test]
fn duplicate_literal_patterns_rejected() {
    let err = parse_program("t", "x ?? (1 -> 1, 1 -> 2);;").unwrap_err();
    assert!(err.message.contains("disjoint"), "{}", err.message);
    // distinct literals are fine
    assert!(parse_program("t", "x ?? (1 -> 1, 2 -> 2);;").is_ok());
}

#[test]
fn nonliteral_overlap_is_a_warning_not_an_error() {
    let parsed = parse_program("t", "x ?? ((> 1) -> 1, (> 1) -> 2);;").unwrap();
    assert!(!parsed.warnings.is_empty());
    let parsed = parse_program("t", "x ?? (y -> 1, 2 -> 3);;").unwrap();
    assert!(parsed
        .warnings
        .iter()
        .any(|w| w.message.contains("unreachable")));
    // disjoint structural patterns stay quiet
    let parsed = parse_program("t", "x ?? ([] -> 1, [a, ...rest] -> 2);;").unwrap();
    assert!(parsed.warnings.is_empty());
}

#[test]
fn inline_requires_tail_calls() {
    let err = parse_program("t", "inline f(n = 1) -> f(n - 1) + 1;;").unwrap_err();
    assert!(err.message.contains("tail position"), "{}", err.message);
    assert!(parse_program("t", "inline f(n = 1) -> n ?? (0 -> 0, (> 0) -> f(n - 1));;").is_ok());
}

#[test]
fn parse_error_carries_location_and_expectations() {
    let err = parse_program("t", "1 +;;").unwrap_err();
    assert_eq!(err.span.start_line, 1);
    assert!(!err.message.is_empty());
    let err = parse_program("t", "1 2;;").unwrap_err();
    assert!(err.expected.iter().any(|e| e.contains(";;")));
}

#[test]
fn item_separator_required() {
    assert!(parse_program("t", "1;; 2;;").is_ok());
    assert!(
        parse_program("t", "1;; 2").is_ok(),
        "final separator is optional"
    );
    assert!(parse_program("t", "1 2;;").is_err());
}

#[test]
fn else_with_and_without_pattern() {
    assert!(parse_program("t", "x ?? (0 -> 1, else -> 9);;").is_ok());
    assert!(parse_program("t", "x ?? (0 -> 1, else y |-> Integer -> y);;").is_ok());
}

#[test]
fn logic_forms_parse() {
    let src = "let t = Theory() -> {|- t Human[Socrates]; when |- t Human[x] -> |- t Mortal[x]; ? t Mortal[Socrates]; when ? t Mortal[x] -> (? t Human[=x] -> |- t Mortal[x])};;";
    assert!(parse_program("t", src).is_ok());
}

#[test]
fn actor_declaration_parses_with_all_clauses() {
    let src = "A :=: actor((a: x, b: y rigid) |-> Currency) v = 0, queues q1, q2 implements I invariant v >= 0 (| m -> v |);;";
    let parsed = parse_program("t", src).unwrap();
    let def = match &parsed.items[0].kind {
        ExprKind::Define(d) => d,
        _ => panic!(),
    };
    match &def.body.kind {
        ExprKind::Actor(a) => {
            assert_eq!(a.params.slots.len(), 2);
            assert!(a.params.slots[1].rigid);
            assert_eq!(a.vars.len(), 1);
            assert_eq!(a.queues.len(), 2);
            assert_eq!(a.implements.len(), 1);
            assert!(a.invariant.is_some());
            assert_eq!(a.methods.len(), 1);
        }
        other => panic!("expected actor, got {other:?}"),
    }
}

#[test]
fn currency_and_degree_literals() {
    let a = parse_program("t", "€5;;").unwrap();
    let b = parse_program("t", "5;;").unwrap();
    assert_eq!(a.items, b.items);
    let a = parse_program("t", "45°;;").unwrap();
    let b = parse_program("t", "45;;").unwrap();
    assert_eq!(a.items, b.items);
}

/// The parser must reject malformed input with errors, never panic.
/// Deterministic mutation fuzz over the corpus: truncations, token
/// deletions, and glyph injections.
#[test]
fn parser_never_panics_on_mutated_input() {
    let mut interesting = vec![
        "".to_string(),
        ";;".to_string(),
        "((((((((((".to_string(),
        "))))".to_string(),
        "[| |} (| ]".to_string(),
        "let = -> ;;".to_string(),
        "actor (| |)".to_string(),
        "x ?? (;;".to_string(),
        "prep hole;;".to_string(),
        "|- ;;".to_string(),
        "? t P[;;".to_string(),
        "map(1 -> );;".to_string(),
        "JSON {\"a\": };;".to_string(),
        "\u{2261}\u{21A6}\u{22A2}\u{2192}".to_string(),
        "inline f(n = ) -> f;;".to_string(),
    ];
    for (_, src) in common::corpus_files() {
        // truncate at various byte-safe points
        for frac in [10, 30, 50, 70, 90] {
            let cut = src.len() * frac / 100;
            let cut = (0..=cut).rev().find(|i| src.is_char_boundary(*i)).unwrap();
            interesting.push(src[..cut].to_string());
        }
        // delete a chunk from the middle
        let a = src.len() / 3;
        let b = src.len() * 2 / 3;
        let a = (0..=a).rev().find(|i| src.is_char_boundary(*i)).unwrap();
        let b = (b..src.len()).find(|i| src.is_char_boundary(*i)).unwrap();
        interesting.push(format!("{}{}", &src[..a], &src[b..]));
    }
    for src in &interesting {
        // either outcome is fine; panics are not
        let _ = parse_program("fuzz", src);
    }
}

#[test]
fn kitchen_sink_round_trips() {
    // constructs the corpus does not exercise
    let src = r#"
S :=: actor() v = 0, queue q (|
  a -> stay b() ?? (x -> x, catch rethrow),
  b -> 1,
  c -> passThru q catch rethrow also dequeue q -> void also v = 1,
  d(x |-> Nullable Queue) -> x ?? (? |-> Queue -> 1, else -> 2) |);;
t :=: Theory();;
when ? t Goal[x] -> (? t Fact[=x] -> |- t Goal[x]);;
u(p |-> (Integer) |-> Boolean, ...rest |-> [?*]) :=: [p(1), ...rest];;
n :=: null Queue;;
m :=: 5 ?? (=? -> 0, ? |-> Integer thatIs ((> 1) or (< 0)) -> 1, else w -> w);;
lam :=: ((x, y) -> x * y);;
deep :=: {| 1, 2 |};;
j :=: JSON [1, -2.5, {"k": null}];;
"#;
    let first = parse_program("sink", src).unwrap();
    let printed = pretty_program(&first.items);
    let second = parse_program("sink2", &printed)
        .unwrap_or_else(|e| panic!("re-parse failed: {e}\n{printed}"));
    assert_eq!(first.items, second.items, "kitchen sink changed shape:\n{printed}");
}
