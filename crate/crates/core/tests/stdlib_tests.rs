//! Collections, enumerations, variadic procedures, JSON, and numeric
//! built-ins, including the property-based invariants.

mod common;

use common::{expect_exception, run1, run_values};

use cheesescript::kernel::value::Value;
use cheesescript::stdlib::json::{json_parse, json_print, JsonTree};
use proptest::prelude::*;

// ── Lists ────────────────────────────────────────────────────────────────

#[test]
fn list_spread_examples() {
    assert_eq!(run1("[[1, 2], ...[3, 4]];;"), "[[1, 2], 3, 4]");
    assert_eq!(run1("[1, 2, ...[3, 4]];;"), "[1, 2, 3, 4]");
    assert_eq!(
        run1("[1, 2, ...[[3, 4]], ...[5, 6]];;"),
        "[1, 2, [3, 4], 5, 6]"
    );
    assert_eq!(run1("[...[1, 2]];;"), "[1, 2]");
}

#[test]
fn spreading_a_non_list_fails() {
    assert_eq!(expect_exception("[1, ...2];;"), "TypeMismatch");
}

#[test]
fn concat_examples() {
    assert_eq!(run1("[1] ## [2, 3];;"), "[1, 2, 3]");
    assert_eq!(run1("let x = [4, 5] -> [] ## x;;"), "[4, 5]");
    assert_eq!(run1("let x = [4, 5] -> x ## [];;"), "[4, 5]");
}

proptest! {
    #[test]
    fn concat_is_associative(a in prop::collection::vec(0i64..9, 0..5),
                             b in prop::collection::vec(0i64..9, 0..5),
                             c in prop::collection::vec(0i64..9, 0..5)) {
        let lit = |xs: &[i64]| format!("[{}]", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let lhs = run1(&format!("({} ## {}) ## {};;", lit(&a), lit(&b), lit(&c)));
        let rhs = run1(&format!("{} ## ({} ## {});;", lit(&a), lit(&b), lit(&c)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn multiset_equality_ignores_order(xs in prop::collection::vec(0i64..5, 0..6), seed in 0usize..6) {
        let mut ys = xs.clone();
        let n = ys.len();
        if n > 0 {
            ys.rotate_left(seed % n);
        }
        let lit = |xs: &[i64]| format!("[| {} |]", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        prop_assert_eq!(run1(&format!("{} = {};;", lit(&xs), lit(&ys))), "true");
    }

    #[test]
    fn set_construction_is_idempotent(xs in prop::collection::vec(0i64..5, 0..6)) {
        let lit = format!("{{| {} |}}", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        prop_assert_eq!(run1(&format!("{{| ...{lit} |}} = {lit};;")), "true");
    }
}

// ── Multisets and sets ───────────────────────────────────────────────────

#[test]
fn multiset_fringe_collects_leaves() {
    let src = "
Tree :=: interface;;
Leaf[terminal |-> ?] :=: implements Tree;;
Fork[left |-> Tree, right |-> Tree] :=: implements Tree;;
MultisetFringe(t |-> Tree) :=:
  t ?? (Leaf[x] -> [| x |], Fork[tree1, tree2] -> [| ...MultisetFringe(tree1), ...MultisetFringe(tree2) |]);;
MultisetFringe(Fork[Leaf[4], Fork[Leaf[4], Leaf[5]]]);;";
    assert_eq!(run1(src), "[| 4, 4, 5 |]");
}

#[test]
fn sets_drop_duplicates() {
    assert_eq!(run1("{| 1, 1, 2 |};;"), "{| 1, 2 |}");
}

// ── Maps and multimaps ───────────────────────────────────────────────────

#[test]
fn map_equality_is_key_order_insensitive() {
    assert_eq!(
        run1("map(3 -> \"a\", 4 -> \"b\") = map(4 -> \"b\", 3 -> \"a\");;"),
        "true"
    );
}

#[test]
fn duplicate_map_keys_throw() {
    assert_eq!(
        expect_exception("map(4 -> \"b\", 4 -> \"a\");;"),
        "DuplicateKey"
    );
}

#[test]
fn map_application() {
    assert_eq!(run1("map(3 -> \"a\", 4 -> \"b\")(3);;"), "\"a\"");
    assert_eq!(expect_exception("map()(2);;"), "KeyNotFound");
}

#[test]
fn multimap_appends_merge_value_bags() {
    assert_eq!(
        run1(
            "multimap(4 -> {| \"a\" |}, ...map(4 -> \"b\")) = multimap(4 -> {| \"b\", \"a\" |});;"
        ),
        "true"
    );
    assert_eq!(
        run1("multimap(4 -> {| \"a\" |}, ...map(4 -> \"b\"))(4);;"),
        "[| \"a\", \"b\" |]"
    );
    assert_eq!(run1("multimap()(2);;"), "[|  |]");
    assert_eq!(run1("multimap()(2) = {|  |};;"), "false"); // a bag, not a set
}

#[test]
fn map_append_is_associative() {
    let parts = ["map(1 -> \"x\")", "map(2 -> \"y\")", "map(3 -> \"z\")"];
    let [a, b, c] = parts;
    let lhs = run1(&format!("map(...map(...{a}, ...{b}), ...{c});;"));
    let rhs = run1(&format!("map(...{a}, ...map(...{b}, ...{c}));;"));
    assert_eq!(lhs, rhs);
}

// ── Enumerations ─────────────────────────────────────────────────────────

const DAYS: &str =
    "DayName :=: enumerate (Monday, Tuesday, Wednesday, Thursday, Friday, Saturday, Sunday);;";

#[test]
fn enum_ordinal_round_trip() {
    assert_eq!(run1(&format!("{DAYS} Integer <- DayName.Monday;;")), "0");
    assert_eq!(run1(&format!("{DAYS} Integer <- DayName.Sunday;;")), "6");
    assert_eq!(run1(&format!("{DAYS} DayName <- 3;;")), "DayName.Thursday");
}

#[test]
fn enum_cast_out_of_range_throws() {
    assert_eq!(
        expect_exception(&format!("{DAYS} DayName <- 7;;")),
        "CastException"
    );
    assert_eq!(
        expect_exception(&format!("{DAYS} DayName <- -1;;")),
        "CastException"
    );
}

#[test]
fn following_day_by_cast_arithmetic() {
    let src = format!(
        "{DAYS} followingDay(d) :=: DayName <- (((Integer <- d) + 1) mod 7);; followingDay(DayName.Sunday);;"
    );
    assert_eq!(run1(&src), "DayName.Monday");
}

// ── Variadic procedures ──────────────────────────────────────────────────

const SUM: &str = "sum(...integers |-> [Integer*]) |->|-> Integer :=: integers ?? ([] -> 0, [first |-> Integer, ...rest] -> first + sum(...rest));;";

#[test]
fn variadic_sum() {
    assert_eq!(run1(&format!("{SUM} sum(1, 2, 3);;")), "6");
    assert_eq!(run1(&format!("{SUM} sum();;")), "0");
    assert_eq!(run1(&format!("{SUM} sum(...[4, 5]);;")), "9");
    assert_eq!(run1(&format!("{SUM} sum(1, ...[2, 3], 4);;")), "10");
}

// ── JSON ─────────────────────────────────────────────────────────────────

#[test]
fn json_empty_array() {
    assert_eq!(json_parse("[]").unwrap(), JsonTree::Array(vec![]));
}

#[test]
fn json_literals_evaluate_and_round_trip() {
    let v = run_values("JSON {\"a\": 1, \"b\": [true, null]};;").unwrap();
    match &v[0] {
        Value::Json(j) => {
            let text = json_print(j);
            assert_eq!(text, "{\"a\": 1, \"b\": [true, null]}");
            assert_eq!(&json_parse(&text).unwrap(), &**j);
        }
        other => panic!("expected JSON, got {other:?}"),
    }
}

fn arb_json(depth: u32) -> BoxedStrategy<JsonTree> {
    let leaf = prop_oneof![
        Just(JsonTree::Null),
        any::<bool>().prop_map(JsonTree::Bool),
        (-1000i64..1000).prop_map(JsonTree::Int),
        "[a-z]{0,8}".prop_map(|s| JsonTree::Str(s.into())),
    ];
    if depth == 0 {
        leaf.boxed()
    } else {
        prop_oneof![
            leaf,
            prop::collection::vec(arb_json(depth - 1), 0..4).prop_map(JsonTree::Array),
            prop::collection::btree_map("[a-z]{1,5}", arb_json(depth - 1), 0..4).prop_map(|m| {
                JsonTree::Object(m.into_iter().map(|(k, v)| (k.into(), v)).collect())
            }),
        ]
        .boxed()
    }
}

proptest! {
    #[test]
    fn json_print_parse_fixpoint(tree in arb_json(3)) {
        let once = json_print(&tree);
        let back = json_parse(&once).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(json_print(&back), once);
    }
}

// ── Numeric built-ins ────────────────────────────────────────────────────

#[test]
fn trig_works_in_degrees() {
    let v = run_values("arcsine(1.0);;").unwrap();
    match &v[0] {
        Value::Float(x) => assert!((x - 90.0).abs() < 1e-9),
        other => panic!("expected float, got {other:?}"),
    }
    let v = run_values("sine(30);;").unwrap();
    match &v[0] {
        Value::Float(x) => assert!((x - 0.5).abs() < 1e-12),
        other => panic!("expected float, got {other:?}"),
    }
    assert_eq!(run1("sqrt(2) * sqrt(2) < 2.0000001;;"), "true");
}

#[test]
fn arcsine_domain_error() {
    assert_eq!(expect_exception("arcsine(2);;"), "DomainError");
    assert_eq!(expect_exception("sqrt(-1);;"), "DomainError");
}

#[test]
fn cartesian_accessors_and_magnitude() {
    let defs = common::corpus_source("complex.acts");
    let mut s = common::session(0);
    let items = s.eval_source("complex.acts", &defs).unwrap();
    let values: Vec<_> = items.into_iter().filter(|i| !i.is_definition).collect();
    assert_eq!(values[0].rendered, "1");
    match &values[1].value {
        Value::Float(angle) => assert!((angle - 45.0).abs() < 1e-9, "angle {angle}"),
        other => panic!("expected float angle, got {other:?}"),
    }
    assert_eq!(values[2].rendered, "5.0");
}

// ── Canonical printing ───────────────────────────────────────────────────

#[test]
fn collections_print_in_canonical_order() {
    assert_eq!(run1("[| 3, 1, 2 |];;"), "[| 1, 2, 3 |]");
    assert_eq!(run1("{| \"b\", \"a\" |};;"), "{| \"a\", \"b\" |}");
    assert_eq!(
        run1("map(4 -> \"b\", 3 -> \"a\");;"),
        "map(3 -> \"a\", 4 -> \"b\")"
    );
}

#[test]
fn printed_collections_reparse_to_equal_values() {
    for src in [
        "[1, [2, 3], \"x\"]",
        "[| 1, 1, 2 |]",
        "{| 4, 5 |}",
        "map(1 -> 2, 3 -> 4)",
    ] {
        let printed = run1(&format!("{src};;"));
        assert_eq!(
            run1(&format!("{printed} = {src};;")),
            "true",
            "{src} vs {printed}"
        );
    }
}

// ── Mixed complex-number representations ─────────────────────────────────

#[test]
fn polar_accessors_compute_from_angle_and_magnitude() {
    let defs = common::corpus_source("complex.acts");
    let src = format!("{defs} [Polar[angle: 30, magnitude: 2].real, Polar[angle: 60, magnitude: 2].imaginary];;");
    let mut s = common::session(0);
    let items = s.eval_source("t", &src).unwrap();
    let last = items.last().unwrap();
    match &last.value {
        Value::List(l) => {
            match (&l.items[0], &l.items[1]) {
                (Value::Float(re), Value::Float(im)) => {
                    assert!((re - 1.0).abs() < 1e-12, "real {re}");
                    assert!((im - 1.0).abs() < 1e-12, "imaginary {im}");
                }
                other => panic!("expected floats, got {other:?}"),
            }
        }
        other => panic!("expected list, got {other:?}"),
    }
}

#[test]
fn addition_destructures_across_representations() {
    // Polar's + reads the Cartesian argument through the interface
    // accessors, and vice versa
    let defs = common::corpus_source("complex.acts");
    let src = format!(
        "{defs} let sum = Polar[angle: 90, magnitude: 2] + Cartesian[real: 3, imaginary: 4] -> [sum.real, sum.imaginary];;"
    );
    let mut s = common::session(0);
    let items = s.eval_source("t", &src).unwrap();
    match &items.last().unwrap().value {
        Value::List(l) => match (&l.items[0], &l.items[1]) {
            (Value::Float(re), Value::Float(im)) => {
                // polar(90°, 2) = (2, ~0)
                assert!((re - 5.0).abs() < 1e-12, "real {re}");
                assert!((im - 4.0).abs() < 1e-9, "imaginary {im}");
            }
            other => panic!("expected floats, got {other:?}"),
        },
        other => panic!("expected list, got {other:?}"),
    }
}
