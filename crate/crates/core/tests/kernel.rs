//! Values, environments, pattern matching, and expression evaluation.

mod common;

use common::{expect_exception, run, run1, run_values};

use cheesescript::kernel::value::Value;

// ── Identifiers and environments ─────────────────────────────────────────

#[test]
fn unbound_identifier_throws_not_found() {
    assert_eq!(expect_exception("x;;"), "NotFound");
}

#[test]
fn let_binds_and_shadows() {
    assert_eq!(run1("let x = 3 -> x;;"), "3");
    assert_eq!(run1("let x = 1 -> (let x = 2 -> x);;"), "2");
}

// ── Pattern matching ─────────────────────────────────────────────────────

#[test]
fn guard_pattern_matches_larger_numbers() {
    assert_eq!(run1("7 ?? ((> 5) -> \"big\");;"), "\"big\"");
    assert_eq!(
        expect_exception("3 ?? ((> 5) -> \"big\");;"),
        "NoApplicableHandler"
    );
}

#[test]
fn list_pattern_spread_binds_rest() {
    assert_eq!(run1("let [[1, 2], ...x] = [[1, 2], 3, 4] -> x;;"), "[3, 4]");
    assert_eq!(run1("let [...x] = [1, 2] -> x;;"), "[1, 2]");
    assert_eq!(
        run1("let [1, 2, ...[x], ...[5, 6]] = [1, 2, [3, 4], 5, 6] -> x;;"),
        "[3, 4]"
    );
}

#[test]
fn literal_patterns_match_only_themselves() {
    assert_eq!(expect_exception("let 3 = 4 -> void;;"), "MatchFailure");
    assert_eq!(run1("3 ?? (3 -> \"yes\");;"), "\"yes\"");
    assert_eq!(run1("\"abc\" ?? (\"abc\" -> 1);;"), "1");
    assert_eq!(run1("4.0 ?? (4.0 -> 1);;"), "1");
}

#[test]
fn that_is_combines_base_and_predicate() {
    let src = "%V ?? (m |-> Integer thatIs ((> 0) and (< 9)) -> m, else -> \"no\");;";
    assert_eq!(run1(&src.replace("%V", "5")), "5");
    assert_eq!(run1(&src.replace("%V", "12")), "\"no\"");
    assert_eq!(run1(&src.replace("%V", "0")), "\"no\"");
}

#[test]
fn eq_pattern_evaluates_its_expression() {
    assert_eq!(run1("4 ?? (=(2 + 2) -> \"four\");;"), "\"four\"");
    assert_eq!(run1("let y = 10 -> (10 ?? (=y -> \"same\"));;"), "\"same\"");
}

#[test]
fn typed_wildcard_checks_the_type() {
    assert_eq!(
        run1("3 ?? (? |-> Integer -> \"int\", else -> \"other\");;"),
        "\"int\""
    );
    assert_eq!(
        run1("3.5 ?? (? |-> Integer -> \"int\", else -> \"other\");;"),
        "\"other\""
    );
}

#[test]
fn match_extends_environment_only_with_binders() {
    // the binder is visible in the arm body; the subject's own names leak
    // nowhere else
    assert_eq!(
        run1("let pair = [1, 2] -> (pair ?? ([a, b] -> a + b));;"),
        "3"
    );
    assert_eq!(
        expect_exception("{[1, 2] ?? ([a, b] -> a + b); a};;"),
        "NotFound"
    );
}

// ── Conditionals ─────────────────────────────────────────────────────────

#[test]
fn first_matching_handler_runs() {
    let fact = "factorial(n) :=: n ?? (0 -> 1, (> 0) -> n * factorial(n - 1));;";
    assert_eq!(run1(&format!("{fact} factorial(0);;")), "1");
    assert_eq!(run1(&format!("{fact} factorial(3);;")), "6");
}

#[test]
fn no_applicable_handler_without_else() {
    assert_eq!(
        expect_exception("let n = - 1 -> (n ?? (0 -> 1, (> 0) -> n));;"),
        "NoApplicableHandler"
    );
}

#[test]
fn catch_clause_applies_only_when_subject_threw() {
    assert_eq!(
        run1("(throw Uninitialized) ?? (0 -> 1, catch Uninitialized -> \"repaired\");;"),
        "\"repaired\""
    );
    // a returned value never reaches the catch section
    assert_eq!(
        expect_exception("5 ?? (0 -> 1, catch Uninitialized -> \"repaired\");;"),
        "NoApplicableHandler"
    );
}

#[test]
fn else_handler_with_pattern_binds() {
    assert_eq!(run1("7 ?? (0 -> 0, else x |-> Integer -> x * 2);;"), "14");
}

// ── let / where ──────────────────────────────────────────────────────────

#[test]
fn let_in_sequences_bindings() {
    assert_eq!(run1("let x = 10 in y = 2 * x + x * x -> y;;"), "120");
}

#[test]
fn let_with_reads_the_outer_environment() {
    assert_eq!(run1("let x = 2 -> (let x = 5 with y = x * x -> y);;"), "4");
    assert_eq!(run1("let x = 2 -> (let x = 5 in y = x * x -> y);;"), "25");
}

#[test]
fn let_evaluates_each_binding_once() {
    let src = "
Counter :=: actor() n = 0 (| bump -> void also n = n + 1, count -> n |);;
c :=: Counter();;
let x = {c.bump(); 21} -> x + x;;
c.count;;";
    assert_eq!(run(src).unwrap(), vec!["42", "1"]);
}

#[test]
fn where_defines_recursive_procedures() {
    // base cases 1 -> 1 and 2 -> 2, recurring on n-1 and n-2
    let src = "fib(5) + fib(7) where (fib(n |-> Integer) :=: n ?? (1 -> 1, 2 -> 2, (> 2) -> fib(n - 1) + fib(n - 2)));;";
    assert_eq!(run1(src), "29");
}

#[test]
fn where_value_definition() {
    assert_eq!(run1("x where (x :=: 4);;"), "4");
}

#[test]
fn where_definitions_are_mutually_recursive() {
    let src = "isEven(4) where (
      isEven(n) :=: n ?? (0 -> true, (> 0) -> isOdd(n - 1)),
      isOdd(n) :=: n ?? (0 -> false, (> 0) -> isEven(n - 1)));;";
    assert_eq!(run1(src), "true");
}

// ── Casting ──────────────────────────────────────────────────────────────

#[test]
fn casting_widens_and_rejects() {
    assert_eq!(run1("Float <- 3;;"), "3.0");
    assert_eq!(expect_exception("Integer <- 3.1;;"), "CastException");
}

#[test]
fn cast_to_interface_restricts_dispatch() {
    let src = "
Student :=: interface (schedule |->|-> Agenda);;
Worker :=: interface (schedule |->|-> Agenda);;
StudentWorker[classSchedule: cs, workSchedule: ws] :=:
  implements Student (| schedule -> cs |)
  also implements Worker (| schedule -> ws |);;
sw1 :=: StudentWorker[classSchedule: \"cs1\", workSchedule: \"ws1\"];;
(Worker <- sw1).schedule;;
(Student <- sw1).schedule;;";
    assert_eq!(run(src).unwrap(), vec!["\"ws1\"", "\"cs1\""]);
}

#[test]
fn cast_to_unimplemented_interface_throws() {
    let src = "
Student :=: interface (schedule |->|-> Agenda);;
Worker :=: interface (schedule |->|-> Agenda);;
OnlyStudent[s: s] :=: implements Student (| schedule -> s |);;
(Worker <- OnlyStudent[s: 1]).schedule;;";
    assert_eq!(expect_exception(src), "CastException");
}

// ── catch expressions ────────────────────────────────────────────────────

#[test]
fn catch_handles_matching_exceptions() {
    assert_eq!(run1("(throw X) catch (X -> 1);;"), "1");
    assert_eq!(run1("5 catch (anything -> 9);;"), "5");
    assert_eq!(expect_exception("(throw Y) catch (X -> 1);;"), "Y");
}

#[test]
fn rethrow_propagates_the_current_exception() {
    assert_eq!(
        expect_exception("(throw Boom) catch (Boom -> rethrow);;"),
        "Boom"
    );
}

#[test]
fn exception_payloads_destructure() {
    assert_eq!(
        run1("(throw TooSmall[7]) catch (TooSmall[m] -> m + 1);;"),
        "8"
    );
}

// ── Structural equality ──────────────────────────────────────────────────

#[test]
fn structural_equality_examples() {
    assert_eq!(run1("[3, 4, 5] = [3, 4, 5];;"), "true");
    assert_eq!(run1("[| 5, 4, 4 |] = [| 4, 5, 4 |];;"), "true");
    assert_eq!(run1("[] = [1];;"), "false");
    assert_eq!(run1("3 = 3.0;;"), "false");
    assert_eq!(run1("map(3 -> \"a\") = map(3 -> \"a\");;"), "true");
}

#[test]
fn equal_lists_procedure_agrees_with_builtin_equality() {
    let defs = "
EqualLists(list1, list2) :=:
  list1 ?? (
    [] -> list2 = [],
    [first1, ...rest1] ->
      list2 ?? (
        [] -> false,
        [first2, ...rest2] ->
          (first1 = first2) ?? (true -> EqualLists(rest1, rest2), false -> false)));;";
    for (a, b) in [
        ("[3, 4, 5]", "[3, 4, 5]"),
        ("[1]", "[1, 2]"),
        ("[]", "[]"),
        ("[2, 1]", "[1, 2]"),
    ] {
        let via_proc = run1(&format!("{defs} EqualLists({a}, {b});;"));
        let via_eq = run1(&format!("{a} = {b};;"));
        assert_eq!(via_proc, via_eq, "EqualLists({a}, {b})");
    }
}

// ── Referential transparency ─────────────────────────────────────────────

#[test]
fn identifier_reads_are_stable_within_a_method() {
    let src = "
A :=: actor() v = 5 (|
  peek -> [v, v + 0] also v = 9,
  get -> v |);;
a :=: A();;
a.peek;;
a.get;;";
    assert_eq!(run(src).unwrap(), vec!["[5, 5]", "9"]);
}

// ── Conditional evaluation against a linear-scan oracle ──────────────────

#[test]
fn conditional_matches_brute_force_scan_over_literal_handlers() {
    // every permutation of distinct literal handlers over small subjects
    let literals = [0i64, 1, 2, 3];
    let perms: Vec<Vec<i64>> = permutations(&literals);
    for perm in perms {
        for subject in 0..5i64 {
            let arms: Vec<String> = perm.iter().map(|l| format!("{l} -> {}", l * 10)).collect();
            let src = format!("{subject} ?? ({});;", arms.join(", "));
            // oracle: first handler whose literal equals the subject
            let expected = perm.iter().find(|l| **l == subject).map(|l| l * 10);
            match expected {
                Some(v) => assert_eq!(run1(&src), v.to_string(), "{src}"),
                None => assert_eq!(expect_exception(&src), "NoApplicableHandler", "{src}"),
            }
        }
    }
}

fn permutations(xs: &[i64]) -> Vec<Vec<i64>> {
    if xs.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let mut rest: Vec<i64> = xs.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, *x);
            out.push(p);
        }
    }
    out
}

// ── Numbers ──────────────────────────────────────────────────────────────

#[test]
fn arithmetic_overflow_throws() {
    assert_eq!(
        expect_exception("9223372036854775807 + 1;;"),
        "ArithmeticOverflow"
    );
    assert_eq!(expect_exception("1 / 0;;"), "DivideByZero");
}

#[test]
fn mixed_arithmetic_widens_to_float() {
    assert_eq!(run1("1 + 0.5;;"), "1.5");
    assert_eq!(run1("7 mod 3;;"), "1");
    match &run_values("2.0 * 3;;").unwrap()[0] {
        Value::Float(x) => assert_eq!(*x, 6.0),
        other => panic!("expected float, got {other:?}"),
    }
}

#[test]
fn null_is_rejected_by_plain_annotations() {
    assert_eq!(
        expect_exception("f(x |-> Integer) :=: x;; f(null Queue);;"),
        "TypeMismatch"
    );
    assert_eq!(run1("g(x |-> Nullable Queue) :=: 1;; g(null Queue);;"), "1");
}

#[test]
fn universal_type_accepts_everything() {
    assert_eq!(run1("f(x |-> ?) :=: x;; f(3);;"), "3");
    assert_eq!(run1("f(x |-> ?) :=: x;; f(\"s\");;"), "\"s\"");
}

#[test]
fn catch_else_arm_handles_anything() {
    assert_eq!(run1("(throw X) catch (Y -> 1, else -> 2);;"), "2");
}

#[test]
fn interface_extension_chains_accept_casts() {
    let src = "
A :=: interface;;
B :=: interface extends A;;
S[x: x] :=: implements B (| m -> x |);;
(A <- S[x: 1]).m;;";
    assert_eq!(run1(src), "1");
}

#[test]
fn block_value_is_the_last_item_of_the_last_group() {
    assert_eq!(run1("{1, 2};;"), "2");
    assert_eq!(run1("{1; 2, 3};;"), "3");
    assert_eq!(run1("{};;"), "void");
}
