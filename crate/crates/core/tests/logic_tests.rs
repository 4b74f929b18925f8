//! Theories: assertions, forward and backward chaining, extensions, and
//! insertion-order independence against a brute-force saturation oracle.

mod common;

use std::collections::BTreeSet;
use std::rc::Rc;

use common::{expect_exception, run1, session};

use cheesescript::kernel::eval::{assert_fact, set_goal, subargument};
use cheesescript::kernel::value::Value;
use cheesescript::logic::{Prop, Term};
use cheesescript::runtime::SplitMix64;
use cheesescript::syntax::Span;

fn span() -> Span {
    Span::point("logic-test".into(), 1, 1)
}

fn sym(s: &str) -> Term {
    Term::Const(Value::exception(s, vec![]))
}

fn fact(functor: &str, args: &[&str]) -> Rc<Prop> {
    Rc::new(Prop {
        functor: functor.into(),
        args: args.iter().map(|a| sym(a)).collect(),
    })
}

// ── Surface chaining ─────────────────────────────────────────────────────

#[test]
fn forward_chaining_derives_mortality() {
    let src = "let t = Theory() -> {|- t Human[Socrates]; when |- t Human[x] -> |- t Mortal[x]; ? t Mortal[Socrates]};;";
    assert_eq!(run1(src), "[Mortal[Socrates]]");
}

#[test]
fn backward_chaining_derives_on_demand() {
    let src = "let t = Theory() -> {|- t Human[Socrates]; when ? t Mortal[x] -> (? t Human[=x] -> |- t Mortal[x]); ? t Mortal[Socrates]};;";
    assert_eq!(run1(src), "[Mortal[Socrates]]");
}

#[test]
fn reasserting_a_fact_fires_rules_once() {
    let src = "
counter :=: Counter() where (Counter :=: actor() n = 0 (| bump -> void also n = n + 1, count -> n |));;
t :=: Theory();;
{when |- t Human[x] -> {counter.bump(); |- t Mortal[x]}; |- t Human[Socrates]; |- t Human[Socrates]; counter.count};;";
    assert_eq!(run1(src), "1");
}

#[test]
fn rule_chains_run_to_fixpoint() {
    let src = "let t = Theory() -> {
      when |- t A[x] -> |- t B[x];
      when |- t B[x] -> |- t C[x];
      |- t A[One];
      ? t C[One]};;";
    assert_eq!(run1(src), "[C[One]]");
}

#[test]
fn rules_added_after_facts_still_fire() {
    let src = "let t = Theory() -> {|- t Human[Socrates]; when |- t Human[x] -> |- t Mortal[x]; ? t Mortal[x]};;";
    assert_eq!(run1(src), "[Mortal[Socrates]]");
}

#[test]
fn inert_rules_and_independent_rules() {
    let src = "let t = Theory() -> {
      when |- t Missing[x] -> |- t Never[x];
      when |- t Human[x] -> |- t Mortal[x];
      when |- t Human[x] -> |- t Featherless[x];
      |- t Human[Socrates];
      [? t Never[y], ? t Mortal[x], ? t Featherless[z]]};;";
    assert_eq!(
        run1(src),
        "[[], [Mortal[Socrates]], [Featherless[Socrates]]]"
    );
}

#[test]
fn goal_with_no_facts_is_empty() {
    assert_eq!(run1("let t = Theory() -> ? t Anything[x];;"), "[]");
}

#[test]
fn non_ground_assertions_are_rejected() {
    assert_eq!(
        expect_exception("let t = Theory() -> |- t Mortal[somebody];;"),
        "NonGroundAssertion"
    );
}

#[test]
fn asserting_contradictions_does_not_explode() {
    let src = "let t = Theory() -> {
      |- t P[A]; |- t NotP[A];
      when |- t P[x] -> |- t Q[x];
      [? t Q[y], ? t Unrelated[z]]};;";
    assert_eq!(run1(src), "[[Q[A]], []]");
}

// ── Extensions ───────────────────────────────────────────────────────────

#[test]
fn extensions_see_parent_facts() {
    let src = "let t = Theory() -> {
      |- t Human[Socrates];
      let e = extension(t) -> ? e Human[x]};;";
    assert_eq!(run1(src), "[Human[Socrates]]");
}

#[test]
fn parents_never_see_child_facts() {
    let src = "let t = Theory() -> {
      let e = extension(t) -> {|- e Secret[X]; ? t Secret[y]}};;";
    assert_eq!(run1(src), "[]");
}

#[test]
fn parent_rules_fire_in_extensions_for_parent_facts() {
    // the child registers its own rule and sees inherited assertions
    let src = "let t = Theory() -> {
      |- t Human[Socrates];
      let e = extension(t) -> {when |- e Human[x] -> |- e Mortal[x]; ? e Mortal[y]}};;";
    assert_eq!(run1(src), "[Mortal[Socrates]]");
}

#[test]
fn goal_satisfiers_include_inherited_facts() {
    let mut s = session(0);
    let it = s.interp().clone();
    let parent = cheesescript::kernel::eval::new_theory(&it);
    let child = cheesescript::kernel::eval::extend_theory(&it, parent);
    futures_block(assert_fact(
        &it,
        parent,
        fact("Human", &["Socrates"]),
        &span(),
    ))
    .unwrap();
    futures_block(async {
        let pattern = Prop {
            functor: "Human".into(),
            args: vec![Term::Var("x".into())],
        };
        let in_child = set_goal(&it, child, pattern.clone(), None, &span())
            .await
            .unwrap();
        let in_parent = set_goal(&it, parent, pattern, None, &span()).await.unwrap();
        for f in &in_parent {
            assert!(
                in_child.iter().any(|g| g == f),
                "child goal misses parent fact"
            );
        }
        Ok::<(), ()>(())
    })
    .unwrap();
}

#[test]
fn subargument_records_the_derivation() {
    let mut s = session(0);
    let it = s.interp().clone();
    let outer = cheesescript::kernel::eval::new_theory(&it);
    let base = cheesescript::kernel::eval::new_theory(&it);
    futures_block(async {
        // hypothesis: Human[Socrates]; conclusion: Human[Socrates]
        // (established trivially once asserted in the extension)
        let psi = fact("Human", &["Socrates"]);
        let phi = Prop {
            functor: "Human".into(),
            args: vec![sym("Socrates")],
        };
        let ok = subargument(&it, outer, base, psi.clone(), phi, &span())
            .await
            .unwrap();
        assert!(ok, "goal should be established in the extension");
        Ok::<(), ()>(())
    })
    .unwrap();
    // the outer theory gained the opaque derivation fact psi |- phi
    let theories = it.theories.borrow();
    assert_eq!(theories[outer].facts.len(), 1);
    assert_eq!(theories[outer].facts[0].functor.to_string(), "|-");
    // and the hypothesis never leaked into base or outer as a plain fact
    assert!(theories[base].facts.is_empty());
}

/// Minimal single-threaded block_on for driving logic APIs in tests.
fn futures_block<T>(fut: impl std::future::Future<Output = T>) -> T {
    let mut fut = Box::pin(fut);
    let waker = std::task::Waker::noop();
    let mut cx = std::task::Context::from_waker(&waker);
    loop {
        match fut.as_mut().poll(&mut cx) {
            std::task::Poll::Ready(v) => return v,
            std::task::Poll::Pending => panic!("logic operations must not suspend here"),
        }
    }
}

// ── Saturation vs a brute-force oracle ───────────────────────────────────

#[derive(Clone)]
struct DatalogRule {
    head: (String, Vec<usize>),
    body: (String, Vec<usize>), // variable indices 0 or 1
}

/// Brute force: apply every rule to every fact until nothing changes.
fn oracle_saturate(
    facts: &[(String, Vec<String>)],
    rules: &[DatalogRule],
) -> BTreeSet<(String, Vec<String>)> {
    let mut set: BTreeSet<(String, Vec<String>)> = facts.iter().cloned().collect();
    loop {
        let mut added = false;
        let snapshot: Vec<_> = set.iter().cloned().collect();
        for rule in rules {
            for (f, args) in &snapshot {
                if *f != rule.body.0 || args.len() != rule.body.1.len() {
                    continue;
                }
                // bind rule variables; repeated variables must agree
                let mut binding: [Option<&String>; 2] = [None, None];
                let mut ok = true;
                for (v, a) in rule.body.1.iter().zip(args) {
                    match binding[*v] {
                        None => binding[*v] = Some(a),
                        Some(prev) if prev == a => {}
                        Some(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let head_args: Vec<String> = rule
                    .head
                    .1
                    .iter()
                    .map(|v| binding[*v].unwrap().clone())
                    .collect();
                if set.insert((rule.head.0.clone(), head_args)) {
                    added = true;
                }
            }
        }
        if !added {
            return set;
        }
    }
}

fn program_source(facts: &[(String, Vec<String>)], rules: &[DatalogRule]) -> Vec<String> {
    let vars = ["x", "y"];
    let mut items = Vec::new();
    for r in rules {
        let pat_args: Vec<&str> = r.body.1.iter().map(|v| vars[*v]).collect();
        let head_args: Vec<&str> = r.head.1.iter().map(|v| vars[*v]).collect();
        items.push(format!(
            "when |- t {}[{}] -> |- t {}[{}]",
            r.body.0,
            pat_args.join(", "),
            r.head.0,
            head_args.join(", ")
        ));
    }
    for (f, args) in facts {
        items.push(format!("|- t {}[{}]", f, args.join(", ")));
    }
    items
}

fn engine_saturate(items: &[String], order: &[usize]) -> BTreeSet<String> {
    let mut s = session(0);
    s.eval_source("t", "t :=: Theory();;").unwrap();
    for &i in order {
        s.eval_source("t", &format!("{};;", items[i])).unwrap();
    }
    let it = s.interp().clone();
    let theories = it.theories.borrow();
    theories[0].facts.iter().map(|f| f.render()).collect()
}

#[test]
fn saturation_is_insertion_order_independent_and_matches_the_oracle() {
    let mut rng = SplitMix64(0xC0FFEE);
    let functors = ["P", "Q", "R", "S"];
    let consts = ["A", "B", "C"];
    for round in 0..30 {
        // random program: up to 10 rules and 5 facts over binary relations
        let mut rules = Vec::new();
        for _ in 0..(3 + rng.next_u64() % 8) {
            let b = functors[(rng.next_u64() % 4) as usize].to_string();
            let h = functors[(rng.next_u64() % 4) as usize].to_string();
            let body_vars = vec![(rng.next_u64() % 2) as usize, (rng.next_u64() % 2) as usize];
            // head variables must occur in the body
            let head_vars = vec![
                body_vars[(rng.next_u64() % 2) as usize],
                body_vars[(rng.next_u64() % 2) as usize],
            ];
            rules.push(DatalogRule {
                head: (h, head_vars),
                body: (b, body_vars),
            });
        }
        let mut facts = Vec::new();
        for _ in 0..(2 + rng.next_u64() % 4) {
            let f = functors[(rng.next_u64() % 4) as usize].to_string();
            let a = consts[(rng.next_u64() % 3) as usize].to_string();
            let b = consts[(rng.next_u64() % 3) as usize].to_string();
            facts.push((f, vec![a, b]));
        }
        facts.sort();
        facts.dedup();

        let expected: BTreeSet<String> = oracle_saturate(&facts, &rules)
            .into_iter()
            .map(|(f, args)| format!("{}[{}]", f, args.join(", ")))
            .collect();

        let items = program_source(&facts, &rules);
        let forward: Vec<usize> = (0..items.len()).collect();
        let mut shuffled = forward.clone();
        // deterministic shuffle
        for i in (1..shuffled.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let reversed: Vec<usize> = forward.iter().rev().copied().collect();

        let a = engine_saturate(&items, &forward);
        let b = engine_saturate(&items, &shuffled);
        let c = engine_saturate(&items, &reversed);
        assert_eq!(a, expected, "round {round}: engine differs from oracle");
        assert_eq!(a, b, "round {round}: shuffled insertion changed the result");
        assert_eq!(a, c, "round {round}: reversed insertion changed the result");
    }
}

#[test]
fn goals_in_extensions_trigger_parent_goal_rules() {
    // a goal set in the extension reaches the rule registered on the base
    let src = "let t = Theory() -> {
      |- t Human[Socrates];
      when ? t Mortal[x] -> (? t Human[=x] -> |- t Mortal[x]);
      let e = extension(t) -> ? e Mortal[Socrates]};;";
    assert_eq!(run1(src), "[Mortal[Socrates]]");
}
