//! Theories with assertions, forward chaining, backward chaining, and
//! theory extension. A theory sees its ancestors' assertions; children's
//! assertions stay invisible to the parent. Chaining runs to a fixpoint
//! with each (rule, binding) firing at most once, so re-asserting a fact
//! is a no-op and saturation is insertion-order independent.
//!
//! The unification here is deliberately first-order and flat: terms are
//! ground constants or variables, so no occurs-check is needed. Rule
//! bodies are ordinary expressions; the evaluator drives firing.

use std::collections::HashSet;
use std::rc::Rc;

use crate::kernel::env::Env;
use crate::kernel::value::{render, structural_equal, TheoryId, Value};
use crate::syntax::ast::Expr;

#[derive(Clone, Debug)]
pub enum Term {
    Const(Value),
    Var(Rc<str>),
}

#[derive(Clone, Debug)]
pub struct Prop {
    pub functor: Rc<str>,
    pub args: Vec<Term>,
}

impl PartialEq for Prop {
    fn eq(&self, other: &Self) -> bool {
        self.functor == other.functor
            && self.args.len() == other.args.len()
            && self
                .args
                .iter()
                .zip(&other.args)
                .all(|(a, b)| match (a, b) {
                    (Term::Const(x), Term::Const(y)) => structural_equal(x, y),
                    (Term::Var(x), Term::Var(y)) => x == y,
                    _ => false,
                })
    }
}

impl Prop {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn render(&self) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(v) => render(v),
                Term::Var(n) => n.to_string(),
            })
            .collect();
        format!("{}[{}]", self.functor, args.join(", "))
    }
}

pub type Binding = Vec<(Rc<str>, Value)>;

/// Match a pattern against a ground fact. Variables bind; repeated
/// variables must agree structurally.
pub fn unify(pattern: &Prop, fact: &Prop) -> Option<Binding> {
    if pattern.functor != fact.functor || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut binding: Binding = Vec::new();
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        let fv = match f {
            Term::Const(v) => v,
            Term::Var(_) => return None,
        };
        match p {
            Term::Const(v) => {
                if !structural_equal(v, fv) {
                    return None;
                }
            }
            Term::Var(name) => {
                if let Some((_, bound)) = binding.iter().find(|(n, _)| n == name) {
                    if !structural_equal(bound, fv) {
                        return None;
                    }
                } else {
                    binding.push((name.clone(), fv.clone()));
                }
            }
        }
    }
    Some(binding)
}

/// Match a rule trigger pattern against a goal pattern (which may itself
/// contain variables). Returns bindings for the rule's variables; the rule
/// fires only when every one of them is bound to a constant.
pub fn unify_with_goal(rule_pat: &Prop, goal_pat: &Prop) -> Option<Binding> {
    if rule_pat.functor != goal_pat.functor || rule_pat.args.len() != goal_pat.args.len() {
        return None;
    }
    let mut binding: Binding = Vec::new();
    for (p, g) in rule_pat.args.iter().zip(&goal_pat.args) {
        match (p, g) {
            (Term::Const(a), Term::Const(b)) => {
                if !structural_equal(a, b) {
                    return None;
                }
            }
            (Term::Const(_), Term::Var(_)) => return None,
            (Term::Var(name), Term::Const(v)) => {
                if let Some((_, bound)) = binding.iter().find(|(n, _)| n == name) {
                    if !structural_equal(bound, v) {
                        return None;
                    }
                } else {
                    binding.push((name.clone(), v.clone()));
                }
            }
            (Term::Var(_), Term::Var(_)) => return None,
        }
    }
    Some(binding)
}

pub fn binding_key(b: &Binding) -> String {
    b.iter()
        .map(|(n, v)| format!("{n}={};", render(v)))
        .collect()
}

pub struct Rule {
    pub id: u64,
    pub pattern: Prop,
    pub body: Rc<Expr>,
    pub env: Env,
}

pub struct Goal {
    pub pattern: Prop,
    pub body: Option<(Rc<Expr>, Env)>,
    /// Bindings for which the goal body already ran.
    pub fired: HashSet<String>,
}

pub struct TheoryState {
    pub parent: Option<TheoryId>,
    pub facts: Vec<Rc<Prop>>,
    pub forward_rules: Vec<Rule>,
    pub goal_rules: Vec<Rule>,
    pub goals: Vec<Goal>,
    /// (rule id, binding key) pairs that already fired.
    pub fired: HashSet<(u64, String)>,
}

impl TheoryState {
    pub fn new(parent: Option<TheoryId>) -> TheoryState {
        TheoryState {
            parent,
            facts: Vec::new(),
            forward_rules: Vec::new(),
            goal_rules: Vec::new(),
            goals: Vec::new(),
            fired: HashSet::new(),
        }
    }
}

/// Ancestor chain of a theory, starting with the theory itself.
pub fn ancestry(theories: &[TheoryState], tid: TheoryId) -> Vec<TheoryId> {
    let mut chain = vec![tid];
    let mut cur = tid;
    while let Some(p) = theories[cur].parent {
        chain.push(p);
        cur = p;
    }
    chain
}

/// Theories that can see `tid`'s assertions: itself and every descendant.
pub fn visible_from(theories: &[TheoryState], tid: TheoryId) -> Vec<TheoryId> {
    (0..theories.len())
        .filter(|&u| ancestry(theories, u).contains(&tid))
        .collect()
}

/// All facts visible in `tid` (own plus ancestors'), own first.
pub fn visible_facts(theories: &[TheoryState], tid: TheoryId) -> Vec<Rc<Prop>> {
    let mut out = Vec::new();
    for t in ancestry(theories, tid) {
        out.extend(theories[t].facts.iter().cloned());
    }
    out
}

pub fn has_fact(theories: &[TheoryState], tid: TheoryId, prop: &Prop) -> bool {
    ancestry(theories, tid)
        .iter()
        .any(|&t| theories[t].facts.iter().any(|f| &**f == prop))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> Term {
        Term::Const(Value::exception(s, vec![]))
    }

    #[test]
    fn unify_binds_variables() {
        let pat = Prop {
            functor: "Human".into(),
            args: vec![Term::Var("x".into())],
        };
        let fact = Prop {
            functor: "Human".into(),
            args: vec![sym("Socrates")],
        };
        let b = unify(&pat, &fact).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(&*b[0].0, "x");
    }

    #[test]
    fn unify_repeated_variable_must_agree() {
        let pat = Prop {
            functor: "Eq".into(),
            args: vec![Term::Var("x".into()), Term::Var("x".into())],
        };
        let same = Prop {
            functor: "Eq".into(),
            args: vec![sym("A"), sym("A")],
        };
        let diff = Prop {
            functor: "Eq".into(),
            args: vec![sym("A"), sym("B")],
        };
        assert!(unify(&pat, &same).is_some());
        assert!(unify(&pat, &diff).is_none());
    }

    #[test]
    fn functor_and_arity_must_match() {
        let pat = Prop {
            functor: "P".into(),
            args: vec![Term::Var("x".into())],
        };
        let other = Prop {
            functor: "Q".into(),
            args: vec![sym("A")],
        };
        assert!(unify(&pat, &other).is_none());
        let nullary = Prop {
            functor: "P".into(),
            args: vec![],
        };
        assert!(unify(&pat, &nullary).is_none());
    }
}
