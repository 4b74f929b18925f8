//! Immutable identifier-to-value binding chains. `bind` prepends a frame
//! and never mutates; recursive definition groups get a `Rec` node whose
//! table is filled as the group elaborates, which is how mutually
//! recursive procedures see each other.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::value::{ActorId, Value};

#[derive(Clone, Debug)]
pub struct Env(Option<Rc<EnvNode>>);

#[derive(Debug)]
pub enum EnvNode {
    Frame {
        name: Rc<str>,
        value: Value,
        rest: Env,
    },
    Rec {
        defs: RefCell<HashMap<Rc<str>, Value>>,
        rest: Env,
    },
    /// Marks that identifiers may resolve to the instance variables and
    /// queues of an actor; the lookup is delegated to the runtime.
    ActorScope { actor: ActorId, rest: Env },
}

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn bind(&self, name: Rc<str>, value: Value) -> Env {
        Env(Some(Rc::new(EnvNode::Frame {
            name,
            value,
            rest: self.clone(),
        })))
    }

    pub fn new_rec(&self) -> Env {
        Env(Some(Rc::new(EnvNode::Rec {
            defs: RefCell::new(HashMap::new()),
            rest: self.clone(),
        })))
    }

    pub fn with_actor_scope(&self, actor: ActorId) -> Env {
        Env(Some(Rc::new(EnvNode::ActorScope {
            actor,
            rest: self.clone(),
        })))
    }

    /// Insert into the nearest recursive group, if any.
    pub fn define_in_rec(&self, name: Rc<str>, value: Value) -> bool {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            match &**node {
                EnvNode::Frame { rest, .. } | EnvNode::ActorScope { rest, .. } => cur = rest,
                EnvNode::Rec { defs, .. } => {
                    defs.borrow_mut().insert(name, value);
                    return true;
                }
            }
        }
        false
    }

    /// Chain lookup. Frames and recursive groups resolve directly; at an
    /// actor scope the caller-provided resolver consults that actor's
    /// variables and queues, so locals shadow instance state which in turn
    /// shadows the declaration environment.
    pub fn lookup_with<F>(&self, name: &str, resolve_actor: F) -> Option<Value>
    where
        F: Fn(ActorId, &str) -> Option<Value>,
    {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            match &**node {
                EnvNode::Frame {
                    name: n,
                    value,
                    rest,
                } => {
                    if &**n == name {
                        return Some(value.clone());
                    }
                    cur = rest;
                }
                EnvNode::Rec { defs, rest } => {
                    if let Some(v) = defs.borrow().get(name) {
                        return Some(v.clone());
                    }
                    cur = rest;
                }
                EnvNode::ActorScope { actor, rest } => {
                    if let Some(v) = resolve_actor(*actor, name) {
                        return Some(v);
                    }
                    cur = rest;
                }
            }
        }
        None
    }

    /// Lookup ignoring actor scopes (pure environments).
    pub fn lookup(&self, name: &str) -> Option<Value> {
        self.lookup_with(name, |_, _| None)
    }

    /// The innermost actor scope, if one encloses this environment.
    pub fn enclosing_actor(&self) -> Option<ActorId> {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            match &**node {
                EnvNode::Frame { rest, .. } | EnvNode::Rec { rest, .. } => cur = rest,
                EnvNode::ActorScope { actor, .. } => return Some(*actor),
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lookup_value(env: &Env, name: &str) -> Option<Value> {
        env.lookup(name)
    }

    #[test]
    fn lookup_in_empty_is_not_found() {
        assert!(lookup_value(&Env::empty(), "x").is_none());
    }

    #[test]
    fn bind_then_lookup() {
        let env = Env::empty().bind("x".into(), Value::Int(3));
        assert!(matches!(lookup_value(&env, "x"), Some(Value::Int(3))));
    }

    #[test]
    fn shadowing_resolves_to_nearest_frame() {
        let env = Env::empty()
            .bind("x".into(), Value::Int(1))
            .bind("x".into(), Value::Int(2));
        assert!(matches!(lookup_value(&env, "x"), Some(Value::Int(2))));
    }

    #[test]
    fn bind_does_not_mutate_original() {
        let base = Env::empty().bind("x".into(), Value::Int(1));
        let _extended = base.bind("x".into(), Value::Int(9));
        assert!(matches!(lookup_value(&base, "x"), Some(Value::Int(1))));
    }

    #[test]
    fn two_bindings_both_resolve() {
        let env = Env::empty()
            .bind("a".into(), Value::Int(1))
            .bind("b".into(), Value::Int(2));
        assert!(matches!(lookup_value(&env, "a"), Some(Value::Int(1))));
        assert!(matches!(lookup_value(&env, "b"), Some(Value::Int(2))));
    }

    #[test]
    fn rec_group_visible_through_frames() {
        let rec = Env::empty().new_rec();
        let inner = rec.bind("y".into(), Value::Int(0));
        assert!(inner.define_in_rec("f".into(), Value::Int(42)));
        assert!(matches!(lookup_value(&inner, "f"), Some(Value::Int(42))));
    }
}
