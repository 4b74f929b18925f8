//! Per-actor runtime state: variables, named queues, and the cheese
//! (mutual-exclusion) bookkeeping. At most one activity holds the cheese
//! at a time. When it is released, the grant priority is: an explicitly
//! dequeued activity, then an activity returning from a hole, then the
//! head of the pending queue.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::rc::Rc;

use crate::kernel::env::Env;
use crate::kernel::value::Value;
use crate::syntax::ast::{ActorDecl, Expr};

use super::machine::TaskId;

#[derive(Clone)]
pub struct Layer {
    pub decl: Rc<ActorDecl>,
    pub env: Env,
}

pub struct LazyCell {
    pub expr: Rc<Expr>,
    pub env: Env,
}

pub struct ActorState {
    pub name: Rc<str>,
    pub vars: HashMap<Rc<str>, Value>,
    pub rigid: HashSet<Rc<str>>,
    pub queues: BTreeMap<Rc<str>, VecDeque<TaskId>>,
    /// Dispatch layers, most derived first. `relay` starts at the layer
    /// below the one currently executing.
    pub layers: Vec<Layer>,
    pub implements: Vec<Rc<str>>,
    /// Invariant expressions with the environments they were declared in.
    pub invariants: Vec<(Rc<Expr>, Env)>,
    pub working: bool,
    pub holder: Option<TaskId>,
    pub pending: VecDeque<TaskId>,
    /// Activities marked by `dequeue`; they get the cheese next.
    pub handoff: VecDeque<TaskId>,
    /// Activities returning from holes.
    pub reentry: VecDeque<TaskId>,
    /// Permanent alias: messages are re-delivered to this value.
    pub forwarded: Option<Value>,
    /// Postponed expression not yet forced.
    pub lazy: Option<LazyCell>,
    /// Memoized failure of a forced postponed expression.
    pub lazy_failed: Option<crate::kernel::Thrown>,
}

impl ActorState {
    pub fn new(name: Rc<str>) -> ActorState {
        ActorState {
            name,
            vars: HashMap::new(),
            rigid: HashSet::new(),
            queues: BTreeMap::new(),
            layers: Vec::new(),
            implements: Vec::new(),
            invariants: Vec::new(),
            working: false,
            holder: None,
            pending: VecDeque::new(),
            handoff: VecDeque::new(),
            reentry: VecDeque::new(),
            forwarded: None,
            lazy: None,
            lazy_failed: None,
        }
    }

    pub fn queue_is_empty(&self, name: &str) -> Option<bool> {
        self.queues.get(name).map(|q| q.is_empty())
    }

    /// Move the head of a named queue to the handoff list. No-op when the
    /// queue is empty.
    pub fn dequeue_mark(&mut self, queue: &str) -> Option<TaskId> {
        let q = self.queues.get_mut(queue)?;
        let t = q.pop_front()?;
        self.handoff.push_back(t);
        Some(t)
    }
}

/// Who receives the cheese when the current holder lets go.
pub enum Grant {
    Handoff(TaskId),
    Reentry(TaskId),
    /// Message boundary: invariants are checked before a pending message
    /// (or idleness) is granted.
    Pending(TaskId),
    Idle,
}

impl ActorState {
    /// Decide the next holder. The caller updates `holder`/`working` and
    /// runs invariant checks at message boundaries.
    pub fn next_grant(&mut self) -> Grant {
        if let Some(t) = self.handoff.pop_front() {
            return Grant::Handoff(t);
        }
        if let Some(t) = self.reentry.pop_front() {
            return Grant::Reentry(t);
        }
        match self.pending.pop_front() {
            Some(t) => Grant::Pending(t),
            None => Grant::Idle,
        }
    }
}
