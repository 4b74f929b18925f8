//! The deterministic single-threaded executor. Activities are futures;
//! every suspension point registers the task in a runtime structure
//! (actor queue, future waiter list, join cell) and the scheduler resumes
//! it later. Picking among ready tasks is the only source of
//! nondeterminism, driven either by a seeded generator or by a
//! prescription recorded during interleaving exploration.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::kernel::env::Env;
use crate::kernel::value::{ActorId, FutureId, Value};
use crate::kernel::Thrown;
use crate::logic::TheoryState;
use crate::syntax::ParseError;

use super::actor::ActorState;

pub type TaskId = usize;
pub type LocalFut = Pin<Box<dyn Future<Output = ()>>>;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Debug)]
pub enum RunError {
    Parse(ParseError),
    Uncaught(Thrown),
    /// The run could not finish within the step budget. `stalled` marks
    /// configurations where no activity can ever become ready again.
    StepLimit {
        steps: u64,
        stalled: bool,
    },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Parse(e) => write!(f, "{e}"),
            RunError::Uncaught(t) => {
                write!(
                    f,
                    "{}: exception: {}",
                    t.span,
                    crate::kernel::value::render(&t.value)
                )
            }
            RunError::StepLimit { steps, stalled } => {
                if *stalled {
                    write!(f, "step limit: no runnable activity after {steps} steps")
                } else {
                    write!(f, "step limit exceeded after {steps} steps")
                }
            }
        }
    }
}

pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

pub enum SchedPolicy {
    Seeded(SplitMix64),
    /// Replays `path` then takes branch 0, recording every choice point's
    /// fanout so the exploration driver can backtrack.
    Prescribed {
        path: Vec<u32>,
        taken: Vec<(u32, u32)>,
    },
}

impl SchedPolicy {
    fn choose(&mut self, n: usize) -> usize {
        debug_assert!(n > 1);
        match self {
            SchedPolicy::Seeded(rng) => (rng.next_u64() % n as u64) as usize,
            SchedPolicy::Prescribed { path, taken } => {
                let idx = taken.len();
                let pick = if idx < path.len() { path[idx] } else { 0 };
                taken.push((pick, n as u32));
                pick as usize
            }
        }
    }
}

pub enum FutState {
    Pending(Vec<TaskId>),
    Resolved(Value),
    Failed(Thrown),
}

pub struct FutCell {
    pub state: FutState,
}

/// Join cell for block groups: spawned items store their results here and
/// the last one to finish wakes the waiter.
pub struct JoinCell {
    pub remaining: Cell<usize>,
    pub results: RefCell<Vec<Option<crate::kernel::Comp>>>,
    /// Indices of items in the order they completed.
    pub completion_order: RefCell<Vec<usize>>,
    pub waiter: Cell<Option<TaskId>>,
}

impl JoinCell {
    pub fn new(n: usize) -> Rc<JoinCell> {
        Rc::new(JoinCell {
            remaining: Cell::new(n),
            results: RefCell::new((0..n).map(|_| None).collect()),
            completion_order: RefCell::new(Vec::new()),
            waiter: Cell::new(None),
        })
    }
}

/// Shared interpreter state. Single-threaded; interior mutability with
/// non-overlapping borrows.
pub struct Interp {
    pub globals: Env,
    pub actors: RefCell<Vec<ActorState>>,
    pub futures: RefCell<Vec<FutCell>>,
    pub theories: RefCell<Vec<TheoryState>>,
    pub ready: RefCell<Vec<TaskId>>,
    pub spawn_queue: RefCell<Vec<(TaskId, LocalFut)>>,
    pub next_task: Cell<TaskId>,
    pub current: Cell<TaskId>,
    pub steps: Cell<u64>,
    pub step_limit: Cell<u64>,
    pub policy: RefCell<SchedPolicy>,
    pub trace: RefCell<Option<Vec<String>>>,
    /// Exceptions delivered to activities parked in queues.
    pub wake_errors: RefCell<HashMap<TaskId, Thrown>>,
}

impl Interp {
    pub fn new(seed: u64) -> Rc<Interp> {
        let globals = Env::empty().new_rec();
        let it = Rc::new(Interp {
            globals,
            actors: RefCell::new(Vec::new()),
            futures: RefCell::new(Vec::new()),
            theories: RefCell::new(Vec::new()),
            ready: RefCell::new(Vec::new()),
            spawn_queue: RefCell::new(Vec::new()),
            next_task: Cell::new(0),
            current: Cell::new(0),
            steps: Cell::new(0),
            step_limit: Cell::new(DEFAULT_STEP_LIMIT),
            policy: RefCell::new(SchedPolicy::Seeded(SplitMix64(seed))),
            trace: RefCell::new(None),
            wake_errors: RefCell::new(HashMap::new()),
        });
        crate::stdlib::builtins::install(&it);
        it
    }

    pub fn enable_trace(&self) {
        *self.trace.borrow_mut() = Some(Vec::new());
    }

    pub fn take_trace(&self) -> Vec<String> {
        self.trace
            .borrow_mut()
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }

    pub fn trace_event(&self, actor: Option<ActorId>, event: &str, detail: &str) {
        let mut tr = self.trace.borrow_mut();
        if let Some(lines) = tr.as_mut() {
            let actor = match actor {
                Some(a) => a.to_string(),
                None => "-".to_string(),
            };
            lines.push(format!(
                "step={} actor={} event={} detail={}",
                self.steps.get(),
                actor,
                event,
                detail
            ));
        }
    }

    /// Queue a new activity; the executor installs it before the next pick.
    pub fn spawn_task(&self, fut: LocalFut) -> TaskId {
        let id = self.next_task.get();
        self.next_task.set(id + 1);
        self.spawn_queue.borrow_mut().push((id, fut));
        self.ready.borrow_mut().push(id);
        id
    }

    pub fn make_ready(&self, task: TaskId) {
        let mut ready = self.ready.borrow_mut();
        debug_assert!(!ready.contains(&task), "task {task} woken twice");
        ready.push(task);
    }

    pub fn new_future(&self) -> FutureId {
        let mut futs = self.futures.borrow_mut();
        futs.push(FutCell {
            state: FutState::Pending(Vec::new()),
        });
        futs.len() - 1
    }

    /// Single transition Pending -> Resolved/Failed; waiters wake in FIFO
    /// order.
    pub fn resolve_future(&self, fid: FutureId, result: Result<Value, Thrown>) {
        let waiters = {
            let mut futs = self.futures.borrow_mut();
            let cell = &mut futs[fid];
            let prev = std::mem::replace(
                &mut cell.state,
                match result {
                    Ok(v) => FutState::Resolved(v),
                    Err(t) => FutState::Failed(t),
                },
            );
            match prev {
                FutState::Pending(w) => w,
                _ => panic!("future {fid} resolved twice"),
            }
        };
        self.trace_event(None, "resolve", &format!("future {fid}"));
        for t in waiters {
            self.make_ready(t);
        }
    }

    pub fn future_ready(&self, v: Value) -> FutureId {
        let mut futs = self.futures.borrow_mut();
        futs.push(FutCell {
            state: FutState::Resolved(v),
        });
        futs.len() - 1
    }
}

/// Await an unresolved future; registers the current task as a waiter.
pub struct AwaitFut {
    pub it: Rc<Interp>,
    pub fid: FutureId,
    pub registered: bool,
}

impl Future for AwaitFut {
    type Output = Result<Value, Thrown>;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        let me = self.it.current.get();
        let mut futs = self.it.futures.borrow_mut();
        match &mut futs[self.fid].state {
            FutState::Resolved(v) => Poll::Ready(Ok(v.clone())),
            FutState::Failed(t) => Poll::Ready(Err(t.clone())),
            FutState::Pending(waiters) => {
                if !self.registered {
                    waiters.push(me);
                    drop(futs);
                    self.registered = true;
                }
                Poll::Pending
            }
        }
    }
}

/// Wait until this task holds an actor's cheese (it must already have been
/// enqueued on pending, a named queue, or the reentry list).
pub struct WaitGrant {
    pub it: Rc<Interp>,
    pub actor: ActorId,
}

impl Future for WaitGrant {
    type Output = Result<(), Thrown>;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        let me = self.it.current.get();
        if let Some(t) = self.it.wake_errors.borrow_mut().remove(&me) {
            return Poll::Ready(Err(t));
        }
        let actors = self.it.actors.borrow();
        if actors[self.actor].holder == Some(me) {
            Poll::Ready(Ok(()))
        } else {
            Poll::Pending
        }
    }
}

/// Reschedule the current task, letting the scheduler interleave other
/// ready activities. Used where the cheese is released but the releasing
/// activity keeps running (hole entry).
pub struct YieldNow {
    pub it: Rc<Interp>,
    pub yielded: bool,
}

impl Future for YieldNow {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        if self.yielded {
            Poll::Ready(())
        } else {
            self.yielded = true;
            let me = self.it.current.get();
            self.it.make_ready(me);
            Poll::Pending
        }
    }
}

/// Wait for all members of a block group to finish.
pub struct WaitJoin {
    pub it: Rc<Interp>,
    pub cell: Rc<JoinCell>,
}

impl Future for WaitJoin {
    type Output = ();

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        if self.cell.remaining.get() == 0 {
            Poll::Ready(())
        } else {
            self.cell.waiter.set(Some(self.it.current.get()));
            Poll::Pending
        }
    }
}

/// The executor. Owns the task futures so that dropping the machine drops
/// every suspended activity (and with them their `Rc<Interp>` handles).
pub struct Machine {
    pub it: Rc<Interp>,
    tasks: Vec<Option<LocalFut>>,
}

impl Machine {
    pub fn new(it: Rc<Interp>) -> Machine {
        Machine {
            it,
            tasks: Vec::new(),
        }
    }

    fn install_spawned(&mut self) {
        let spawned: Vec<_> = self.it.spawn_queue.borrow_mut().drain(..).collect();
        for (id, fut) in spawned {
            if self.tasks.len() <= id {
                self.tasks.resize_with(id + 1, || None);
            }
            self.tasks[id] = Some(fut);
        }
    }

    /// Run until `done()` holds. Errors when no activity is ready (stall)
    /// or the step budget runs out.
    pub fn run_until(&mut self, done: &dyn Fn() -> bool) -> Result<(), RunError> {
        loop {
            self.install_spawned();
            if done() {
                return Ok(());
            }
            if !self.step_one()? {
                return Err(RunError::StepLimit {
                    steps: self.it.steps.get(),
                    stalled: true,
                });
            }
        }
    }

    /// Run remaining ready activities to quiescence.
    pub fn drain(&mut self) -> Result<(), RunError> {
        loop {
            self.install_spawned();
            if self.it.ready.borrow().is_empty() {
                return Ok(());
            }
            self.step_one()?;
        }
    }

    /// Poll one scheduled activity; returns false when nothing was ready.
    fn step_one(&mut self) -> Result<bool, RunError> {
        let n = self.it.ready.borrow().len();
        if n == 0 {
            return Ok(false);
        }
        let idx = if n == 1 {
            0
        } else {
            self.it.policy.borrow_mut().choose(n)
        };
        let tid = self.it.ready.borrow_mut().remove(idx);
        let steps = self.it.steps.get() + 1;
        self.it.steps.set(steps);
        if steps > self.it.step_limit.get() {
            return Err(RunError::StepLimit {
                steps,
                stalled: false,
            });
        }
        self.it.current.set(tid);
        let mut fut = match self.tasks.get_mut(tid).and_then(Option::take) {
            Some(f) => f,
            None => return Ok(true), // already finished
        };
        let waker = Waker::noop();
        let mut cx = Context::from_waker(waker);
        match fut.as_mut().poll(&mut cx) {
            Poll::Ready(()) => {}
            Poll::Pending => {
                self.tasks[tid] = Some(fut);
            }
        }
        Ok(true)
    }
}
