//! Program execution: sessions (persistent definitions across inputs),
//! one-shot runs, and exhaustive interleaving exploration.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::rc::Rc;

use crate::kernel::eval::{eval, force_shallow, Ctx};
use crate::kernel::value::{render, Value};
use crate::kernel::Comp;
use crate::syntax::ast::{Expr, ExprKind};
use crate::syntax::{parse_program, Warning};

use super::machine::{Interp, Machine, RunError, SchedPolicy, SplitMix64, DEFAULT_STEP_LIMIT};

pub use super::machine::RunError as SessionError;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub seed: u64,
    pub step_limit: u64,
    pub trace: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            step_limit: DEFAULT_STEP_LIMIT,
            trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ItemOutcome {
    pub value: Value,
    pub rendered: String,
    pub is_definition: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub items: Vec<ItemOutcome>,
    pub steps: u64,
}

/// An interactive or batch session: definitions persist across inputs.
pub struct Session {
    machine: Machine,
    pub warnings: Vec<Warning>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Session {
        let it = Interp::new(config.seed);
        it.step_limit.set(config.step_limit);
        if config.trace {
            it.enable_trace();
        }
        Session {
            machine: Machine::new(it),
            warnings: Vec::new(),
        }
    }

    pub fn interp(&self) -> &Rc<Interp> {
        &self.machine.it
    }

    pub fn set_seed(&mut self, seed: u64) {
        *self.machine.it.policy.borrow_mut() = SchedPolicy::Seeded(SplitMix64(seed));
    }

    pub fn steps(&self) -> u64 {
        self.machine.it.steps.get()
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.machine.it.take_trace()
    }

    /// Run any ready activities to quiescence (useful after waking parked
    /// activities from the embedding side).
    pub fn run_pending(&mut self) -> Result<(), RunError> {
        self.machine.drain()
    }

    /// Parse and evaluate a source text in this session. Each top-level
    /// item runs to completion (then the scheduler drains any leftover
    /// ready activities) before the next begins.
    pub fn eval_source(&mut self, file: &str, source: &str) -> Result<Vec<ItemOutcome>, RunError> {
        let parsed = parse_program(file, source).map_err(RunError::Parse)?;
        self.warnings.extend(parsed.warnings);
        let mut out = Vec::new();
        for item in parsed.items {
            out.push(self.eval_item(&item)?);
        }
        Ok(out)
    }

    pub fn eval_item(&mut self, item: &Rc<Expr>) -> Result<ItemOutcome, RunError> {
        let it = self.machine.it.clone();
        let is_definition = matches!(item.kind, ExprKind::Define(_));
        let slot: Rc<RefCell<Option<Comp>>> = Rc::new(RefCell::new(None));
        let slot2 = slot.clone();
        let it2 = it.clone();
        let item2 = item.clone();
        let env = it.globals.clone();
        it.spawn_task(Box::pin(async move {
            let c = eval(it2.clone(), item2.clone(), env, Ctx::pure()).await;
            // surface values are forced so results print as data
            let c = match c {
                Comp::Ret(v) => match force_shallow(&it2, v, &item2.span).await {
                    Ok(v) => Comp::Ret(v),
                    Err(t) => Comp::Threw(t),
                },
                other => other,
            };
            *slot2.borrow_mut() = Some(c);
        }));
        let slot3 = slot.clone();
        self.machine.run_until(&move || slot3.borrow().is_some())?;
        self.machine.drain()?;
        let comp = slot.borrow_mut().take().expect("main task completed");
        match comp {
            Comp::Ret(v) => {
                let rendered = render(&v);
                Ok(ItemOutcome {
                    value: v,
                    rendered,
                    is_definition,
                })
            }
            Comp::Threw(t) => Err(RunError::Uncaught(t)),
            Comp::Tail(_) => unreachable!("tail call at top level"),
        }
    }
}

/// Run a program once with a fixed seed.
pub fn run_source(file: &str, source: &str, config: SessionConfig) -> Result<RunOutcome, RunError> {
    let mut session = Session::new(config);
    let items = session.eval_source(file, source)?;
    Ok(RunOutcome {
        items,
        steps: session.steps(),
    })
}

#[derive(Debug)]
pub struct ExploreOutcome {
    /// Rendered program results, one entry per distinct observable output.
    pub results: BTreeSet<String>,
    /// False when the interleaving bound stopped the search early.
    pub complete: bool,
    pub paths: u64,
}

/// Exhaustive depth-first search over scheduler decisions: the program is
/// re-run from scratch once per interleaving, replaying a recorded choice
/// prefix and branching on the next unexplored pick.
pub fn explore_source(
    file: &str,
    source: &str,
    bound: u64,
    step_limit: u64,
) -> Result<ExploreOutcome, RunError> {
    let parsed = parse_program(file, source).map_err(RunError::Parse)?;
    let items = parsed.items;
    let mut results = BTreeSet::new();
    let mut path: Vec<u32> = Vec::new();
    let mut paths = 0u64;
    let mut complete = true;
    loop {
        let (output, taken) = explore_once(&items, &path, step_limit);
        results.insert(output);
        paths += 1;
        if paths >= bound {
            // only incomplete if unexplored branches remain
            let mut probe = taken.clone();
            let more = loop {
                match probe.pop() {
                    None => break false,
                    Some((c, f)) => {
                        if c + 1 < f {
                            break true;
                        }
                    }
                }
            };
            complete = !more;
            break;
        }
        // backtrack to the deepest choice with an unexplored branch
        let mut stack = taken;
        let next = loop {
            match stack.pop() {
                None => break None,
                Some((c, f)) => {
                    if c + 1 < f {
                        stack.push((c + 1, f));
                        break Some(stack.iter().map(|(c, _)| *c).collect::<Vec<u32>>());
                    }
                }
            }
        };
        match next {
            Some(p) => path = p,
            None => break,
        }
    }
    Ok(ExploreOutcome {
        results,
        complete,
        paths,
    })
}

fn explore_once(items: &[Rc<Expr>], path: &[u32], step_limit: u64) -> (String, Vec<(u32, u32)>) {
    let it = Interp::new(0);
    it.step_limit.set(step_limit);
    *it.policy.borrow_mut() = SchedPolicy::Prescribed {
        path: path.to_vec(),
        taken: Vec::new(),
    };
    let mut machine = Machine::new(it.clone());
    let mut lines = Vec::new();
    let mut failed = false;
    for item in items {
        let is_definition = matches!(item.kind, ExprKind::Define(_));
        let slot: Rc<RefCell<Option<Comp>>> = Rc::new(RefCell::new(None));
        let slot2 = slot.clone();
        let it2 = it.clone();
        let item2 = item.clone();
        let env = it.globals.clone();
        it.spawn_task(Box::pin(async move {
            let c = eval(it2.clone(), item2.clone(), env, Ctx::pure()).await;
            let c = match c {
                Comp::Ret(v) => match force_shallow(&it2, v, &item2.span).await {
                    Ok(v) => Comp::Ret(v),
                    Err(t) => Comp::Threw(t),
                },
                other => other,
            };
            *slot2.borrow_mut() = Some(c);
        }));
        let slot3 = slot.clone();
        let run = machine
            .run_until(&move || slot3.borrow().is_some())
            .and_then(|()| machine.drain());
        match run {
            Ok(()) => {}
            Err(RunError::StepLimit { stalled, .. }) => {
                lines.push(if stalled {
                    "stalled".to_string()
                } else {
                    "step limit".to_string()
                });
                failed = true;
                break;
            }
            Err(e) => {
                lines.push(format!("error: {e}"));
                failed = true;
                break;
            }
        }
        let comp = slot.borrow_mut().take();
        match comp {
            Some(Comp::Ret(v)) => {
                if !is_definition {
                    lines.push(render(&v));
                }
            }
            Some(Comp::Threw(t)) => {
                lines.push(format!("exception: {}", render(&t.value)));
                failed = true;
                break;
            }
            _ => {
                lines.push("error: incomplete".to_string());
                failed = true;
                break;
            }
        }
    }
    let _ = failed;
    let taken = match &*it.policy.borrow() {
        SchedPolicy::Prescribed { taken, .. } => taken.clone(),
        _ => Vec::new(),
    };
    (lines.join("\n"), taken)
}
