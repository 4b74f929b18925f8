//! Serialized actors, the deterministic scheduler, and interleaving
//! exploration.

pub mod actor;
pub mod machine;
pub mod session;

pub use machine::{Interp, Machine, RunError, SchedPolicy, SplitMix64};
pub use session::{explore_source, run_source, ExploreOutcome, Session, SessionConfig};
