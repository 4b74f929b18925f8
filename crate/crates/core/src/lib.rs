//! cheesescript: an interpreter and serialized-actor runtime for a small
//! actor language. Actors process one message at a time inside their
//! "cheese" (mutual-exclusion region); queues, holes, and `also` commands
//! give programs explicit control over scheduling. The scheduler is
//! deterministic for a fixed seed and can exhaustively explore
//! interleavings for testing.

pub mod kernel;
pub mod logic;
pub mod runtime;
pub mod stdlib;
pub mod syntax;

pub use kernel::value::Value;
pub use runtime::machine::RunError;
pub use runtime::session::{
    explore_source, run_source, ExploreOutcome, RunOutcome, Session, SessionConfig,
};
pub use syntax::{parse_expression, parse_program, ParseError};
