pub mod env;
pub mod eval;
pub mod pattern;
pub mod value;

use crate::syntax::Span;
use value::Value;

/// A thrown exception together with the source location it originated at.
#[derive(Clone, Debug)]
pub struct Thrown {
    pub value: Value,
    pub span: Span,
}

impl Thrown {
    pub fn new(value: Value, span: &Span) -> Thrown {
        Thrown {
            value,
            span: span.clone(),
        }
    }

    pub fn tagged(tag: &str, fields: Vec<Value>, span: &Span) -> Thrown {
        Thrown {
            value: Value::exception(tag, fields),
            span: span.clone(),
        }
    }
}

/// Result of evaluating one expression. `Tail` is internal to `inline`
/// loops; the static tail-call check keeps it from escaping.
#[derive(Clone, Debug)]
pub enum Comp {
    Ret(Value),
    Threw(Thrown),
    Tail(Vec<Value>),
}

impl Comp {
    pub fn ret(v: Value) -> Comp {
        Comp::Ret(v)
    }
}

/// Shorthand for the pervasive `Result<Value, Thrown>`.
pub type VResult = Result<Value, Thrown>;
