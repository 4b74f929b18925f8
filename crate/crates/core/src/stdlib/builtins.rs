//! Built-in type tags and procedures installed into every session's
//! global environment.

use std::rc::Rc;

use crate::kernel::value::{BuiltinVal, TypeTag, Value};
use crate::kernel::Thrown;
use crate::runtime::machine::Interp;
use crate::syntax::Span;

fn tag(name: &str) -> Value {
    Value::Type(Rc::new(TypeTag {
        name: Rc::from(name),
        extends: Vec::new(),
    }))
}

fn builtin(
    it: &Rc<Interp>,
    name: &'static str,
    arity: usize,
    f: impl Fn(&Interp, &[Value], &Span) -> Result<Value, Thrown> + 'static,
) {
    let v = Value::Builtin(Rc::new(BuiltinVal {
        name,
        arity: Some(arity),
        f: Box::new(f),
    }));
    it.globals.define_in_rec(Rc::from(name), v);
}

fn want_number(v: &Value, span: &Span) -> Result<f64, Thrown> {
    match v {
        Value::Int(n) => Ok(*n as f64),
        Value::Float(x) => Ok(*x),
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected Number, got {}",
                other.kind_name()
            ))],
            span,
        )),
    }
}

pub fn install(it: &Rc<Interp>) {
    for name in [
        "Integer",
        "Float",
        "Number",
        "NonNegativeInteger",
        "Boolean",
        "Text",
        "String",
        "Currency",
        "Degrees",
        "Length",
        "Queue",
    ] {
        it.globals.define_in_rec(Rc::from(name), tag(name));
    }

    // trigonometry works in degrees
    builtin(it, "sine", 1, |_, args, span| {
        Ok(Value::Float(
            want_number(&args[0], span)?.to_radians().sin(),
        ))
    });
    builtin(it, "cosine", 1, |_, args, span| {
        Ok(Value::Float(
            want_number(&args[0], span)?.to_radians().cos(),
        ))
    });
    builtin(it, "arcsine", 1, |_, args, span| {
        let x = want_number(&args[0], span)?;
        if !(-1.0..=1.0).contains(&x) {
            return Err(Thrown::tagged("DomainError", vec![Value::Float(x)], span));
        }
        Ok(Value::Float(x.asin().to_degrees()))
    });
    builtin(it, "sqrt", 1, |_, args, span| {
        let x = want_number(&args[0], span)?;
        if x < 0.0 {
            return Err(Thrown::tagged("DomainError", vec![Value::Float(x)], span));
        }
        Ok(Value::Float(x.sqrt()))
    });

    builtin(it, "empty", 1, |it, args, span| match &args[0] {
        Value::QueueRef(aid, name) => {
            let actors = it.actors.borrow();
            match actors[*aid].queue_is_empty(name) {
                Some(b) => Ok(Value::Bool(b)),
                None => Err(Thrown::tagged("NotFound", vec![Value::text(name)], span)),
            }
        }
        Value::NullOf(_) => Ok(Value::Bool(true)),
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected Queue, got {}",
                other.kind_name()
            ))],
            span,
        )),
    });

    builtin(it, "Theory", 0, |it, _, _| {
        let mut theories = it.theories.borrow_mut();
        theories.push(crate::logic::TheoryState::new(None));
        Ok(Value::Theory(theories.len() - 1))
    });
    builtin(it, "extension", 1, |it, args, span| match &args[0] {
        Value::Theory(t) => {
            let mut theories = it.theories.borrow_mut();
            theories.push(crate::logic::TheoryState::new(Some(*t)));
            Ok(Value::Theory(theories.len() - 1))
        }
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected Theory, got {}",
                other.kind_name()
            ))],
            span,
        )),
    });

    builtin(it, "jsonParse", 1, |_, args, span| match &args[0] {
        Value::Text(s) => match crate::stdlib::json::json_parse(s) {
            Ok(tree) => Ok(Value::Json(Rc::new(tree))),
            Err(e) => Err(Thrown::tagged(
                "JsonParseError",
                vec![Value::text(&e.to_string())],
                span,
            )),
        },
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected Text, got {}",
                other.kind_name()
            ))],
            span,
        )),
    });
    builtin(it, "jsonPrint", 1, |_, args, span| match &args[0] {
        Value::Json(j) => Ok(Value::text(&crate::stdlib::json::json_print(j))),
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected JSON, got {}",
                other.kind_name()
            ))],
            span,
        )),
    });
}
