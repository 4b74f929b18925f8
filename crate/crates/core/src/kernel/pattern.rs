//! Pattern matching. A successful match returns the input environment
//! extended with exactly the pattern's binders. Matching forces futures
//! and postponed values only where it must inspect structure, so binding
//! the tail of a lazy stream does not force it.

use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;

use crate::runtime::machine::Interp;
use crate::syntax::ast::{BinOp, Lit, Pat, PatKind};
use crate::syntax::Span;

use super::env::Env;
use super::eval::{
    eval_value, force_list_step, force_shallow, obj_send, value_implements, ArgsVal, Ctx,
};
use super::value::{structural_equal, type_accepts, ListVal, Value};
use super::Thrown;

pub type MatchFut = Pin<Box<dyn Future<Output = Result<Option<Env>, Thrown>>>>;

pub fn match_pattern(it: Rc<Interp>, p: Rc<Pat>, v: Value, env: Env, cx: Ctx) -> MatchFut {
    Box::pin(async move {
        match &p.kind {
            PatKind::Wildcard => Ok(Some(env)),
            PatKind::TypedWildcard(ty) => {
                let v = force_shallow(&it, v, &p.span).await?;
                let ok = type_accepts(ty, &v, &|val, name| value_implements(&it, val, name));
                Ok(if ok { Some(env) } else { None })
            }
            PatKind::Bind { name, anno } => {
                let v = match anno {
                    Some(ty) => {
                        let forced = force_shallow(&it, v, &p.span).await?;
                        if !type_accepts(ty, &forced, &|val, n| value_implements(&it, val, n)) {
                            return Ok(None);
                        }
                        forced
                    }
                    None => v,
                };
                Ok(Some(env.bind(name.clone(), v)))
            }
            PatKind::Lit(l) => {
                let v = force_shallow(&it, v, &p.span).await?;
                Ok(if lit_matches(l, &v) { Some(env) } else { None })
            }
            PatKind::Eq(expr) => {
                let v = force_shallow(&it, v, &p.span).await?;
                let expected = eval_value(&it, expr, &env, &cx).await?;
                let expected = force_shallow(&it, expected, &p.span).await?;
                Ok(if structural_equal(&expected, &v) {
                    Some(env)
                } else {
                    None
                })
            }
            PatKind::Guard { op, expr } => {
                let v = force_shallow(&it, v, &p.span).await?;
                let rhs = eval_value(&it, expr, &env, &cx).await?;
                let rhs = force_shallow(&it, rhs, &p.span).await?;
                Ok(if guard_holds(*op, &v, &rhs) {
                    Some(env)
                } else {
                    None
                })
            }
            PatKind::ThatIs { base, pred } => {
                match match_pattern(it.clone(), base.clone(), v.clone(), env, cx.clone()).await? {
                    None => Ok(None),
                    Some(extended) => match_pattern(it, pred.clone(), v, extended, cx).await,
                }
            }
            PatKind::And(a, b) => {
                match match_pattern(it.clone(), a.clone(), v.clone(), env, cx.clone()).await? {
                    None => Ok(None),
                    Some(extended) => match_pattern(it, b.clone(), v, extended, cx).await,
                }
            }
            PatKind::Or(a, b) => {
                match match_pattern(it.clone(), a.clone(), v.clone(), env.clone(), cx.clone())
                    .await?
                {
                    Some(extended) => Ok(Some(extended)),
                    None => match_pattern(it, b.clone(), v, env, cx).await,
                }
            }
            PatKind::ListPat(items) => {
                let v = force_shallow(&it, v, &p.span).await?;
                let list = match v {
                    Value::List(l) => l,
                    _ => return Ok(None),
                };
                let pats: Vec<(Rc<Pat>, bool)> = items.clone();
                match_list(
                    &it,
                    &pats,
                    list.items.clone(),
                    list.tail.clone(),
                    env,
                    &cx,
                    &p.span,
                )
                .await
            }
            PatKind::Construct { name, args } => {
                let v = force_shallow(&it, v, &p.span).await?;
                let obj = match &v {
                    Value::Obj(o) => o.clone(),
                    _ => return Ok(None),
                };
                if obj.tag.as_deref() == Some(&**name) {
                    // destructure stored fields
                    if args.iter().all(|(kw, _)| kw.is_none()) {
                        if obj.fields.len() != args.len() {
                            return Ok(None);
                        }
                        let mut cur = env;
                        for ((_, pat), (_, fv)) in args.iter().zip(&obj.fields) {
                            match match_pattern(
                                it.clone(),
                                pat.clone(),
                                fv.clone(),
                                cur,
                                cx.clone(),
                            )
                            .await?
                            {
                                Some(next) => cur = next,
                                None => return Ok(None),
                            }
                        }
                        return Ok(Some(cur));
                    }
                    let mut cur = env;
                    for (kw, pat) in args {
                        let kw = match kw {
                            Some(k) => k,
                            None => return Ok(None),
                        };
                        let fv = match obj.fields.iter().find(|(k, _)| k.as_deref() == Some(&**kw))
                        {
                            Some((_, fv)) => fv.clone(),
                            None => return Ok(None),
                        };
                        match match_pattern(it.clone(), pat.clone(), fv, cur, cx.clone()).await? {
                            Some(next) => cur = next,
                            None => return Ok(None),
                        }
                    }
                    return Ok(Some(cur));
                }
                // interface destructure: read the keyword accessors
                if obj.type_chain.iter().any(|t| **t == **name) {
                    let mut cur = env;
                    for (kw, pat) in args {
                        let kw = match kw {
                            Some(k) => k.clone(),
                            None => return Ok(None),
                        };
                        let fv =
                            obj_send(&it, obj.clone(), kw, ArgsVal::empty(), &p.span, &cx).await?;
                        match match_pattern(it.clone(), pat.clone(), fv, cur, cx.clone()).await? {
                            Some(next) => cur = next,
                            None => return Ok(None),
                        }
                    }
                    return Ok(Some(cur));
                }
                Ok(None)
            }
            PatKind::Tag(name) => {
                let v = force_shallow(&it, v, &p.span).await?;
                Ok(match &v {
                    Value::Obj(o) if o.tag.as_deref() == Some(&**name) => Some(env),
                    _ => None,
                })
            }
        }
    })
}

fn lit_matches(l: &Lit, v: &Value) -> bool {
    match (l, v) {
        (Lit::Int(a), Value::Int(b)) => a == b,
        (Lit::Float(a), Value::Float(b)) => a == b,
        (Lit::Bool(a), Value::Bool(b)) => a == b,
        (Lit::Text(a), Value::Text(b)) => **a == **b,
        (Lit::Void, Value::Void) => true,
        _ => false,
    }
}

fn guard_holds(op: BinOp, v: &Value, rhs: &Value) -> bool {
    if op == BinOp::Eq {
        return structural_equal(v, rhs);
    }
    let (a, b) = match (as_num(v), as_num(rhs)) {
        (Some(a), Some(b)) => (a, b),
        _ => return false,
    };
    match op {
        BinOp::Gt => a > b,
        BinOp::Lt => a < b,
        BinOp::Ge => a >= b,
        BinOp::Le => a <= b,
        _ => false,
    }
}

fn as_num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(n) => Some(*n as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

/// Match a list pattern against eager items plus an optional lazy tail.
/// Spreads take the shortest viable slice, leftmost first, which makes
/// multi-spread patterns deterministic. A trailing binder spread binds the
/// unconsumed remainder (including the unforced tail).
async fn match_list(
    it: &Rc<Interp>,
    pats: &[(Rc<Pat>, bool)],
    mut items: Vec<Value>,
    mut tail: Option<Value>,
    env: Env,
    cx: &Ctx,
    span: &Span,
) -> Result<Option<Env>, Thrown> {
    // ensure at least `n` eager items are available, forcing the tail
    async fn want(
        it: &Rc<Interp>,
        items: &mut Vec<Value>,
        tail: &mut Option<Value>,
        n: usize,
        span: &Span,
    ) -> Result<bool, Thrown> {
        while items.len() < n {
            match tail.take() {
                None => return Ok(false),
                Some(t) => {
                    let (more, rest) = force_list_step(it, t, span).await?;
                    items.extend(more);
                    *tail = rest;
                }
            }
        }
        Ok(true)
    }

    if pats.is_empty() {
        // an empty pattern matches an exhausted list; a lazy tail must
        // force to empty
        loop {
            if !items.is_empty() {
                return Ok(None);
            }
            match tail.take() {
                None => return Ok(Some(env)),
                Some(t) => {
                    let (more, rest) = force_list_step(it, t, span).await?;
                    items = more;
                    tail = rest;
                }
            }
        }
    }
    let (first, spread) = &pats[0];
    if !*spread {
        if !want(it, &mut items, &mut tail, 1, span).await? {
            return Ok(None);
        }
        let head = items.remove(0);
        match match_pattern(it.clone(), first.clone(), head, env, cx.clone()).await? {
            None => Ok(None),
            Some(next) => Box::pin(match_list(it, &pats[1..], items, tail, next, cx, span)).await,
        }
    } else {
        let is_last = pats.len() == 1;
        let binds_rest = matches!(first.kind, PatKind::Bind { .. } | PatKind::Wildcard);
        if is_last && binds_rest {
            let rest = Value::List(Rc::new(ListVal { items, tail }));
            return match_pattern(it.clone(), first.clone(), rest, env, cx.clone()).await;
        }
        // general spread: materialize and try slices shortest-first
        while tail.is_some() {
            let t = tail.take().unwrap();
            let (more, rest) = force_list_step(it, t, span).await?;
            items.extend(more);
            tail = rest;
        }
        for take in 0..=items.len() {
            let slice = Value::list(items[..take].to_vec());
            if let Some(next) =
                match_pattern(it.clone(), first.clone(), slice, env.clone(), cx.clone()).await?
            {
                if let Some(done) = Box::pin(match_list(
                    it,
                    &pats[1..],
                    items[take..].to_vec(),
                    None,
                    next,
                    cx,
                    span,
                ))
                .await?
                {
                    return Ok(Some(done));
                }
            }
        }
        Ok(None)
    }
}
