//! Expression evaluation and the actor message protocol.
//!
//! Evaluation is written in async style: suspension points (touching an
//! unresolved future, parking in a queue, waiting for the cheese) are
//! custom futures that register the current activity with the runtime,
//! so the deterministic scheduler decides every resumption.

use std::cell::RefCell;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::logic::{
    ancestry, binding_key, unify, unify_with_goal, visible_facts, visible_from, Binding, Goal,
    Prop, Rule, Term, TheoryState,
};
use crate::runtime::actor::{ActorState, Layer, LazyCell};
use crate::runtime::machine::{AwaitFut, Interp, JoinCell, WaitGrant, WaitJoin, YieldNow};
use crate::syntax::ast::*;
use crate::syntax::Span;

use super::env::Env;
use super::pattern::match_pattern;
use super::value::{
    canonical_cmp, canonical_sort, make_multimap, make_set, next_serial, render, structural_equal,
    type_accepts, ActorDeclVal, ActorId, ClosureVal, EnumType as EnumTypeVal, FutureId, ListVal,
    MessageVal, ObjVal, StructDeclVal, Suite, TypeTag, Value,
};
use super::{Comp, Thrown, VResult};

pub type EvalFut = Pin<Box<dyn Future<Output = Comp>>>;

/// Internal selector used to force postponed values.
pub const TOUCH: &str = "%touch";

#[derive(Default)]
pub struct ChangeAcc {
    pub assigns: Vec<(Rc<str>, Value, Span)>,
    pub dequeues: Vec<(ActorId, Rc<str>)>,
    pub forward: Option<Value>,
}

/// Evaluation context: the actor whose method is executing (if any), the
/// dispatch layer (for `relay`), the pending change set, and the current
/// exception for `rethrow`.
#[derive(Clone)]
pub struct Ctx {
    pub actor: Option<ActorId>,
    pub layer: usize,
    pub change: Option<Rc<RefCell<ChangeAcc>>>,
    pub exc: Option<Rc<Thrown>>,
    /// Receiver whose method body is executing; sibling method names act
    /// as messages to self.
    pub self_obj: Option<Rc<ObjVal>>,
    /// Inside a command, a conditional with no applicable handler is a
    /// no-op instead of an error.
    pub in_command: bool,
}

impl Ctx {
    pub fn pure() -> Ctx {
        Ctx {
            actor: None,
            layer: 0,
            change: None,
            exc: None,
            self_obj: None,
            in_command: false,
        }
    }

    fn detached(&self) -> Ctx {
        Ctx::pure()
    }

    fn with_exc(&self, t: &Thrown) -> Ctx {
        let mut cx = self.clone();
        cx.exc = Some(Rc::new(t.clone()));
        cx
    }
}

#[derive(Clone, Default)]
pub struct ArgsVal {
    pub positional: Vec<Value>,
    pub keyword: Vec<(Rc<str>, Value)>,
}

impl ArgsVal {
    pub fn empty() -> ArgsVal {
        ArgsVal::default()
    }

    pub fn positional(vals: Vec<Value>) -> ArgsVal {
        ArgsVal {
            positional: vals,
            keyword: Vec::new(),
        }
    }
}

fn internal_err(span: &Span, what: &str) -> Thrown {
    Thrown::tagged("InternalError", vec![Value::text(what)], span)
}

pub async fn eval_value(it: &Rc<Interp>, e: &Rc<Expr>, env: &Env, cx: &Ctx) -> VResult {
    match eval(it.clone(), e.clone(), env.clone(), cx.clone()).await {
        Comp::Ret(v) => Ok(v),
        Comp::Threw(t) => Err(t),
        Comp::Tail(_) => Err(internal_err(&e.span, "tail call escaped its inline loop")),
    }
}

fn comp(r: VResult) -> Comp {
    match r {
        Ok(v) => Comp::Ret(v),
        Err(t) => Comp::Threw(t),
    }
}

// ── Forcing ──────────────────────────────────────────────────────────────

/// Resolve futures and postponed proxies until a plain value emerges.
/// Binding a value does not force it; using it does.
pub async fn force_shallow(it: &Rc<Interp>, mut v: Value, span: &Span) -> VResult {
    loop {
        match v {
            Value::Future(fid) => {
                v = AwaitFut {
                    it: it.clone(),
                    fid,
                    registered: false,
                }
                .await?;
            }
            Value::ActorRef(aid) => {
                enum Kind {
                    Plain,
                    Forwarded(Value),
                    Lazy,
                }
                let kind = {
                    let actors = it.actors.borrow();
                    let a = &actors[aid];
                    if let Some(f) = &a.forwarded {
                        Kind::Forwarded(f.clone())
                    } else if a.lazy.is_some() || a.lazy_failed.is_some() {
                        Kind::Lazy
                    } else {
                        Kind::Plain
                    }
                };
                match kind {
                    Kind::Plain => return Ok(Value::ActorRef(aid)),
                    Kind::Forwarded(f) => v = f,
                    Kind::Lazy => {
                        let msg = Rc::new(MessageVal {
                            selector: Rc::from(TOUCH),
                            positional: Vec::new(),
                            keyword: Vec::new(),
                        });
                        v = send_and_wait(it, aid, msg, span).await?;
                    }
                }
            }
            other => return Ok(other),
        }
    }
}

/// Force one step of a lazy list tail: the values it yields plus any
/// further tail.
pub async fn force_list_step(
    it: &Rc<Interp>,
    tail: Value,
    span: &Span,
) -> Result<(Vec<Value>, Option<Value>), Thrown> {
    let v = force_shallow(it, tail, span).await?;
    match v {
        Value::List(l) => Ok((l.items.clone(), l.tail.clone())),
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected a list, got {}",
                other.kind_name()
            ))],
            span,
        )),
    }
}

pub async fn force_list_fully(
    it: &Rc<Interp>,
    v: Value,
    span: &Span,
) -> Result<Vec<Value>, Thrown> {
    let v = force_shallow(it, v, span).await?;
    match v {
        Value::List(l) => {
            let mut items = l.items.clone();
            let mut tail = l.tail.clone();
            while let Some(t) = tail {
                let (more, rest) = force_list_step(it, t, span).await?;
                items.extend(more);
                tail = rest;
            }
            Ok(items)
        }
        Value::Multiset(ms) | Value::Set(ms) => Ok((*ms).clone()),
        other => Err(Thrown::tagged(
            "TypeMismatch",
            vec![Value::text(&format!(
                "expected a list, got {}",
                other.kind_name()
            ))],
            span,
        )),
    }
}

pub fn value_implements(it: &Interp, v: &Value, name: &str) -> bool {
    match v {
        Value::Obj(o) => o.type_chain.iter().any(|t| &**t == name),
        Value::ActorRef(a) => {
            let actors = it.actors.borrow();
            let st = &actors[*a];
            &*st.name == name || st.implements.iter().any(|i| &**i == name)
        }
        Value::Enum(t, _) => &*t.name == name,
        Value::Theory(_) => name == "Theory",
        _ => false,
    }
}

// ── The evaluator ────────────────────────────────────────────────────────

pub fn eval(it: Rc<Interp>, e: Rc<Expr>, env: Env, cx: Ctx) -> EvalFut {
    Box::pin(async move { eval_inner(&it, &e, &env, &cx).await })
}

async fn eval_inner(it: &Rc<Interp>, e: &Rc<Expr>, env: &Env, cx: &Ctx) -> Comp {
    let span = &e.span;
    match &e.kind {
        ExprKind::Literal(l) => Comp::Ret(lit_value(l)),
        ExprKind::Ident(name) => {
            if let Some(v) = env.lookup_with(name, |aid, n| resolve_actor_name(it, aid, n)) {
                return Comp::Ret(v);
            }
            if let Some(obj) = &cx.self_obj {
                let has = obj
                    .suites
                    .iter()
                    .any(|s| s.methods.iter().any(|m| m.bare && *m.selector == **name))
                    || obj
                        .fields
                        .iter()
                        .any(|(k, _)| k.as_deref() == Some(&**name));
                if has {
                    return comp(
                        obj_send(it, obj.clone(), name.clone(), ArgsVal::empty(), span, cx).await,
                    );
                }
            }
            if starts_upper(name) {
                return Comp::Ret(symbolic_obj(name, ArgsVal::empty()));
            }
            Comp::Threw(Thrown::tagged("NotFound", vec![Value::text(name)], span))
        }
        ExprKind::Universal => Comp::Ret(Value::Type(Rc::new(TypeTag {
            name: Rc::from("?"),
            extends: Vec::new(),
        }))),
        ExprKind::NullOf(t) => Comp::Ret(Value::NullOf(Rc::from(type_name(t)))),

        ExprKind::Cond {
            subject,
            arms,
            catch_arms,
        } => {
            let sub = eval(it.clone(), subject.clone(), env.clone(), cx.clone()).await;
            match sub {
                Comp::Tail(t) => Comp::Tail(t),
                Comp::Threw(t) => {
                    if catch_arms.is_empty() {
                        return Comp::Threw(t);
                    }
                    let hcx = cx.with_exc(&t);
                    match run_arms(it, catch_arms, t.value.clone(), env, &hcx).await {
                        Ok(Some(c)) => c,
                        Ok(None) => Comp::Threw(t),
                        Err(t2) => Comp::Threw(t2),
                    }
                }
                Comp::Ret(v) => match run_arms(it, arms, v, env, cx).await {
                    Ok(Some(c)) => c,
                    Ok(None) => {
                        if cx.in_command {
                            Comp::Ret(Value::Void)
                        } else {
                            Comp::Threw(Thrown::tagged("NoApplicableHandler", vec![], span))
                        }
                    }
                    Err(t) => Comp::Threw(t),
                },
            }
        }

        ExprKind::Let { bindings, body } => {
            // `in` commits the bindings so far; `with` evaluates against
            // the environment from before the current group
            let mut base = env.clone();
            let mut cur = env.clone();
            for (i, b) in bindings.iter().enumerate() {
                if i > 0 && b.sep == BindSep::In {
                    base = cur.clone();
                }
                let v = match eval_value(it, &b.expr, &base, cx).await {
                    Ok(v) => v,
                    Err(t) => return Comp::Threw(t),
                };
                match match_pattern(it.clone(), b.pattern.clone(), v, cur, cx.clone()).await {
                    Ok(Some(next)) => cur = next,
                    Ok(None) => {
                        return Comp::Threw(Thrown::tagged("MatchFailure", vec![], &b.pattern.span))
                    }
                    Err(t) => return Comp::Threw(t),
                }
            }
            eval(it.clone(), body.clone(), cur, cx.clone()).await
        }

        ExprKind::Where { body, defs } => {
            let rec = env.new_rec();
            for d in defs {
                if let Err(t) = elaborate_def(it, d, &rec, cx).await {
                    return Comp::Threw(t);
                }
            }
            eval(it.clone(), body.clone(), rec, cx.clone()).await
        }

        ExprKind::Define(def) => match elaborate_def(it, def, env, cx).await {
            Ok(()) => Comp::Ret(Value::Void),
            Err(t) => Comp::Threw(t),
        },

        ExprKind::Call { callee, args } => {
            let f = match eval_value(it, callee, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let f = match force_shallow(it, f, span).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let argv = match eval_args(it, args, env, cx, span).await {
                Ok(a) => a,
                Err(t) => return Comp::Threw(t),
            };
            apply(it, f, argv, cx, span).await
        }

        ExprKind::DotSend {
            recv,
            selector,
            args,
        } => {
            let r = match eval_value(it, recv, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let r = match force_shallow(it, r, span).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let argv = match args {
                Some(a) => match eval_args(it, a, env, cx, span).await {
                    Ok(a) => a,
                    Err(t) => return Comp::Threw(t),
                },
                None => ArgsVal::empty(),
            };
            comp(dot_send(it, r, selector.clone(), argv, span, cx).await)
        }

        ExprKind::Receiver { methods } => Comp::Ret(Value::Obj(Rc::new(ObjVal {
            tag: None,
            type_chain: Vec::new(),
            fields: Vec::new(),
            suites: vec![Suite {
                interface: None,
                methods: methods.clone(),
            }],
            env: env.clone(),
            view: None,
            serial: next_serial(),
        }))),

        ExprKind::InterfaceDecl { extends, sigs: _ } => {
            Comp::Ret(make_interface(it, "Interface", extends.as_deref(), env))
        }

        ExprKind::Actor(decl) => Comp::Ret(Value::ActorDeclV(Rc::new(ActorDeclVal {
            name: Rc::from("actor"),
            decl: decl.clone(),
            env: env.clone(),
        }))),

        ExprKind::StructBody { .. } => Comp::Threw(Thrown::tagged(
            "SyntaxMisuse",
            vec![Value::text(
                "implements-body outside a structure definition",
            )],
            span,
        )),

        ExprKind::BracketConstruct { name, args } => {
            let argv = match eval_args(it, args, env, cx, span).await {
                Ok(a) => a,
                Err(t) => return Comp::Threw(t),
            };
            match env.lookup_with(name, |aid, n| resolve_actor_name(it, aid, n)) {
                Some(Value::StructDeclV(decl)) => comp(construct_obj(it, &decl, argv, span).await),
                Some(other) => {
                    // constructing through a non-declaration value only
                    // makes sense for symbolic tags
                    if is_symbolic_obj(&other) {
                        Comp::Ret(symbolic_obj(name, argv))
                    } else {
                        Comp::Threw(Thrown::tagged(
                            "TypeMismatch",
                            vec![Value::text(&format!("{name} is not a structure"))],
                            span,
                        ))
                    }
                }
                None if starts_upper(name) => Comp::Ret(symbolic_obj(name, argv)),
                None => Comp::Threw(Thrown::tagged("NotFound", vec![Value::text(name)], span)),
            }
        }

        ExprKind::ListExpr(items) => comp(build_list(it, items, env, cx, span).await),
        ExprKind::MultisetExpr(items) => match collect_spread(it, items, env, cx, span).await {
            Ok(mut vals) => {
                canonical_sort(&mut vals);
                Comp::Ret(Value::Multiset(Rc::new(vals)))
            }
            Err(t) => Comp::Threw(t),
        },
        ExprKind::SetExpr(items) => match collect_spread(it, items, env, cx, span).await {
            Ok(vals) => Comp::Ret(Value::Set(Rc::new(make_set(vals)))),
            Err(t) => Comp::Threw(t),
        },

        ExprKind::MapExpr { entries, multi } => {
            comp(build_map(it, entries, *multi, env, cx, span).await)
        }

        ExprKind::Block { items, seps } => eval_block(it, items, seps, env, cx, span).await,

        ExprKind::Throw(v) => match eval_value(it, v, env, cx).await {
            Ok(v) => Comp::Threw(Thrown::new(v, span)),
            Err(t) => Comp::Threw(t),
        },

        ExprKind::CatchExpr { body, arms } => {
            let c = eval(it.clone(), body.clone(), env.clone(), cx.clone()).await;
            match c {
                Comp::Threw(t) => {
                    let hcx = cx.with_exc(&t);
                    match run_arms(it, arms, t.value.clone(), env, &hcx).await {
                        Ok(Some(c)) => c,
                        Ok(None) => Comp::Threw(t),
                        Err(t2) => Comp::Threw(t2),
                    }
                }
                other => other,
            }
        }

        ExprKind::Cast { ty, value } => {
            let t = match eval_value(it, ty, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let v = match eval_value(it, value, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            let v = match force_shallow(it, v, span).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            comp(eval_cast(it, t, v, span))
        }

        ExprKind::FutureExpr(inner) => {
            let fid = it.new_future();
            let it2 = it.clone();
            let inner = inner.clone();
            let env2 = env.clone();
            let dcx = cx.detached();
            it.spawn_task(Box::pin(async move {
                let r = eval_value(&it2, &inner, &env2, &dcx).await;
                it2.resolve_future(fid, r);
            }));
            Comp::Ret(Value::Future(fid))
        }

        ExprKind::PostponeExpr(inner) => {
            let aid = {
                let mut actors = it.actors.borrow_mut();
                let mut st = ActorState::new(Rc::from("postpone"));
                st.lazy = Some(LazyCell {
                    expr: inner.clone(),
                    env: env.clone(),
                });
                actors.push(st);
                actors.len() - 1
            };
            Comp::Ret(Value::ActorRef(aid))
        }

        ExprKind::Inline { name, inits, body } => {
            let names: Vec<Rc<str>> = inits.iter().map(|(n, _)| n.clone()).collect();
            let mut vals = Vec::with_capacity(inits.len());
            for (_, ie) in inits {
                match eval_value(it, ie, env, cx).await {
                    Ok(v) => vals.push(v),
                    Err(t) => return Comp::Threw(t),
                }
            }
            loop {
                let mut env2 = env.bind(name.clone(), Value::InlineMarker(name.clone()));
                for (n, v) in names.iter().zip(&vals) {
                    env2 = env2.bind(n.clone(), v.clone());
                }
                match eval(it.clone(), body.clone(), env2, cx.clone()).await {
                    Comp::Tail(args) => {
                        if args.len() != names.len() {
                            return Comp::Threw(Thrown::tagged(
                                "MatchFailure",
                                vec![Value::text("inline loop arity mismatch")],
                                span,
                            ));
                        }
                        vals = args;
                    }
                    other => return other,
                }
            }
        }

        ExprKind::EnumDecl(names) => Comp::Ret(Value::EnumType(Rc::new(EnumTypeVal {
            name: Rc::from("Enumeration"),
            members: names.clone(),
        }))),

        ExprKind::JsonLit(j) => Comp::Ret(Value::Json(Rc::new(json_from_ast(j)))),

        ExprKind::LogicAssert { theory, prop } => {
            comp(eval_logic_assert(it, theory, prop, env, cx, span).await)
        }
        ExprKind::LogicWhenAssert {
            theory,
            pattern,
            body,
        } => comp(eval_logic_when_assert(it, theory, pattern, body, env, cx, span).await),
        ExprKind::LogicGoal {
            theory,
            pattern,
            body,
        } => comp(eval_logic_goal(it, theory, pattern, body.as_ref(), env, cx, span).await),
        ExprKind::LogicWhenGoal {
            theory,
            pattern,
            body,
        } => comp(eval_logic_when_goal(it, theory, pattern, body, env, cx, span).await),

        ExprKind::Also { value, cmds } => {
            if cx.change.is_none() {
                return Comp::Threw(Thrown::tagged(
                    "NotInActorMethod",
                    vec![Value::text("'also' outside a method")],
                    span,
                ));
            }
            let outcome = match value {
                AlsoValue::Return(ve) => match eval_value(it, ve, env, cx).await {
                    Ok(v) => Comp::Ret(v),
                    Err(t) => return Comp::Threw(t),
                },
                AlsoValue::Throw(ve) => match eval_value(it, ve, env, cx).await {
                    Ok(v) => Comp::Threw(Thrown::new(v, span)),
                    Err(t) => return Comp::Threw(t),
                },
            };
            if let Err(t) = perform_commands(it, cmds, env, cx, false).await {
                return Comp::Threw(t);
            }
            outcome
        }

        ExprKind::Rethrow { cmds } => {
            let exc = match &cx.exc {
                Some(t) => (**t).clone(),
                None => {
                    return Comp::Threw(Thrown::tagged(
                        "SyntaxMisuse",
                        vec![Value::text("rethrow outside a catch handler")],
                        span,
                    ))
                }
            };
            if let Err(t) = perform_commands(it, cmds, env, cx, false).await {
                return Comp::Threw(t);
            }
            Comp::Threw(exc)
        }

        ExprKind::PassThru { qexpr, catch, cont } => {
            eval_passthru(it, qexpr, catch, cont, env, cx, span).await
        }

        ExprKind::Prep { cmds, tail } => {
            let aid = match cx.actor {
                Some(a) => a,
                None => {
                    return Comp::Threw(Thrown::tagged(
                        "NotInActorMethod",
                        vec![Value::text("'prep' outside a method")],
                        span,
                    ))
                }
            };
            if let Err(t) = perform_commands(it, cmds, env, cx, true).await {
                return Comp::Threw(t);
            }
            match tail {
                PrepTail::Hole { expr } => {
                    if let Err(t) = check_invariants(it, aid, span) {
                        return Comp::Threw(t);
                    }
                    if let Err(t) = release_cheese(it, aid, span) {
                        return Comp::Threw(t);
                    }
                    // the cheese is open: give other activities a chance
                    // to enter before and while the hole runs
                    YieldNow {
                        it: it.clone(),
                        yielded: false,
                    }
                    .await;
                    let r = eval(it.clone(), expr.clone(), env.clone(), cx.clone()).await;
                    if let Err(t) = reacquire_after_hole(it, aid).await {
                        return Comp::Threw(t);
                    }
                    if let Err(t) = check_invariants(it, aid, span) {
                        return Comp::Threw(t);
                    }
                    r
                }
                PrepTail::PassThru { qexpr, catch, cont } => {
                    eval_passthru(it, qexpr, catch, cont, env, cx, span).await
                }
            }
        }

        ExprKind::Relay {
            selector,
            args,
            arms,
            catch_arms,
        } => eval_relay_stay(it, true, selector, args, arms, catch_arms, env, cx, span).await,
        ExprKind::Stay {
            selector,
            args,
            arms,
            catch_arms,
        } => eval_relay_stay(it, false, selector, args, arms, catch_arms, env, cx, span).await,

        ExprKind::Lambda { params, body } => Comp::Ret(Value::Closure(Rc::new(ClosureVal {
            name: None,
            params: params.clone(),
            body: body.clone(),
            env: env.clone(),
            serial: next_serial(),
        }))),

        ExprKind::Bin { op, lhs, rhs } => comp(eval_bin(it, *op, lhs, rhs, env, cx, span).await),

        ExprKind::Not(inner) => {
            let v = match eval_forced(it, inner, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            match v {
                Value::Bool(b) => Comp::Ret(Value::Bool(!b)),
                other => Comp::Threw(type_mismatch(span, "Boolean", &other)),
            }
        }

        ExprKind::Neg(inner) => {
            let v = match eval_forced(it, inner, env, cx).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            match v {
                Value::Int(n) => match n.checked_neg() {
                    Some(m) => Comp::Ret(Value::Int(m)),
                    None => Comp::Threw(Thrown::tagged("ArithmeticOverflow", vec![], span)),
                },
                Value::Float(x) => Comp::Ret(Value::Float(-x)),
                other => Comp::Threw(type_mismatch(span, "Number", &other)),
            }
        }
    }
}

fn lit_value(l: &Lit) -> Value {
    match l {
        Lit::Int(n) => Value::Int(*n),
        Lit::Float(x) => Value::Float(*x),
        Lit::Bool(b) => Value::Bool(*b),
        Lit::Text(s) => Value::Text(s.clone()),
        Lit::Void => Value::Void,
    }
}

fn starts_upper(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_uppercase())
}

fn is_symbolic_obj(v: &Value) -> bool {
    matches!(v, Value::Obj(o) if o.suites.is_empty() && o.fields.is_empty() && o.tag.is_some())
}

fn symbolic_obj(name: &str, args: ArgsVal) -> Value {
    let mut fields: Vec<(Option<Rc<str>>, Value)> =
        args.positional.into_iter().map(|v| (None, v)).collect();
    fields.extend(args.keyword.into_iter().map(|(k, v)| (Some(k), v)));
    Value::Obj(Rc::new(ObjVal {
        tag: Some(Rc::from(name)),
        type_chain: vec![Rc::from(name)],
        fields,
        suites: Vec::new(),
        env: Env::empty(),
        view: None,
        serial: next_serial(),
    }))
}

fn resolve_actor_name(it: &Interp, aid: ActorId, name: &str) -> Option<Value> {
    let actors = it.actors.borrow();
    let a = &actors[aid];
    if let Some(v) = a.vars.get(name) {
        return Some(v.clone());
    }
    if a.queues.contains_key(name) {
        return Some(Value::QueueRef(aid, Rc::from(name)));
    }
    None
}

fn type_mismatch(span: &Span, wanted: &str, got: &Value) -> Thrown {
    Thrown::tagged(
        "TypeMismatch",
        vec![Value::text(&format!(
            "expected {wanted}, got {}",
            got.kind_name()
        ))],
        span,
    )
}

fn type_name(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Universal => "?".into(),
        TypeExpr::Named(n) => n.to_string(),
        TypeExpr::Nullable(inner) => format!("Nullable {}", type_name(inner)),
        TypeExpr::ListOf(inner, star) => {
            format!("[{}{}]", type_name(inner), if *star { "*" } else { "" })
        }
        TypeExpr::Fn(..) => "procedure".into(),
    }
}

async fn eval_forced(it: &Rc<Interp>, e: &Rc<Expr>, env: &Env, cx: &Ctx) -> VResult {
    let v = eval_value(it, e, env, cx).await?;
    force_shallow(it, v, &e.span).await
}

// ── Handlers ─────────────────────────────────────────────────────────────

async fn run_arms(
    it: &Rc<Interp>,
    arms: &[Arm],
    subject: Value,
    env: &Env,
    cx: &Ctx,
) -> Result<Option<Comp>, Thrown> {
    for arm in arms {
        let matched = match &arm.pattern {
            None => Some(env.clone()),
            Some(p) => {
                match_pattern(
                    it.clone(),
                    p.clone(),
                    subject.clone(),
                    env.clone(),
                    cx.clone(),
                )
                .await?
            }
        };
        if let Some(extended) = matched {
            return Ok(Some(
                eval(it.clone(), arm.body.clone(), extended, cx.clone()).await,
            ));
        }
    }
    Ok(None)
}

// ── Definitions ──────────────────────────────────────────────────────────

async fn elaborate_def(
    it: &Rc<Interp>,
    def: &Definition,
    env: &Env,
    cx: &Ctx,
) -> Result<(), Thrown> {
    let name = def.name().clone();
    let value = match (&def.head, &def.body.kind) {
        (Definiendum::Proc { params, .. }, _) => Value::Closure(Rc::new(ClosureVal {
            name: Some(name.clone()),
            params: params.clone(),
            body: def.body.clone(),
            env: env.clone(),
            serial: next_serial(),
        })),
        (Definiendum::Struct { params, .. }, ExprKind::StructBody { impls }) => {
            Value::StructDeclV(Rc::new(StructDeclVal {
                name: name.clone(),
                params: params.clone(),
                impls: impls
                    .iter()
                    .map(|i| (i.interface.clone(), i.methods.clone()))
                    .collect(),
                env: env.clone(),
            }))
        }
        (Definiendum::Struct { .. }, _) => {
            return Err(Thrown::tagged(
                "SyntaxMisuse",
                vec![Value::text("structure definitions take implements bodies")],
                &def.span,
            ))
        }
        (Definiendum::Name(_), ExprKind::Actor(decl)) => Value::ActorDeclV(Rc::new(ActorDeclVal {
            name: name.clone(),
            decl: decl.clone(),
            env: env.clone(),
        })),
        (Definiendum::Name(_), ExprKind::InterfaceDecl { extends, .. }) => {
            make_interface(it, &name, extends.as_deref(), env)
        }
        (Definiendum::Name(_), ExprKind::EnumDecl(members)) => {
            Value::EnumType(Rc::new(EnumTypeVal {
                name: name.clone(),
                members: members.clone(),
            }))
        }
        (Definiendum::Name(_), ExprKind::Where { body, defs })
            if matches!(body.kind, ExprKind::Actor(_)) =>
        {
            // an actor definition with trailing where-definitions captures
            // them in its environment
            let rec = env.new_rec();
            for d in defs {
                Box::pin(elaborate_def(it, d, &rec, cx)).await?;
            }
            match &body.kind {
                ExprKind::Actor(decl) => Value::ActorDeclV(Rc::new(ActorDeclVal {
                    name: name.clone(),
                    decl: decl.clone(),
                    env: rec,
                })),
                _ => unreachable!(),
            }
        }
        (Definiendum::Name(_), _) => eval_value(it, &def.body, env, cx).await?,
    };
    if !env.define_in_rec(name.clone(), value) {
        return Err(Thrown::tagged(
            "SyntaxMisuse",
            vec![Value::text("definition outside a definition group")],
            &def.span,
        ));
    }
    Ok(())
}

fn make_interface(_it: &Rc<Interp>, name: &str, extends: Option<&str>, env: &Env) -> Value {
    let mut chain = Vec::new();
    if let Some(parent) = extends {
        chain.push(Rc::from(parent));
        if let Some(Value::Type(t)) = env.lookup(parent) {
            chain.extend(t.extends.iter().cloned());
        }
    }
    Value::Type(Rc::new(TypeTag {
        name: Rc::from(name),
        extends: chain,
    }))
}

// ── Arguments and parameters ─────────────────────────────────────────────

pub async fn eval_args(
    it: &Rc<Interp>,
    args: &CallArgs,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> Result<ArgsVal, Thrown> {
    let mut out = ArgsVal::empty();
    for a in &args.items {
        let v = eval_value(it, &a.value, env, cx).await?;
        if a.spread {
            out.positional.extend(force_list_fully(it, v, span).await?);
        } else if let Some(k) = &a.keyword {
            out.keyword.push((k.clone(), v));
        } else {
            out.positional.push(v);
        }
    }
    Ok(out)
}

/// Match call arguments against a parameter list, producing bindings.
/// Keyword slots pull keyword arguments by name; the rest go positionally.
pub async fn match_params(
    it: &Rc<Interp>,
    params: &Params,
    args: &ArgsVal,
    span: &Span,
) -> Result<Vec<(Rc<str>, Value, bool)>, Thrown> {
    let mut positional: std::collections::VecDeque<Value> =
        args.positional.iter().cloned().collect();
    let mut keyword: Vec<(Rc<str>, Value)> = args.keyword.clone();
    let mut out = Vec::new();
    for slot in &params.slots {
        let v = if let Some(kw) = &slot.keyword {
            if let Some(pos) = keyword.iter().position(|(k, _)| k == kw) {
                keyword.remove(pos).1
            } else if let Some(v) = positional.pop_front() {
                v
            } else {
                return Err(Thrown::tagged(
                    "MatchFailure",
                    vec![Value::text(&format!("missing argument {kw}"))],
                    span,
                ));
            }
        } else if let Some(v) = positional.pop_front() {
            v
        } else {
            return Err(Thrown::tagged(
                "MatchFailure",
                vec![Value::text("missing argument")],
                span,
            ));
        };
        let v = if let Some(ty) = &slot.anno {
            let forced = force_shallow(it, v, span).await?;
            if !type_accepts(ty, &forced, &|val, n| value_implements(it, val, n)) {
                return Err(Thrown::tagged(
                    "TypeMismatch",
                    vec![Value::text(&format!(
                        "argument of type {} does not satisfy {}",
                        forced.kind_name(),
                        type_name(ty)
                    ))],
                    span,
                ));
            }
            forced
        } else {
            v
        };
        match &slot.pattern.kind {
            PatKind::Bind { name, .. } => out.push((name.clone(), v, slot.rigid)),
            PatKind::Wildcard => {}
            _ => {
                return Err(Thrown::tagged(
                    "MatchFailure",
                    vec![Value::text("unsupported parameter binder")],
                    span,
                ))
            }
        }
    }
    if let Some((rest_name, anno)) = &params.rest {
        let rest: Vec<Value> = positional.drain(..).collect();
        let rest = Value::list(rest);
        if let Some(ty) = anno {
            if !type_accepts(ty, &rest, &|val, n| value_implements(it, val, n)) {
                return Err(Thrown::tagged(
                    "TypeMismatch",
                    vec![Value::text("variadic arguments do not satisfy annotation")],
                    span,
                ));
            }
        }
        out.push((rest_name.clone(), rest, false));
    }
    if !positional.is_empty() || !keyword.is_empty() {
        return Err(Thrown::tagged(
            "MatchFailure",
            vec![Value::text("too many arguments")],
            span,
        ));
    }
    Ok(out)
}

// ── Application ──────────────────────────────────────────────────────────

async fn apply(it: &Rc<Interp>, f: Value, args: ArgsVal, cx: &Ctx, span: &Span) -> Comp {
    match f {
        Value::Closure(c) => {
            let bindings = match match_params(it, &c.params, &args, span).await {
                Ok(b) => b,
                Err(t) => return Comp::Threw(t),
            };
            let mut env = c.env.clone();
            for (n, v, _) in bindings {
                env = env.bind(n, v);
            }
            eval(it.clone(), c.body.clone(), env, cx.clone()).await
        }
        Value::Builtin(b) => {
            if !args.keyword.is_empty() {
                return Comp::Threw(Thrown::tagged(
                    "MatchFailure",
                    vec![Value::text("builtin procedures take positional arguments")],
                    span,
                ));
            }
            if let Some(n) = b.arity {
                if args.positional.len() != n {
                    return Comp::Threw(Thrown::tagged(
                        "MatchFailure",
                        vec![Value::text(&format!("{} takes {} argument(s)", b.name, n))],
                        span,
                    ));
                }
            }
            // builtins receive forced arguments
            let mut forced = Vec::with_capacity(args.positional.len());
            for v in args.positional {
                match force_shallow(it, v, span).await {
                    Ok(v) => forced.push(v),
                    Err(t) => return Comp::Threw(t),
                }
            }
            comp((b.f)(it, &forced, span))
        }
        Value::ActorDeclV(decl) => comp(spawn_actor(it, &decl, args, span).await),
        Value::StructDeclV(decl) => comp(construct_obj(it, &decl, args, span).await),
        Value::InlineMarker(_) => Comp::Tail(args.positional),
        Value::Map(pairs) => {
            if args.positional.len() != 1 {
                return Comp::Threw(Thrown::tagged("MatchFailure", vec![], span));
            }
            let key = match force_shallow(it, args.positional[0].clone(), span).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            match pairs.iter().find(|(k, _)| structural_equal(k, &key)) {
                Some((_, v)) => Comp::Ret(v.clone()),
                None => Comp::Threw(Thrown::tagged("KeyNotFound", vec![key], span)),
            }
        }
        Value::Multimap(pairs) => {
            if args.positional.len() != 1 {
                return Comp::Threw(Thrown::tagged("MatchFailure", vec![], span));
            }
            let key = match force_shallow(it, args.positional[0].clone(), span).await {
                Ok(v) => v,
                Err(t) => return Comp::Threw(t),
            };
            match pairs.iter().find(|(k, _)| structural_equal(k, &key)) {
                Some((_, bag)) => Comp::Ret(Value::Multiset(Rc::new(bag.clone()))),
                None => Comp::Ret(Value::Multiset(Rc::new(Vec::new()))),
            }
        }
        Value::Obj(o) if o.suites.is_empty() => {
            let tag = o.tag.clone().unwrap_or_else(|| Rc::from("Structure"));
            Comp::Ret(symbolic_obj(&tag, args))
        }
        other => Comp::Threw(Thrown::tagged(
            "NotApplicable",
            vec![Value::text(&format!(
                "{} is not applicable",
                other.kind_name()
            ))],
            span,
        )),
    }
}

// ── Objects ──────────────────────────────────────────────────────────────

async fn construct_obj(
    it: &Rc<Interp>,
    decl: &Rc<StructDeclVal>,
    args: ArgsVal,
    span: &Span,
) -> VResult {
    let bindings = match_params(it, &decl.params, &args, span).await?;
    let mut env = decl.env.clone();
    let mut by_name: Vec<(Rc<str>, Value)> = Vec::new();
    for (n, v, _) in &bindings {
        env = env.bind(n.clone(), v.clone());
        by_name.push((n.clone(), v.clone()));
    }
    let mut fields = Vec::new();
    for slot in &decl.params.slots {
        let binder = match &slot.pattern.kind {
            PatKind::Bind { name, .. } => Some(name.clone()),
            _ => None,
        };
        let field_name = slot.keyword.clone().or(binder.clone());
        let value = binder
            .and_then(|b| {
                by_name
                    .iter()
                    .find(|(n, _)| *n == b)
                    .map(|(_, v)| v.clone())
            })
            .unwrap_or(Value::Void);
        fields.push((field_name, value));
    }
    let mut chain = vec![decl.name.clone()];
    for (iface, _) in &decl.impls {
        chain.push(iface.clone());
        if let Some(Value::Type(t)) = decl.env.lookup(iface) {
            chain.extend(t.extends.iter().cloned());
        }
    }
    let suites = decl
        .impls
        .iter()
        .map(|(iface, methods)| Suite {
            interface: Some(iface.clone()),
            methods: methods.clone(),
        })
        .collect();
    Ok(Value::Obj(Rc::new(ObjVal {
        tag: Some(decl.name.clone()),
        type_chain: chain,
        fields,
        suites,
        env,
        view: None,
        serial: next_serial(),
    })))
}

/// Send to an immutable object: method suites are searched in declaration
/// order (restricted by an interface view, if cast) and keyword fields act
/// as read accessors.
pub async fn obj_send(
    it: &Rc<Interp>,
    obj: Rc<ObjVal>,
    selector: Rc<str>,
    args: ArgsVal,
    span: &Span,
    _cx: &Ctx,
) -> VResult {
    for suite in &obj.suites {
        if let Some(view) = &obj.view {
            if suite.interface.as_ref() != Some(view) {
                continue;
            }
        }
        for m in suite.methods.iter() {
            if m.selector != selector {
                continue;
            }
            if m.bare && !(args.positional.is_empty() && args.keyword.is_empty()) {
                continue;
            }
            if !m.bare && m.params.len() != args.positional.len() {
                continue;
            }
            let mut env = obj.env.clone();
            let mut ok = true;
            for (p, v) in m.params.iter().zip(&args.positional) {
                match match_pattern(it.clone(), p.clone(), v.clone(), env.clone(), Ctx::pure())
                    .await?
                {
                    Some(next) => env = next,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let mut mcx = Ctx::pure();
            mcx.self_obj = Some(obj.clone());
            return match eval(it.clone(), m.body.clone(), env, mcx).await {
                Comp::Ret(v) => Ok(v),
                Comp::Threw(t) => Err(t),
                Comp::Tail(_) => Err(internal_err(span, "tail call escaped into a method")),
            };
        }
    }
    if args.positional.is_empty() && args.keyword.is_empty() {
        if let Some((_, v)) = obj
            .fields
            .iter()
            .find(|(k, _)| k.as_deref() == Some(&*selector))
        {
            return Ok(v.clone());
        }
    }
    Err(Thrown::tagged(
        "NotApplicable",
        vec![Value::text(&selector)],
        span,
    ))
}

async fn dot_send(
    it: &Rc<Interp>,
    recv: Value,
    selector: Rc<str>,
    args: ArgsVal,
    span: &Span,
    cx: &Ctx,
) -> VResult {
    match recv {
        Value::ActorRef(aid) => {
            let mut positional = args.positional;
            positional.extend(args.keyword.iter().map(|(_, v)| v.clone()));
            let msg = Rc::new(MessageVal {
                selector,
                positional,
                keyword: args.keyword,
            });
            send_and_wait(it, aid, msg, span).await
        }
        Value::Obj(o) => obj_send(it, o, selector, args, span, cx).await,
        Value::EnumType(et) => match et.ordinal(&selector) {
            Some(o) => Ok(Value::Enum(et.clone(), o)),
            None => Err(Thrown::tagged(
                "NotApplicable",
                vec![Value::text(&selector)],
                span,
            )),
        },
        other => Err(Thrown::tagged(
            "NotApplicable",
            vec![Value::text(&format!(
                "{} does not receive messages",
                other.kind_name()
            ))],
            span,
        )),
    }
}

// ── Collections ──────────────────────────────────────────────────────────

async fn build_list(
    it: &Rc<Interp>,
    items: &[(Rc<Expr>, bool)],
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let mut out: Vec<Value> = Vec::new();
    let mut tail: Option<Value> = None;
    let n = items.len();
    for (i, (e, spread)) in items.iter().enumerate() {
        let v = eval_value(it, e, env, cx).await?;
        if !*spread {
            out.push(v);
            continue;
        }
        let is_last = i == n - 1;
        match v {
            Value::List(l) => {
                out.extend(l.items.iter().cloned());
                if let Some(t) = &l.tail {
                    if is_last {
                        tail = Some(t.clone());
                    } else {
                        let mut cur = Some(t.clone());
                        while let Some(t) = cur {
                            let (more, rest) = force_list_step(it, t, span).await?;
                            out.extend(more);
                            cur = rest;
                        }
                    }
                }
            }
            Value::Multiset(ms) | Value::Set(ms) => out.extend(ms.iter().cloned()),
            v @ (Value::ActorRef(_) | Value::Future(_)) => {
                if is_last {
                    // an unforced spread keeps the list lazy
                    tail = Some(v);
                } else {
                    let mut cur = Some(v);
                    while let Some(t) = cur {
                        let (more, rest) = force_list_step(it, t, span).await?;
                        out.extend(more);
                        cur = rest;
                    }
                }
            }
            other => return Err(type_mismatch(span, "a list to spread", &other)),
        }
    }
    Ok(Value::List(Rc::new(ListVal { items: out, tail })))
}

async fn collect_spread(
    it: &Rc<Interp>,
    items: &[(Rc<Expr>, bool)],
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> Result<Vec<Value>, Thrown> {
    let mut out = Vec::new();
    for (e, spread) in items {
        let v = eval_value(it, e, env, cx).await?;
        if *spread {
            let v = force_shallow(it, v, span).await?;
            match v {
                Value::Multiset(ms) | Value::Set(ms) => out.extend(ms.iter().cloned()),
                Value::List(_) => out.extend(force_list_fully(it, v, span).await?),
                other => return Err(type_mismatch(span, "a collection to spread", &other)),
            }
        } else {
            out.push(v);
        }
    }
    Ok(out)
}

async fn build_map(
    it: &Rc<Interp>,
    entries: &[MapEntry],
    multi: bool,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let mut pairs: Vec<(Value, Value)> = Vec::new();
    for entry in entries {
        match entry {
            MapEntry::Pair(k, v) => {
                let k = eval_forced(it, k, env, cx).await?;
                let v = eval_value(it, v, env, cx).await?;
                pairs.push((k, v));
            }
            MapEntry::Spread(e) => {
                let v = eval_forced(it, e, env, cx).await?;
                match v {
                    Value::Map(m) => pairs.extend(m.iter().cloned()),
                    Value::Multimap(mm) => {
                        for (k, bag) in mm.iter() {
                            for v in bag {
                                pairs.push((k.clone(), v.clone()));
                            }
                        }
                    }
                    other => return Err(type_mismatch(span, "a map to spread", &other)),
                }
            }
        }
    }
    if multi {
        // scalar values become singleton bags; multiset values merge
        let mut flat: Vec<(Value, Value)> = Vec::new();
        for (k, v) in pairs {
            match v {
                Value::Multiset(ms) | Value::Set(ms) => {
                    for x in ms.iter() {
                        flat.push((k.clone(), x.clone()));
                    }
                }
                other => flat.push((k, other)),
            }
        }
        Ok(Value::Multimap(Rc::new(make_multimap(flat))))
    } else {
        let mut out: Vec<(Value, Value)> = Vec::new();
        for (k, v) in pairs {
            if out.iter().any(|(k2, _)| structural_equal(k2, &k)) {
                return Err(Thrown::tagged("DuplicateKey", vec![k], span));
            }
            out.push((k, v));
        }
        out.sort_by(|(a, _), (b, _)| canonical_cmp(a, b));
        Ok(Value::Map(Rc::new(out)))
    }
}

// ── Blocks ───────────────────────────────────────────────────────────────

async fn eval_block(
    it: &Rc<Interp>,
    items: &[Rc<Expr>],
    seps: &[Sep],
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> Comp {
    if items.is_empty() {
        return Comp::Ret(Value::Void);
    }
    // split items into groups at semicolons; a comma group runs
    // concurrently, a semicolon is a completion barrier
    let mut groups: Vec<Vec<Rc<Expr>>> = vec![vec![items[0].clone()]];
    for (i, sep) in seps.iter().enumerate() {
        match sep {
            Sep::Comma => groups.last_mut().unwrap().push(items[i + 1].clone()),
            Sep::Semi => groups.push(vec![items[i + 1].clone()]),
        }
    }
    let mut last = Value::Void;
    for group in groups {
        if group.len() == 1 {
            match eval(it.clone(), group[0].clone(), env.clone(), cx.clone()).await {
                Comp::Ret(v) => last = v,
                other => return other,
            }
            continue;
        }
        let cell = JoinCell::new(group.len());
        for (i, item) in group.iter().enumerate() {
            let it2 = it.clone();
            let item = item.clone();
            let env2 = env.clone();
            let dcx = cx.detached();
            let cell2 = cell.clone();
            it.spawn_task(Box::pin(async move {
                let c = eval(it2.clone(), item, env2, dcx).await;
                cell2.results.borrow_mut()[i] = Some(c);
                cell2.completion_order.borrow_mut().push(i);
                let left = cell2.remaining.get() - 1;
                cell2.remaining.set(left);
                if left == 0 {
                    if let Some(w) = cell2.waiter.take() {
                        it2.make_ready(w);
                    }
                }
            }));
        }
        WaitJoin {
            it: it.clone(),
            cell: cell.clone(),
        }
        .await;
        // the first exception observed (in completion order) wins
        let order = cell.completion_order.borrow();
        let results = cell.results.borrow();
        for &i in order.iter() {
            if let Some(Comp::Threw(t)) = &results[i] {
                return Comp::Threw(t.clone());
            }
        }
        last = match &results[group.len() - 1] {
            Some(Comp::Ret(v)) => v.clone(),
            _ => return Comp::Threw(internal_err(span, "block item vanished")),
        };
    }
    Comp::Ret(last)
}

// ── Binary operators ─────────────────────────────────────────────────────

async fn eval_bin(
    it: &Rc<Interp>,
    op: BinOp,
    lhs: &Rc<Expr>,
    rhs: &Rc<Expr>,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    match op {
        BinOp::And => {
            let a = eval_forced(it, lhs, env, cx).await?;
            match a {
                Value::Bool(false) => Ok(Value::Bool(false)),
                Value::Bool(true) => {
                    let b = eval_forced(it, rhs, env, cx).await?;
                    match b {
                        Value::Bool(b) => Ok(Value::Bool(b)),
                        other => Err(type_mismatch(span, "Boolean", &other)),
                    }
                }
                other => Err(type_mismatch(span, "Boolean", &other)),
            }
        }
        BinOp::Or => {
            let a = eval_forced(it, lhs, env, cx).await?;
            match a {
                Value::Bool(true) => Ok(Value::Bool(true)),
                Value::Bool(false) => {
                    let b = eval_forced(it, rhs, env, cx).await?;
                    match b {
                        Value::Bool(b) => Ok(Value::Bool(b)),
                        other => Err(type_mismatch(span, "Boolean", &other)),
                    }
                }
                other => Err(type_mismatch(span, "Boolean", &other)),
            }
        }
        BinOp::Implies => {
            let a = eval_forced(it, lhs, env, cx).await?;
            match a {
                Value::Bool(false) => Ok(Value::Bool(true)),
                Value::Bool(true) => {
                    let b = eval_forced(it, rhs, env, cx).await?;
                    match b {
                        Value::Bool(b) => Ok(Value::Bool(b)),
                        other => Err(type_mismatch(span, "Boolean", &other)),
                    }
                }
                other => Err(type_mismatch(span, "Boolean", &other)),
            }
        }
        BinOp::Eq => {
            let a = eval_forced(it, lhs, env, cx).await?;
            let b = eval_forced(it, rhs, env, cx).await?;
            Ok(Value::Bool(structural_equal(&a, &b)))
        }
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
            let a = eval_forced(it, lhs, env, cx).await?;
            let b = eval_forced(it, rhs, env, cx).await?;
            let (x, y) = match (num(&a), num(&b)) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(type_mismatch(
                        span,
                        "Number",
                        if num(&a).is_none() { &a } else { &b },
                    ))
                }
            };
            Ok(Value::Bool(match op {
                BinOp::Lt => x < y,
                BinOp::Gt => x > y,
                BinOp::Le => x <= y,
                BinOp::Ge => x >= y,
                _ => unreachable!(),
            }))
        }
        BinOp::Concat => {
            let a = eval_value(it, lhs, env, cx).await?;
            let b = eval_value(it, rhs, env, cx).await?;
            let mut items = force_list_fully(it, a, span).await?;
            items.extend(force_list_fully(it, b, span).await?);
            Ok(Value::list(items))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
            let a = eval_forced(it, lhs, env, cx).await?;
            let b = eval_forced(it, rhs, env, cx).await?;
            if op == BinOp::Add {
                // `+` on an object dispatches to its `+` method
                match &a {
                    Value::Obj(o) => {
                        return obj_send(
                            it,
                            o.clone(),
                            Rc::from("+"),
                            ArgsVal::positional(vec![b]),
                            span,
                            cx,
                        )
                        .await;
                    }
                    Value::ActorRef(aid) => {
                        let msg = Rc::new(MessageVal {
                            selector: Rc::from("+"),
                            positional: vec![b],
                            keyword: Vec::new(),
                        });
                        return send_and_wait(it, *aid, msg, span).await;
                    }
                    _ => {}
                }
            }
            arith(op, &a, &b, span)
        }
    }
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(n) => Some(*n as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn arith(op: BinOp, a: &Value, b: &Value, span: &Span) -> VResult {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(*y),
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                BinOp::Div => {
                    if *y == 0 {
                        return Err(Thrown::tagged("DivideByZero", vec![], span));
                    }
                    x.checked_div(*y)
                }
                BinOp::Mod => {
                    if *y == 0 {
                        return Err(Thrown::tagged("DivideByZero", vec![], span));
                    }
                    Some(x.rem_euclid(*y))
                }
                _ => unreachable!(),
            };
            match r {
                Some(v) => Ok(Value::Int(v)),
                None => Err(Thrown::tagged("ArithmeticOverflow", vec![], span)),
            }
        }
        _ => {
            let (x, y) = match (num(a), num(b)) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    let bad = if num(a).is_none() { a } else { b };
                    return Err(type_mismatch(span, "Number", bad));
                }
            };
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Mod => x.rem_euclid(y),
                _ => unreachable!(),
            };
            Ok(Value::Float(r))
        }
    }
}

// ── Casting ──────────────────────────────────────────────────────────────

fn cast_error(span: &Span, ty: &str, v: &Value) -> Thrown {
    Thrown::tagged(
        "CastException",
        vec![Value::text(&format!("{ty}<-{}", render(v)))],
        span,
    )
}

fn eval_cast(it: &Rc<Interp>, ty: Value, v: Value, span: &Span) -> VResult {
    match &ty {
        Value::Type(tag) => match &*tag.name {
            "?" => Ok(v),
            "Float" => match v {
                Value::Int(n) => Ok(Value::Float(n as f64)),
                Value::Float(_) => Ok(v),
                other => Err(cast_error(span, "Float", &other)),
            },
            "Integer" => match v {
                Value::Int(_) => Ok(v),
                Value::Enum(_, o) => Ok(Value::Int(o as i64)),
                other => Err(cast_error(span, "Integer", &other)),
            },
            "Number" => match v {
                Value::Int(_) | Value::Float(_) => Ok(v),
                other => Err(cast_error(span, "Number", &other)),
            },
            iface => {
                // casting to an interface restricts dispatch to that view
                match &v {
                    Value::Obj(o) => {
                        if o.type_chain.iter().any(|t| &**t == iface) {
                            let mut copy = ObjVal {
                                tag: o.tag.clone(),
                                type_chain: o.type_chain.clone(),
                                fields: o.fields.clone(),
                                suites: o
                                    .suites
                                    .iter()
                                    .map(|s| Suite {
                                        interface: s.interface.clone(),
                                        methods: s.methods.clone(),
                                    })
                                    .collect(),
                                env: o.env.clone(),
                                view: None,
                                serial: o.serial,
                            };
                            if o.suites
                                .iter()
                                .any(|s| s.interface.as_deref() == Some(iface))
                            {
                                copy.view = Some(Rc::from(iface));
                            }
                            Ok(Value::Obj(Rc::new(copy)))
                        } else {
                            Err(cast_error(span, iface, &v))
                        }
                    }
                    Value::ActorRef(_) => {
                        if value_implements(it, &v, iface) {
                            Ok(v)
                        } else {
                            Err(cast_error(span, iface, &v))
                        }
                    }
                    other => Err(cast_error(span, iface, other)),
                }
            }
        },
        Value::EnumType(et) => match v {
            Value::Int(n) => {
                if n >= 0 && (n as usize) < et.members.len() {
                    Ok(Value::Enum(et.clone(), n as usize))
                } else {
                    Err(cast_error(span, &et.name, &Value::Int(n)))
                }
            }
            Value::Enum(ref t, _) if t.name == et.name => Ok(v),
            other => Err(cast_error(span, &et.name, &other)),
        },
        other => Err(Thrown::tagged(
            "CastException",
            vec![Value::text(&format!("{} is not a type", other.kind_name()))],
            span,
        )),
    }
}

// ── Commands ─────────────────────────────────────────────────────────────

fn write_var(
    it: &Rc<Interp>,
    aid: ActorId,
    name: &Rc<str>,
    v: Value,
    span: &Span,
) -> Result<(), Thrown> {
    let mut actors = it.actors.borrow_mut();
    let a = &mut actors[aid];
    if a.rigid.contains(name) {
        return Err(Thrown::tagged(
            "RigidViolation",
            vec![Value::text(name)],
            span,
        ));
    }
    if !a.vars.contains_key(name) {
        return Err(Thrown::tagged(
            "UnknownVariable",
            vec![Value::text(name)],
            span,
        ));
    }
    a.vars.insert(name.clone(), v);
    Ok(())
}

/// Execute commands. Immediate mode (prep) applies effects now; deferred
/// mode (also) accumulates them into the pending change set, which is
/// applied when the message's outcome surfaces.
async fn perform_commands(
    it: &Rc<Interp>,
    cmds: &[Command],
    env: &Env,
    cx: &Ctx,
    immediate: bool,
) -> Result<(), Thrown> {
    for cmd in cmds {
        match cmd {
            Command::Assign { name, expr, span } => {
                let v = eval_value(it, expr, env, cx).await?;
                let aid = cx.actor.ok_or_else(|| {
                    Thrown::tagged("NotInActorMethod", vec![Value::text(name)], span)
                })?;
                if immediate {
                    write_var(it, aid, name, v, span)?;
                } else {
                    cx.change
                        .as_ref()
                        .expect("deferred commands require a dispatch")
                        .borrow_mut()
                        .assigns
                        .push((name.clone(), v, span.clone()));
                }
            }
            Command::Dequeue { qexpr } => {
                let q = eval_value(it, qexpr, env, cx).await?;
                let q = force_shallow(it, q, &qexpr.span).await?;
                match q {
                    Value::NullOf(_) => {}
                    Value::QueueRef(qaid, qname) => {
                        if immediate {
                            dequeue_now(it, qaid, &qname);
                        } else {
                            cx.change
                                .as_ref()
                                .expect("deferred commands require a dispatch")
                                .borrow_mut()
                                .dequeues
                                .push((qaid, qname));
                        }
                    }
                    other => return Err(type_mismatch(&qexpr.span, "Queue", &other)),
                }
            }
            Command::Effect { expr } => {
                let mut ecx = cx.clone();
                ecx.in_command = true;
                match eval(it.clone(), expr.clone(), env.clone(), ecx).await {
                    Comp::Ret(_) => {}
                    Comp::Threw(t) => return Err(t),
                    Comp::Tail(_) => return Err(internal_err(&expr.span, "tail call in command")),
                }
            }
        }
    }
    Ok(())
}

fn dequeue_now(it: &Rc<Interp>, aid: ActorId, qname: &Rc<str>) {
    let moved = {
        let mut actors = it.actors.borrow_mut();
        actors[aid].dequeue_mark(qname)
    };
    if let Some(t) = moved {
        it.trace_event(Some(aid), "dequeue", &format!("{qname} activity {t}"));
    }
}

// ── The cheese ───────────────────────────────────────────────────────────

async fn acquire_cheese(it: &Rc<Interp>, aid: ActorId) -> Result<(), Thrown> {
    let me = it.current.get();
    let acquired = {
        let mut actors = it.actors.borrow_mut();
        let a = &mut actors[aid];
        if !a.working {
            a.working = true;
            a.holder = Some(me);
            true
        } else {
            a.pending.push_back(me);
            false
        }
    };
    if acquired {
        it.trace_event(Some(aid), "acquire", &format!("activity {me}"));
        return Ok(());
    }
    it.trace_event(Some(aid), "enqueue", &format!("pending activity {me}"));
    WaitGrant {
        it: it.clone(),
        actor: aid,
    }
    .await?;
    it.trace_event(Some(aid), "acquire", &format!("activity {me}"));
    Ok(())
}

/// Release the cheese. Handoffs (explicit dequeues) and hole re-entries
/// continue the current operation chain; otherwise this is a message
/// boundary, where invariants are checked before the next pending message
/// is admitted (or the actor goes idle).
pub fn release_cheese(it: &Rc<Interp>, aid: ActorId, span: &Span) -> Result<(), Thrown> {
    enum Next {
        Transfer(usize),
        Boundary,
    }
    let next = {
        let mut actors = it.actors.borrow_mut();
        let a = &mut actors[aid];
        if let Some(t) = a.handoff.pop_front() {
            a.holder = Some(t);
            Next::Transfer(t)
        } else if let Some(t) = a.reentry.pop_front() {
            a.holder = Some(t);
            Next::Transfer(t)
        } else {
            Next::Boundary
        }
    };
    match next {
        Next::Transfer(t) => {
            it.trace_event(Some(aid), "release", &format!("handoff to activity {t}"));
            it.make_ready(t);
            Ok(())
        }
        Next::Boundary => {
            let check = check_invariants(it, aid, span);
            let granted = {
                let mut actors = it.actors.borrow_mut();
                let a = &mut actors[aid];
                if check.is_err() {
                    a.working = false;
                    a.holder = None;
                    None
                } else if let Some(t) = a.pending.pop_front() {
                    a.holder = Some(t);
                    Some(t)
                } else {
                    a.working = false;
                    a.holder = None;
                    None
                }
            };
            check?;
            match granted {
                Some(t) => {
                    it.trace_event(Some(aid), "release", &format!("next message activity {t}"));
                    it.make_ready(t);
                }
                None => it.trace_event(Some(aid), "release", "idle"),
            }
            Ok(())
        }
    }
}

async fn reacquire_after_hole(it: &Rc<Interp>, aid: ActorId) -> Result<(), Thrown> {
    let me = it.current.get();
    let acquired = {
        let mut actors = it.actors.borrow_mut();
        let a = &mut actors[aid];
        if !a.working {
            a.working = true;
            a.holder = Some(me);
            true
        } else {
            a.reentry.push_back(me);
            false
        }
    };
    if !acquired {
        WaitGrant {
            it: it.clone(),
            actor: aid,
        }
        .await?;
    }
    it.trace_event(Some(aid), "acquire", &format!("hole return activity {me}"));
    Ok(())
}

/// Evaluate an expression that must not suspend (actor invariants).
pub fn eval_sync(it: &Rc<Interp>, e: &Rc<Expr>, env: &Env, cx: &Ctx) -> Option<Comp> {
    let mut fut = eval(it.clone(), e.clone(), env.clone(), cx.clone());
    let waker = Waker::noop();
    let mut pcx = Context::from_waker(waker);
    match fut.as_mut().poll(&mut pcx) {
        Poll::Ready(c) => Some(c),
        Poll::Pending => None,
    }
}

pub fn check_invariants(it: &Rc<Interp>, aid: ActorId, span: &Span) -> Result<(), Thrown> {
    let invs: Vec<(Rc<Expr>, Env)> = it.actors.borrow()[aid].invariants.clone();
    if invs.is_empty() {
        return Ok(());
    }
    let name = it.actors.borrow()[aid].name.clone();
    for (expr, env) in invs {
        it.trace_event(Some(aid), "invariant-check", &name);
        match eval_sync(it, &expr, &env, &Ctx::pure()) {
            Some(Comp::Ret(Value::Bool(true))) => {}
            Some(Comp::Ret(Value::Bool(false))) => {
                return Err(Thrown::tagged(
                    "InvariantViolation",
                    vec![Value::text(&name)],
                    &expr.span,
                ));
            }
            Some(Comp::Ret(other)) => {
                return Err(Thrown::tagged(
                    "InvariantViolation",
                    vec![Value::text(&format!(
                        "{name}: invariant is not Boolean ({})",
                        other.kind_name()
                    ))],
                    &expr.span,
                ));
            }
            Some(Comp::Threw(t)) => return Err(t),
            Some(Comp::Tail(_)) | None => {
                return Err(Thrown::tagged(
                    "InvariantViolation",
                    vec![Value::text(&format!(
                        "{name}: invariant must be a pure expression"
                    ))],
                    &expr.span,
                ));
            }
        }
    }
    let _ = span;
    Ok(())
}

// ── passThru ─────────────────────────────────────────────────────────────

async fn eval_passthru(
    it: &Rc<Interp>,
    qexpr: &Rc<Expr>,
    catch: &Option<QueueCatch>,
    cont: &Rc<Expr>,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> Comp {
    let aid = match cx.actor {
        Some(a) => a,
        None => {
            return Comp::Threw(Thrown::tagged(
                "NotInActorMethod",
                vec![Value::text("'passThru' outside a method")],
                span,
            ))
        }
    };
    let q = match eval_forced(it, qexpr, env, cx).await {
        Ok(v) => v,
        Err(t) => return Comp::Threw(t),
    };
    match q {
        // null Queue: no queue operation, continue in the cheese
        Value::NullOf(_) => eval(it.clone(), cont.clone(), env.clone(), cx.clone()).await,
        Value::QueueRef(qaid, qname) => {
            if qaid != aid {
                return Comp::Threw(Thrown::tagged(
                    "NotOwnQueue",
                    vec![Value::text(&qname)],
                    span,
                ));
            }
            let me = it.current.get();
            {
                let mut actors = it.actors.borrow_mut();
                actors[aid]
                    .queues
                    .get_mut(&qname)
                    .expect("queue exists")
                    .push_back(me);
            }
            it.trace_event(Some(aid), "enqueue", &format!("{qname} activity {me}"));
            if let Err(t) = release_cheese(it, aid, span) {
                return Comp::Threw(t);
            }
            match (WaitGrant {
                it: it.clone(),
                actor: aid,
            }
            .await)
            {
                Ok(()) => {
                    it.trace_event(Some(aid), "acquire", &format!("dequeued activity {me}"));
                    eval(it.clone(), cont.clone(), env.clone(), cx.clone()).await
                }
                Err(exc) => {
                    // an exception was thrown to us while queued; take the
                    // cheese back through the normal path, then handle it
                    if let Err(t) = acquire_cheese(it, aid).await {
                        return Comp::Threw(t);
                    }
                    match catch {
                        Some(QueueCatch::Rethrow(cmds)) => {
                            let hcx = cx.with_exc(&exc);
                            if let Err(t) = perform_commands(it, cmds, env, &hcx, false).await {
                                return Comp::Threw(t);
                            }
                            Comp::Threw(exc)
                        }
                        Some(QueueCatch::Handlers(arms)) => {
                            let hcx = cx.with_exc(&exc);
                            match run_arms(it, arms, exc.value.clone(), env, &hcx).await {
                                Ok(Some(c)) => c,
                                Ok(None) => Comp::Threw(exc),
                                Err(t) => Comp::Threw(t),
                            }
                        }
                        None => Comp::Threw(exc),
                    }
                }
            }
        }
        other => Comp::Threw(type_mismatch(span, "Queue or null Queue", &other)),
    }
}

// ── relay / stay ─────────────────────────────────────────────────────────

#[allow(clippy::too_many_arguments)]
async fn eval_relay_stay(
    it: &Rc<Interp>,
    relay: bool,
    selector: &Rc<str>,
    args: &CallArgs,
    arms: &[Arm],
    catch_arms: &[Arm],
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> Comp {
    let aid = match cx.actor {
        Some(a) => a,
        None => {
            return Comp::Threw(Thrown::tagged(
                "NotInActorMethod",
                vec![Value::text("inheritance dispatch outside a method")],
                span,
            ))
        }
    };
    let argv = match eval_args(it, args, env, cx, span).await {
        Ok(a) => a,
        Err(t) => return Comp::Threw(t),
    };
    let start_layer = if relay { cx.layer + 1 } else { 0 };
    {
        let actors = it.actors.borrow();
        if start_layer >= actors[aid].layers.len() {
            return Comp::Threw(Thrown::tagged(
                "NotApplicable",
                vec![Value::text("no base implementation to relay to")],
                span,
            ));
        }
    }
    let mut positional = argv.positional;
    positional.extend(argv.keyword.iter().map(|(_, v)| v.clone()));
    let msg = Rc::new(MessageVal {
        selector: selector.clone(),
        positional,
        keyword: argv.keyword,
    });
    // in-cheese dispatch with its own change set, applied when it returns
    let acc = Rc::new(RefCell::new(ChangeAcc::default()));
    let outcome = dispatch_layers(it, aid, start_layer, &msg, &acc, span).await;
    if let Err(t) = apply_change(it, aid, &acc, span) {
        return Comp::Threw(t);
    }
    match outcome {
        Comp::Ret(v) => match run_arms(it, arms, v.clone(), env, cx).await {
            Ok(Some(c)) => c,
            Ok(None) => Comp::Ret(v),
            Err(t) => Comp::Threw(t),
        },
        Comp::Threw(t) => {
            let hcx = cx.with_exc(&t);
            match run_arms(it, catch_arms, t.value.clone(), env, &hcx).await {
                Ok(Some(c)) => c,
                Ok(None) => Comp::Threw(t),
                Err(t2) => Comp::Threw(t2),
            }
        }
        Comp::Tail(t) => Comp::Tail(t),
    }
}

// ── Actor spawning ───────────────────────────────────────────────────────

pub async fn spawn_actor(
    it: &Rc<Interp>,
    decl: &Rc<ActorDeclVal>,
    args: ArgsVal,
    span: &Span,
) -> VResult {
    let aid = {
        let mut actors = it.actors.borrow_mut();
        actors.push(ActorState::new(decl.name.clone()));
        actors.len() - 1
    };
    init_layers(it, aid, decl.clone(), args, span.clone()).await?;
    static_rigid_scan(it, aid, span)?;
    check_invariants(it, aid, span)?;
    Ok(Value::ActorRef(aid))
}

fn init_layers(
    it: &Rc<Interp>,
    aid: ActorId,
    declval: Rc<ActorDeclVal>,
    args: ArgsVal,
    span: Span,
) -> Pin<Box<dyn Future<Output = Result<(), Thrown>>>> {
    let it = it.clone();
    Box::pin(async move {
        let decl = declval.decl.clone();
        let bindings = match_params(&it, &decl.params, &args, &span).await?;
        {
            let mut actors = it.actors.borrow_mut();
            let a = &mut actors[aid];
            for (name, v, rigid) in bindings {
                // derived declarations take precedence over bases
                if !a.vars.contains_key(&name) {
                    a.vars.insert(name.clone(), v);
                    if rigid {
                        a.rigid.insert(name);
                    }
                }
            }
            for q in &decl.queues {
                a.queues.entry(q.clone()).or_default();
            }
        }
        let scope_env = declval.env.with_actor_scope(aid);
        for v in &decl.vars {
            let val = eval_value(&it, &v.init, &scope_env, &Ctx::pure()).await?;
            if let Some(ty) = &v.anno {
                if !type_accepts(ty, &val, &|x, n| value_implements(&it, x, n)) {
                    return Err(Thrown::tagged(
                        "TypeMismatch",
                        vec![Value::text(&format!("variable {}", v.name))],
                        &v.span,
                    ));
                }
            }
            let mut actors = it.actors.borrow_mut();
            let a = &mut actors[aid];
            if !a.vars.contains_key(&v.name) {
                a.vars.insert(v.name.clone(), val);
            }
        }
        {
            let mut actors = it.actors.borrow_mut();
            let a = &mut actors[aid];
            for iface in &decl.implements {
                a.implements.push(iface.clone());
                if let Some(Value::Type(t)) = declval.env.lookup(iface) {
                    a.implements.extend(t.extends.iter().cloned());
                }
            }
            a.layers.push(Layer {
                decl: decl.clone(),
                env: declval.env.clone(),
            });
            if let Some(inv) = &decl.invariant {
                a.invariants.push((inv.clone(), scope_env.clone()));
            }
        }
        if let Some((base_name, base_args)) = &decl.extends {
            let base = declval.env.lookup(base_name);
            let base = match base {
                Some(Value::ActorDeclV(b)) => b,
                _ => {
                    return Err(Thrown::tagged(
                        "TypeMismatch",
                        vec![Value::text(&format!(
                            "{base_name} is not an actor declaration"
                        ))],
                        &span,
                    ))
                }
            };
            let bargs = eval_args(&it, base_args, &scope_env, &Ctx::pure(), &span).await?;
            init_layers(&it, aid, base, bargs, span.clone()).await?;
        }
        Ok(())
    })
}

/// Any command assigning a rigid variable is rejected when the actor is
/// created, before it processes a single message.
fn static_rigid_scan(it: &Rc<Interp>, aid: ActorId, span: &Span) -> Result<(), Thrown> {
    let layers: Vec<Layer> = it.actors.borrow()[aid].layers.clone();
    let rigid: std::collections::HashSet<Rc<str>> = it.actors.borrow()[aid].rigid.clone();
    let mut targets: Vec<Rc<str>> = Vec::new();
    for layer in &layers {
        for m in &layer.decl.methods {
            collect_assign_targets(&m.body, &mut targets);
        }
    }
    for t in targets {
        if rigid.contains(&t) {
            return Err(Thrown::tagged(
                "RigidViolation",
                vec![Value::text(&t)],
                span,
            ));
        }
    }
    Ok(())
}

fn collect_assign_targets(e: &Expr, out: &mut Vec<Rc<str>>) {
    fn walk_cmds(cmds: &[Command], out: &mut Vec<Rc<str>>) {
        for c in cmds {
            match c {
                Command::Assign { name, expr, .. } => {
                    out.push(name.clone());
                    collect_assign_targets(expr, out);
                }
                Command::Dequeue { qexpr } => collect_assign_targets(qexpr, out),
                Command::Effect { expr } => collect_assign_targets(expr, out),
            }
        }
    }
    fn walk_arms(arms: &[Arm], out: &mut Vec<Rc<str>>) {
        for a in arms {
            collect_assign_targets(&a.body, out);
        }
    }
    match &e.kind {
        ExprKind::Also { value, cmds } => {
            match value {
                AlsoValue::Return(v) | AlsoValue::Throw(v) => collect_assign_targets(v, out),
            }
            walk_cmds(cmds, out);
        }
        ExprKind::Rethrow { cmds } => walk_cmds(cmds, out),
        ExprKind::Prep { cmds, tail } => {
            walk_cmds(cmds, out);
            match tail {
                PrepTail::Hole { expr } => collect_assign_targets(expr, out),
                PrepTail::PassThru { qexpr, catch, cont } => {
                    collect_assign_targets(qexpr, out);
                    if let Some(QueueCatch::Rethrow(cmds)) = catch {
                        walk_cmds(cmds, out);
                    }
                    if let Some(QueueCatch::Handlers(arms)) = catch {
                        walk_arms(arms, out);
                    }
                    collect_assign_targets(cont, out);
                }
            }
        }
        ExprKind::PassThru { qexpr, catch, cont } => {
            collect_assign_targets(qexpr, out);
            if let Some(QueueCatch::Rethrow(cmds)) = catch {
                walk_cmds(cmds, out);
            }
            if let Some(QueueCatch::Handlers(arms)) = catch {
                walk_arms(arms, out);
            }
            collect_assign_targets(cont, out);
        }
        ExprKind::Cond {
            subject,
            arms,
            catch_arms,
        } => {
            collect_assign_targets(subject, out);
            walk_arms(arms, out);
            walk_arms(catch_arms, out);
        }
        ExprKind::CatchExpr { body, arms } => {
            collect_assign_targets(body, out);
            walk_arms(arms, out);
        }
        ExprKind::Let { bindings, body } => {
            for b in bindings {
                collect_assign_targets(&b.expr, out);
            }
            collect_assign_targets(body, out);
        }
        ExprKind::Where { body, defs } => {
            collect_assign_targets(body, out);
            for d in defs {
                collect_assign_targets(&d.body, out);
            }
        }
        ExprKind::Call { callee, args } => {
            collect_assign_targets(callee, out);
            for a in &args.items {
                collect_assign_targets(&a.value, out);
            }
        }
        ExprKind::DotSend { recv, args, .. } => {
            collect_assign_targets(recv, out);
            if let Some(args) = args {
                for a in &args.items {
                    collect_assign_targets(&a.value, out);
                }
            }
        }
        ExprKind::Relay {
            args,
            arms,
            catch_arms,
            ..
        }
        | ExprKind::Stay {
            args,
            arms,
            catch_arms,
            ..
        } => {
            for a in &args.items {
                collect_assign_targets(&a.value, out);
            }
            walk_arms(arms, out);
            walk_arms(catch_arms, out);
        }
        ExprKind::Block { items, .. } => {
            for i in items {
                collect_assign_targets(i, out);
            }
        }
        ExprKind::Bin { lhs, rhs, .. } => {
            collect_assign_targets(lhs, out);
            collect_assign_targets(rhs, out);
        }
        ExprKind::Not(x) | ExprKind::Neg(x) | ExprKind::Throw(x) => collect_assign_targets(x, out),
        ExprKind::ListExpr(items) | ExprKind::MultisetExpr(items) | ExprKind::SetExpr(items) => {
            for (x, _) in items {
                collect_assign_targets(x, out);
            }
        }
        ExprKind::FutureExpr(x) | ExprKind::PostponeExpr(x) => collect_assign_targets(x, out),
        ExprKind::Cast { ty, value } => {
            collect_assign_targets(ty, out);
            collect_assign_targets(value, out);
        }
        ExprKind::Inline { inits, body, .. } => {
            for (_, x) in inits {
                collect_assign_targets(x, out);
            }
            collect_assign_targets(body, out);
        }
        _ => {}
    }
}

// ── Message delivery ─────────────────────────────────────────────────────

/// Deliver a message asynchronously: a fresh activity carries it through
/// the target's cheese and the returned future takes the outcome. Used by
/// explicit `future` sends.
pub fn send_message(it: &Rc<Interp>, aid: ActorId, msg: Rc<MessageVal>, span: &Span) -> FutureId {
    let reply = it.new_future();
    let it2 = it.clone();
    let span = span.clone();
    it.spawn_task(Box::pin(async move {
        let result = deliver(&it2, aid, msg, &span).await;
        it2.resolve_future(reply, result);
    }));
    reply
}

/// A plain send: the sender's own activity carries the message through
/// the cheese and resumes with the reply, giving message passing the feel
/// of a procedure call.
pub async fn send_and_wait(
    it: &Rc<Interp>,
    aid: ActorId,
    msg: Rc<MessageVal>,
    span: &Span,
) -> VResult {
    Box::pin(deliver(it, aid, msg, span)).await
}

fn peek_forwarded(it: &Rc<Interp>, aid: ActorId) -> Option<Value> {
    it.actors.borrow()[aid].forwarded.clone()
}

async fn deliver(it: &Rc<Interp>, aid: ActorId, msg: Rc<MessageVal>, span: &Span) -> VResult {
    if let Some(f) = peek_forwarded(it, aid) {
        return deliver_to_value(it, f, msg, span).await;
    }
    acquire_cheese(it, aid).await?;
    if let Some(f) = peek_forwarded(it, aid) {
        release_cheese(it, aid, span)?;
        return Box::pin(deliver_to_value(it, f, msg, span)).await;
    }
    let lazy = {
        let mut actors = it.actors.borrow_mut();
        actors[aid].lazy.take()
    };
    if let Some(cell) = lazy {
        // first request forces the postponed expression exactly once
        let r = eval_value(it, &cell.expr, &cell.env, &Ctx::pure()).await;
        {
            let mut actors = it.actors.borrow_mut();
            match &r {
                Ok(v) => actors[aid].forwarded = Some(v.clone()),
                Err(t) => actors[aid].lazy_failed = Some(t.clone()),
            }
        }
        release_cheese(it, aid, span)?;
        let v = r?;
        if &*msg.selector == TOUCH {
            return Ok(v);
        }
        return Box::pin(deliver_to_value(it, v, msg, span)).await;
    }
    if let Some(t) = it.actors.borrow()[aid].lazy_failed.clone() {
        release_cheese(it, aid, span)?;
        return Err(t);
    }
    if &*msg.selector == TOUCH {
        // touching an ordinary actor yields the reference itself
        release_cheese(it, aid, span)?;
        return Ok(Value::ActorRef(aid));
    }
    it.trace_event(Some(aid), "dispatch", &msg.selector);
    let acc = Rc::new(RefCell::new(ChangeAcc::default()));
    let outcome = dispatch_layers(it, aid, 0, &msg, &acc, span).await;
    let mut result = match outcome {
        Comp::Ret(v) => Ok(v),
        Comp::Threw(t) => Err(t),
        Comp::Tail(_) => Err(internal_err(span, "tail call escaped a method body")),
    };
    if let Err(t) = apply_change(it, aid, &acc, span) {
        result = Err(t);
    }
    if let Err(t) = release_cheese(it, aid, span) {
        result = Err(t);
    }
    result
}

fn deliver_to_value<'a>(
    it: &'a Rc<Interp>,
    v: Value,
    msg: Rc<MessageVal>,
    span: &'a Span,
) -> Pin<Box<dyn Future<Output = VResult> + 'a>> {
    Box::pin(async move {
        if &*msg.selector == TOUCH {
            return force_shallow(it, v, span).await;
        }
        match force_shallow(it, v, span).await? {
            Value::ActorRef(aid) => send_and_wait(it, aid, msg, span).await,
            Value::Obj(o) => {
                let args = ArgsVal {
                    positional: msg.positional.clone(),
                    keyword: msg.keyword.clone(),
                };
                obj_send(it, o, msg.selector.clone(), args, span, &Ctx::pure()).await
            }
            other => Err(Thrown::tagged(
                "NotApplicable",
                vec![Value::text(&format!(
                    "{} does not receive {}",
                    other.kind_name(),
                    msg.selector
                ))],
                span,
            )),
        }
    })
}

/// Select and run the first method (scanning layers from `start`) whose
/// message pattern matches. The caller owns the cheese.
async fn dispatch_layers(
    it: &Rc<Interp>,
    aid: ActorId,
    start: usize,
    msg: &Rc<MessageVal>,
    acc: &Rc<RefCell<ChangeAcc>>,
    span: &Span,
) -> Comp {
    let layers: Vec<Layer> = it.actors.borrow()[aid].layers.clone();
    for (li, layer) in layers.iter().enumerate().skip(start) {
        for m in &layer.decl.methods {
            if m.selector != msg.selector {
                continue;
            }
            if m.bare && !msg.positional.is_empty() {
                continue;
            }
            if !m.bare && m.params.len() != msg.positional.len() {
                continue;
            }
            let base_env = layer.env.with_actor_scope(aid);
            let cx = Ctx {
                actor: Some(aid),
                layer: li,
                change: Some(acc.clone()),
                exc: None,
                self_obj: None,
                in_command: false,
            };
            let mut env = base_env;
            let mut ok = true;
            for (p, v) in m.params.iter().zip(&msg.positional) {
                match match_pattern(it.clone(), p.clone(), v.clone(), env.clone(), cx.clone()).await
                {
                    Ok(Some(next)) => env = next,
                    Ok(None) => {
                        ok = false;
                        break;
                    }
                    Err(t) => return Comp::Threw(t),
                }
            }
            if !ok {
                continue;
            }
            return eval(it.clone(), m.body.clone(), env, cx).await;
        }
    }
    Comp::Threw(Thrown::tagged(
        "NotApplicable",
        vec![Value::text(&msg.selector)],
        span,
    ))
}

/// Apply a message's accumulated change set: assignments (at most one per
/// variable), queue handoffs, and forwarding.
fn apply_change(
    it: &Rc<Interp>,
    aid: ActorId,
    acc: &Rc<RefCell<ChangeAcc>>,
    span: &Span,
) -> Result<(), Thrown> {
    let acc = std::mem::take(&mut *acc.borrow_mut());
    for (i, (name, _, aspan)) in acc.assigns.iter().enumerate() {
        if acc.assigns[..i].iter().any(|(n, _, _)| n == name) {
            return Err(Thrown::tagged(
                "AssignmentConflict",
                vec![Value::text(name)],
                aspan,
            ));
        }
    }
    for (name, v, aspan) in acc.assigns {
        write_var(it, aid, &name, v, &aspan)?;
    }
    for (qaid, qname) in acc.dequeues {
        if qaid != aid {
            return Err(Thrown::tagged(
                "NotOwnQueue",
                vec![Value::text(&qname)],
                span,
            ));
        }
        dequeue_now(it, qaid, &qname);
    }
    if let Some(v) = acc.forward {
        it.actors.borrow_mut()[aid].forwarded = Some(v);
    }
    Ok(())
}

/// Deliver an exception to the head of a named queue (runtime plumbing;
/// the surface language has no construct that does this). Returns false
/// when nothing is parked there.
pub fn throw_into_queue(it: &Rc<Interp>, aid: ActorId, qname: &str, exc: Thrown) -> bool {
    let task = {
        let mut actors = it.actors.borrow_mut();
        match actors[aid]
            .queues
            .get_mut(qname)
            .and_then(|q| q.pop_front())
        {
            Some(t) => t,
            None => return false,
        }
    };
    it.wake_errors.borrow_mut().insert(task, exc);
    it.make_ready(task);
    true
}

// ── Logic driver ─────────────────────────────────────────────────────────

async fn theory_id(it: &Rc<Interp>, e: &Rc<Expr>, env: &Env, cx: &Ctx) -> Result<usize, Thrown> {
    let v = eval_value(it, e, env, cx).await?;
    let v = force_shallow(it, v, &e.span).await?;
    match v {
        Value::Theory(t) => Ok(t),
        other => Err(type_mismatch(&e.span, "Theory", &other)),
    }
}

async fn eval_prop(
    it: &Rc<Interp>,
    ast: &PropAst,
    env: &Env,
    cx: &Ctx,
    pattern_position: bool,
) -> Result<Prop, Thrown> {
    let mut terms = Vec::new();
    for t in &ast.terms {
        let term = match t {
            PropTerm::Var(name) => {
                if pattern_position {
                    Term::Var(name.clone())
                } else {
                    match env.lookup_with(name, |aid, n| resolve_actor_name(it, aid, n)) {
                        Some(v) => Term::Const(force_shallow(it, v, &ast.span).await?),
                        None => {
                            return Err(Thrown::tagged(
                                "NonGroundAssertion",
                                vec![Value::text(name)],
                                &ast.span,
                            ))
                        }
                    }
                }
            }
            PropTerm::Symbol(s) => Term::Const(symbolic_obj(s, ArgsVal::empty())),
            PropTerm::Lit(l) => Term::Const(lit_value(l)),
            PropTerm::Eq(e) => {
                let v = eval_value(it, e, env, cx).await?;
                Term::Const(force_shallow(it, v, &e.span).await?)
            }
        };
        terms.push(term);
    }
    Ok(Prop {
        functor: ast.functor.clone(),
        args: terms,
    })
}

async fn eval_logic_assert(
    it: &Rc<Interp>,
    theory: &Rc<Expr>,
    prop: &PropAst,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let tid = theory_id(it, theory, env, cx).await?;
    let p = eval_prop(it, prop, env, cx, false).await?;
    let p = Rc::new(p);
    assert_fact(it, tid, p.clone(), span).await?;
    Ok(Value::Prop(p))
}

pub fn assert_fact(
    it: &Rc<Interp>,
    tid: usize,
    prop: Rc<Prop>,
    span: &Span,
) -> Pin<Box<dyn Future<Output = Result<(), Thrown>>>> {
    let it = it.clone();
    let span = span.clone();
    Box::pin(async move {
        if !prop.is_ground() {
            return Err(Thrown::tagged(
                "NonGroundAssertion",
                vec![Value::text(&prop.render())],
                &span,
            ));
        }
        struct Work {
            body: Rc<Expr>,
            env: Env,
            binding: Binding,
        }
        let mut work: Vec<Work> = Vec::new();
        {
            let mut theories = it.theories.borrow_mut();
            if crate::logic::has_fact(&theories, tid, &prop) {
                return Ok(()); // idempotent
            }
            theories[tid].facts.push(prop.clone());
            // forward rules and pending goals of every theory that can see
            // this assertion fire exactly once per binding
            let watchers = visible_from(&theories, tid);
            for u in watchers {
                let matches: Vec<(u64, Binding, Rc<Expr>, Env)> = theories[u]
                    .forward_rules
                    .iter()
                    .filter_map(|r| {
                        unify(&r.pattern, &prop).map(|b| (r.id, b, r.body.clone(), r.env.clone()))
                    })
                    .collect();
                for (rid, binding, body, renv) in matches {
                    let key = (rid, binding_key(&binding));
                    if theories[u].fired.insert(key) {
                        work.push(Work {
                            body,
                            env: renv,
                            binding,
                        });
                    }
                }
                for gi in 0..theories[u].goals.len() {
                    let (pattern, has_body) = {
                        let g = &theories[u].goals[gi];
                        (g.pattern.clone(), g.body.is_some())
                    };
                    if !has_body {
                        continue;
                    }
                    if let Some(binding) = unify(&pattern, &prop) {
                        let key = binding_key(&binding);
                        let g = &mut theories[u].goals[gi];
                        if g.fired.insert(key) {
                            let (body, genv) = g.body.clone().unwrap();
                            work.push(Work {
                                body,
                                env: genv,
                                binding,
                            });
                        }
                    }
                }
            }
        }
        for w in work {
            let mut env = w.env.clone();
            for (n, v) in &w.binding {
                env = env.bind(n.clone(), v.clone());
            }
            eval_value(&it, &w.body, &env, &Ctx::pure()).await?;
        }
        Ok(())
    })
}

async fn eval_logic_when_assert(
    it: &Rc<Interp>,
    theory: &Rc<Expr>,
    pattern: &PropAst,
    body: &Rc<Expr>,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let tid = theory_id(it, theory, env, cx).await?;
    let pat = eval_prop(it, pattern, env, cx, true).await?;
    add_forward_rule(it, tid, pat, body.clone(), env.clone(), span).await?;
    Ok(Value::Void)
}

pub async fn add_forward_rule(
    it: &Rc<Interp>,
    tid: usize,
    pattern: Prop,
    body: Rc<Expr>,
    env: Env,
    _span: &Span,
) -> Result<(), Thrown> {
    let rid = next_serial();
    let mut work: Vec<(Binding, Rc<Expr>, Env)> = Vec::new();
    {
        let mut theories = it.theories.borrow_mut();
        theories[tid].forward_rules.push(Rule {
            id: rid,
            pattern: pattern.clone(),
            body: body.clone(),
            env: env.clone(),
        });
        // a rule fires retroactively for facts already visible
        let facts = visible_facts(&theories, tid);
        for f in facts {
            if let Some(binding) = unify(&pattern, &f) {
                let key = (rid, binding_key(&binding));
                if theories[tid].fired.insert(key) {
                    work.push((binding, body.clone(), env.clone()));
                }
            }
        }
    }
    for (binding, body, renv) in work {
        let mut env = renv;
        for (n, v) in &binding {
            env = env.bind(n.clone(), v.clone());
        }
        eval_value(it, &body, &env, &Ctx::pure()).await?;
    }
    Ok(())
}

async fn eval_logic_goal(
    it: &Rc<Interp>,
    theory: &Rc<Expr>,
    pattern: &PropAst,
    body: Option<&Rc<Expr>>,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let tid = theory_id(it, theory, env, cx).await?;
    let pat = eval_prop(it, pattern, env, cx, true).await?;
    let sat = set_goal(it, tid, pat, body.map(|b| (b.clone(), env.clone())), span).await?;
    let items: Vec<Value> = sat.into_iter().map(Value::Prop).collect();
    Ok(Value::list(items))
}

/// Register a goal: goal rules of the theory and its ancestors may fire
/// (deriving facts on demand); the result is every visible assertion that
/// satisfies the goal.
pub async fn set_goal(
    it: &Rc<Interp>,
    tid: usize,
    pattern: Prop,
    body: Option<(Rc<Expr>, Env)>,
    _span: &Span,
) -> Result<Vec<Rc<Prop>>, Thrown> {
    let goal_index;
    let mut rule_work: Vec<(Binding, Rc<Expr>, Env)> = Vec::new();
    {
        let mut theories = it.theories.borrow_mut();
        goal_index = theories[tid].goals.len();
        theories[tid].goals.push(Goal {
            pattern: pattern.clone(),
            body: body.clone(),
            fired: std::collections::HashSet::new(),
        });
        for u in ancestry(&theories, tid) {
            let matches: Vec<(u64, Binding, Rc<Expr>, Env)> = theories[u]
                .goal_rules
                .iter()
                .filter_map(|r| {
                    unify_with_goal(&r.pattern, &pattern)
                        .map(|b| (r.id, b, r.body.clone(), r.env.clone()))
                })
                .collect();
            for (rid, binding, rbody, renv) in matches {
                let key = (rid, binding_key(&binding));
                if theories[u].fired.insert(key) {
                    rule_work.push((binding, rbody, renv));
                }
            }
        }
    }
    for (binding, rbody, renv) in rule_work {
        let mut env = renv;
        for (n, v) in &binding {
            env = env.bind(n.clone(), v.clone());
        }
        eval_value(it, &rbody, &env, &Ctx::pure()).await?;
    }
    // collect satisfiers and run the goal body for each new binding
    let mut satisfiers: Vec<Rc<Prop>> = Vec::new();
    let mut body_work: Vec<(Binding, Rc<Expr>, Env)> = Vec::new();
    {
        let mut theories = it.theories.borrow_mut();
        let facts = visible_facts(&theories, tid);
        for f in facts {
            if let Some(binding) = unify(&pattern, &f) {
                satisfiers.push(f.clone());
                if let Some((b, e)) = &body {
                    let key = binding_key(&binding);
                    let g = &mut theories[tid].goals[goal_index];
                    if g.fired.insert(key) {
                        body_work.push((binding, b.clone(), e.clone()));
                    }
                }
            }
        }
    }
    for (binding, b, e) in body_work {
        let mut env = e;
        for (n, v) in &binding {
            env = env.bind(n.clone(), v.clone());
        }
        eval_value(it, &b, &env, &Ctx::pure()).await?;
    }
    Ok(satisfiers)
}

async fn eval_logic_when_goal(
    it: &Rc<Interp>,
    theory: &Rc<Expr>,
    pattern: &PropAst,
    body: &Rc<Expr>,
    env: &Env,
    cx: &Ctx,
    span: &Span,
) -> VResult {
    let tid = theory_id(it, theory, env, cx).await?;
    let pat = eval_prop(it, pattern, env, cx, true).await?;
    add_goal_rule(it, tid, pat, body.clone(), env.clone(), span).await?;
    Ok(Value::Void)
}

pub async fn add_goal_rule(
    it: &Rc<Interp>,
    tid: usize,
    pattern: Prop,
    body: Rc<Expr>,
    env: Env,
    _span: &Span,
) -> Result<(), Thrown> {
    let rid = next_serial();
    let mut work: Vec<(Binding, Rc<Expr>, Env)> = Vec::new();
    {
        let mut theories = it.theories.borrow_mut();
        theories[tid].goal_rules.push(Rule {
            id: rid,
            pattern: pattern.clone(),
            body: body.clone(),
            env: env.clone(),
        });
        // fires retroactively for goals already registered in this theory
        // or any extension of it
        for u in visible_from(&theories, tid) {
            let goal_pats: Vec<Prop> = theories[u]
                .goals
                .iter()
                .map(|g| g.pattern.clone())
                .collect();
            for gp in goal_pats {
                if let Some(binding) = unify_with_goal(&pattern, &gp) {
                    let key = (rid, binding_key(&binding));
                    if theories[tid].fired.insert(key) {
                        work.push((binding, body.clone(), env.clone()));
                    }
                }
            }
        }
    }
    for (binding, body, renv) in work {
        let mut env = renv;
        for (n, v) in &binding {
            env = env.bind(n.clone(), v.clone());
        }
        eval_value(it, &body, &env, &Ctx::pure()).await?;
    }
    Ok(())
}

/// Create a theory extension: the child sees the parent's assertions and
/// goals; the parent never sees the child's.
pub fn extend_theory(it: &Rc<Interp>, parent: usize) -> usize {
    let mut theories = it.theories.borrow_mut();
    theories.push(TheoryState::new(Some(parent)));
    theories.len() - 1
}

pub fn new_theory(it: &Rc<Interp>) -> usize {
    let mut theories = it.theories.borrow_mut();
    theories.push(TheoryState::new(None));
    theories.len() - 1
}

/// Subargument: assert the hypothesis in a fresh extension, set the
/// conclusion as a goal there, and if established record the derivation
/// in the outer theory.
pub async fn subargument(
    it: &Rc<Interp>,
    outer: usize,
    base: usize,
    hypothesis: Rc<Prop>,
    conclusion: Prop,
    span: &Span,
) -> Result<bool, Thrown> {
    let ext = extend_theory(it, base);
    assert_fact(it, ext, hypothesis.clone(), span).await?;
    let sat = set_goal(it, ext, conclusion.clone(), None, span).await?;
    if let Some(first) = sat.first() {
        let derivation = Prop {
            functor: Rc::from("|-"),
            args: vec![
                Term::Const(Value::Prop(hypothesis)),
                Term::Const(Value::Prop(first.clone())),
            ],
        };
        assert_fact(it, outer, Rc::new(derivation), span).await?;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn json_from_ast(j: &JsonAst) -> crate::stdlib::json::JsonTree {
    use crate::stdlib::json::JsonTree as T;
    match j {
        JsonAst::Null => T::Null,
        JsonAst::Bool(b) => T::Bool(*b),
        JsonAst::Int(n) => T::Int(*n),
        JsonAst::Float(x) => T::Float(*x),
        JsonAst::Str(s) => T::Str(s.clone()),
        JsonAst::Array(items) => T::Array(items.iter().map(json_from_ast).collect()),
        JsonAst::Object(pairs) => T::Object(
            pairs
                .iter()
                .map(|(k, v)| (k.clone(), json_from_ast(v)))
                .collect(),
        ),
    }
}
