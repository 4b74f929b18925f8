//! ASCII re-emission of the AST. `parse(pretty(parse(p)))` must equal
//! `parse(p)` structurally, which the syntax tests check over the corpus.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_program(items: &[std::rc::Rc<Expr>]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&pretty_expr(item));
        out.push_str(";;\n");
    }
    out
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Literal(l) => write_lit(out, l),
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Universal => out.push('?'),
        ExprKind::NullOf(t) => {
            out.push_str("null ");
            write_type(out, t);
        }
        ExprKind::Cond {
            subject,
            arms,
            catch_arms,
        } => {
            out.push('(');
            write_expr(out, subject);
            out.push_str(" ?? (");
            write_arms(out, arms, catch_arms);
            out.push_str("))");
        }
        ExprKind::Let { bindings, body } => {
            out.push_str("(let ");
            for (i, b) in bindings.iter().enumerate() {
                if i > 0 {
                    out.push_str(match b.sep {
                        BindSep::In => " in ",
                        BindSep::With => " with ",
                    });
                }
                write_pat(out, &b.pattern);
                out.push_str(" = ");
                write_expr(out, &b.expr);
            }
            out.push_str(" -> ");
            write_expr(out, body);
            out.push(')');
        }
        ExprKind::Where { body, defs } => {
            out.push('(');
            write_expr(out, body);
            out.push_str(" where (");
            for (i, d) in defs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_def(out, d);
            }
            out.push_str("))");
        }
        ExprKind::Define(d) => write_def(out, d),
        ExprKind::Call { callee, args } => {
            write_expr(out, callee);
            write_call_args(out, args);
        }
        ExprKind::DotSend {
            recv,
            selector,
            args,
        } => {
            write_expr(out, recv);
            out.push('.');
            out.push_str(selector);
            if let Some(args) = args {
                write_call_args(out, args);
            }
        }
        ExprKind::Receiver { methods } => {
            out.push_str("(| ");
            write_methods(out, methods);
            out.push_str(" |)");
        }
        ExprKind::InterfaceDecl { extends, sigs } => {
            out.push_str("interface");
            if let Some(x) = extends {
                let _ = write!(out, " extends {x}");
            }
            out.push_str(" (");
            for (i, s) in sigs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&s.selector);
                if let Some(args) = &s.args {
                    out.push('(');
                    for (j, a) in args.iter().enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        match &a.keyword {
                            Some(k) => out.push_str(k),
                            None => out.push('?'),
                        }
                        out.push_str(" |-> ");
                        write_type(out, &a.anno);
                    }
                    out.push(')');
                }
                out.push_str(" |->|-> ");
                write_type(out, &s.ret);
            }
            out.push(')');
        }
        ExprKind::Actor(a) => write_actor(out, a),
        ExprKind::StructBody { impls } => {
            for (i, part) in impls.iter().enumerate() {
                if i > 0 {
                    out.push_str(" also ");
                }
                let _ = write!(out, "implements {}", part.interface);
                if !part.methods.is_empty() {
                    out.push_str(" (| ");
                    write_methods(out, &part.methods);
                    out.push_str(" |)");
                }
            }
        }
        ExprKind::BracketConstruct { name, args } => {
            out.push_str(name);
            out.push('[');
            write_args_inner(out, args);
            out.push(']');
        }
        ExprKind::ListExpr(items) => write_collection(out, "[", "]", items),
        ExprKind::MultisetExpr(items) => write_collection(out, "[| ", " |]", items),
        ExprKind::SetExpr(items) => write_collection(out, "{| ", " |}", items),
        ExprKind::MapExpr { entries, multi } => {
            out.push_str(if *multi { "multimap(" } else { "map(" });
            for (i, e) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match e {
                    MapEntry::Pair(k, v) => {
                        write_expr(out, k);
                        out.push_str(" -> ");
                        write_expr(out, v);
                    }
                    MapEntry::Spread(e) => {
                        out.push_str("...");
                        write_expr(out, e);
                    }
                }
            }
            out.push(')');
        }
        ExprKind::Block { items, seps } => {
            out.push('{');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(match seps[i - 1] {
                        Sep::Comma => ", ",
                        Sep::Semi => "; ",
                    });
                }
                write_expr(out, item);
            }
            out.push('}');
        }
        ExprKind::Throw(v) => {
            out.push_str("(throw ");
            write_expr(out, v);
            out.push(')');
        }
        ExprKind::CatchExpr { body, arms } => {
            out.push('(');
            write_expr(out, body);
            out.push_str(" catch (");
            write_arms(out, arms, &[]);
            out.push_str("))");
        }
        ExprKind::Cast { ty, value } => {
            out.push('(');
            write_expr(out, ty);
            out.push_str(" <- ");
            write_expr(out, value);
            out.push(')');
        }
        ExprKind::FutureExpr(e) => {
            out.push_str("(future ");
            write_expr(out, e);
            out.push(')');
        }
        ExprKind::PostponeExpr(e) => {
            out.push_str("(postpone ");
            write_expr(out, e);
            out.push(')');
        }
        ExprKind::Inline { name, inits, body } => {
            let _ = write!(out, "(inline {name}(");
            for (i, (n, e)) in inits.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{n} = ");
                write_expr(out, e);
            }
            out.push_str(") -> ");
            write_expr(out, body);
            out.push(')');
        }
        ExprKind::EnumDecl(names) => {
            out.push_str("enumerate (");
            out.push_str(
                &names
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            out.push(')');
        }
        ExprKind::JsonLit(j) => {
            out.push_str("JSON ");
            write_json(out, j);
        }
        ExprKind::LogicAssert { theory, prop } => {
            out.push_str("(|- ");
            write_expr(out, theory);
            out.push(' ');
            write_prop(out, prop);
            out.push(')');
        }
        ExprKind::LogicWhenAssert {
            theory,
            pattern,
            body,
        } => {
            out.push_str("(when |- ");
            write_expr(out, theory);
            out.push(' ');
            write_prop(out, pattern);
            out.push_str(" -> ");
            write_expr(out, body);
            out.push(')');
        }
        ExprKind::LogicGoal {
            theory,
            pattern,
            body,
        } => {
            out.push_str("(? ");
            write_expr(out, theory);
            out.push(' ');
            write_prop(out, pattern);
            if let Some(b) = body {
                out.push_str(" -> ");
                write_expr(out, b);
            }
            out.push(')');
        }
        ExprKind::LogicWhenGoal {
            theory,
            pattern,
            body,
        } => {
            out.push_str("(when ? ");
            write_expr(out, theory);
            out.push(' ');
            write_prop(out, pattern);
            out.push_str(" -> ");
            write_expr(out, body);
            out.push(')');
        }
        ExprKind::Also { value, cmds } => {
            match value {
                AlsoValue::Return(e) => write_expr(out, e),
                AlsoValue::Throw(e) => {
                    out.push_str("throw ");
                    write_expr(out, e);
                }
            }
            write_cmds(out, cmds);
        }
        ExprKind::Rethrow { cmds } => {
            out.push_str("rethrow");
            write_cmds(out, cmds);
        }
        ExprKind::PassThru { qexpr, catch, cont } => {
            out.push_str("passThru ");
            write_expr(out, qexpr);
            write_queue_catch(out, catch);
            out.push_str(" -> ");
            write_expr(out, cont);
        }
        ExprKind::Prep { cmds, tail } => {
            if !cmds.is_empty() {
                out.push_str("prep ");
                for (i, c) in cmds.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" also ");
                    }
                    write_cmd(out, c);
                }
                out.push(' ');
            }
            match tail {
                PrepTail::PassThru { qexpr, catch, cont } => {
                    out.push_str("passThru ");
                    write_expr(out, qexpr);
                    write_queue_catch(out, catch);
                    out.push_str(" -> ");
                    write_expr(out, cont);
                }
                PrepTail::Hole { expr } => {
                    out.push_str("hole ");
                    write_expr(out, expr);
                }
            }
        }
        ExprKind::Relay {
            selector,
            args,
            arms,
            catch_arms,
        }
        | ExprKind::Stay {
            selector,
            args,
            arms,
            catch_arms,
        } => {
            out.push_str(if matches!(e.kind, ExprKind::Relay { .. }) {
                "relay "
            } else {
                "stay "
            });
            out.push_str(selector);
            write_call_args(out, args);
            out.push_str(" ?? (");
            write_arms(out, arms, catch_arms);
            out.push(')');
        }
        ExprKind::Lambda { params, body } => {
            out.push('(');
            write_params(out, params);
            out.push_str(" -> ");
            write_expr(out, body);
            out.push(')');
        }
        ExprKind::Bin { op, lhs, rhs } => {
            out.push('(');
            write_expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs);
            out.push(')');
        }
        ExprKind::Not(e) => {
            out.push_str("(not ");
            write_expr(out, e);
            out.push(')');
        }
        ExprKind::Neg(e) => {
            out.push_str("(- ");
            write_expr(out, e);
            out.push(')');
        }
    }
}

fn write_queue_catch(out: &mut String, catch: &Option<QueueCatch>) {
    match catch {
        None => {}
        Some(QueueCatch::Rethrow(cmds)) => {
            out.push_str(" catch rethrow");
            write_cmds(out, cmds);
        }
        Some(QueueCatch::Handlers(arms)) => {
            out.push_str(" catch (");
            write_arms(out, arms, &[]);
            out.push(')');
        }
    }
}

fn write_cmds(out: &mut String, cmds: &[Command]) {
    for c in cmds {
        out.push_str(" also ");
        write_cmd(out, c);
    }
}

fn write_cmd(out: &mut String, c: &Command) {
    match c {
        Command::Assign { name, expr, .. } => {
            let _ = write!(out, "{name} = ");
            write_expr(out, expr);
        }
        Command::Dequeue { qexpr } => {
            out.push_str("dequeue ");
            write_expr(out, qexpr);
        }
        Command::Effect { expr } => write_expr(out, expr),
    }
}

fn write_collection(
    out: &mut String,
    open: &str,
    close: &str,
    items: &[(std::rc::Rc<Expr>, bool)],
) {
    out.push_str(open);
    for (i, (e, spread)) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if *spread {
            out.push_str("...");
        }
        write_expr(out, e);
    }
    out.push_str(close);
}

fn write_arms(out: &mut String, arms: &[Arm], catch_arms: &[Arm]) {
    let mut first = true;
    for a in arms {
        if !first {
            out.push_str(", ");
        }
        first = false;
        write_arm(out, a, false);
    }
    for a in catch_arms {
        if !first {
            out.push_str(", ");
        }
        first = false;
        out.push_str("catch ");
        write_arm(out, a, true);
    }
}

fn write_arm(out: &mut String, a: &Arm, in_catch: bool) {
    if a.is_else {
        if in_catch && a.pattern.is_none() {
            if let ExprKind::Rethrow { .. } = a.body.kind {
                write_expr(out, &a.body);
                return;
            }
        }
        out.push_str("else ");
    }
    if let Some(p) = &a.pattern {
        write_pat(out, p);
        out.push(' ');
    }
    out.push_str("-> ");
    write_expr(out, &a.body);
}

fn write_methods(out: &mut String, methods: &[Method]) {
    for (i, m) in methods.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&m.selector);
        if !m.bare {
            out.push('(');
            for (j, p) in m.params.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                write_pat(out, p);
            }
            out.push(')');
        }
        if m.is_override {
            out.push_str(" override");
        }
        out.push_str(" -> ");
        write_expr(out, &m.body);
    }
}

fn write_actor(out: &mut String, a: &ActorDecl) {
    out.push_str("actor");
    write_params(out, &a.params);
    for v in &a.vars {
        out.push(' ');
        out.push_str(&v.name);
        if let Some(t) = &v.anno {
            out.push_str(" |-> ");
            write_type(out, t);
        }
        out.push_str(" = ");
        write_expr(out, &v.init);
        out.push(',');
    }
    if !a.queues.is_empty() {
        out.push_str(" queues ");
        out.push_str(
            &a.queues
                .iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    if let Some((base, args)) = &a.extends {
        let _ = write!(out, " extends {base}");
        write_call_args(out, args);
    }
    for i in &a.implements {
        let _ = write!(out, " implements {i}");
    }
    if let Some(inv) = &a.invariant {
        out.push_str(" invariant ");
        write_expr(out, inv);
    }
    out.push_str(" (| ");
    write_methods(out, &a.methods);
    out.push_str(" |)");
}

fn write_params(out: &mut String, p: &Params) {
    out.push('(');
    let mut first = true;
    for s in &p.slots {
        if !first {
            out.push_str(", ");
        }
        first = false;
        if let Some(k) = &s.keyword {
            let _ = write!(out, "{k}: ");
        }
        write_pat(out, &s.pattern);
        if let Some(t) = &s.anno {
            out.push_str(" |-> ");
            write_type(out, t);
        }
        if s.rigid {
            out.push_str(" rigid");
        }
    }
    if let Some((name, anno)) = &p.rest {
        if !first {
            out.push_str(", ");
        }
        let _ = write!(out, "...{name}");
        if let Some(t) = anno {
            out.push_str(" |-> ");
            write_type(out, t);
        }
    }
    out.push(')');
}

fn write_call_args(out: &mut String, args: &CallArgs) {
    out.push('(');
    write_args_inner(out, args);
    out.push(')');
}

fn write_args_inner(out: &mut String, args: &CallArgs) {
    for (i, a) in args.items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if a.spread {
            out.push_str("...");
        }
        if let Some(k) = &a.keyword {
            let _ = write!(out, "{k}: ");
        }
        write_expr(out, &a.value);
    }
}

fn write_def(out: &mut String, d: &Definition) {
    match &d.head {
        Definiendum::Name(n) => out.push_str(n),
        Definiendum::Proc { name, params, ret } => {
            out.push_str(name);
            write_params(out, params);
            if let Some(t) = ret {
                out.push_str(" |->|-> ");
                write_type(out, t);
            }
        }
        Definiendum::Struct { name, params } => {
            out.push_str(name);
            out.push('[');
            let mut first = true;
            for s in &params.slots {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                if let Some(k) = &s.keyword {
                    let _ = write!(out, "{k}: ");
                }
                write_pat(out, &s.pattern);
                if let Some(t) = &s.anno {
                    out.push_str(" |-> ");
                    write_type(out, t);
                }
            }
            out.push(']');
        }
    }
    out.push_str(" :=: ");
    write_expr(out, &d.body);
}

fn write_lit(out: &mut String, l: &Lit) {
    match l {
        Lit::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Lit::Float(x) => {
            let _ = write!(out, "{x:?}");
        }
        Lit::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Lit::Text(s) => write_string(out, s),
        Lit::Void => out.push_str("void"),
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_pat(out: &mut String, p: &Pat) {
    match &p.kind {
        PatKind::Wildcard => out.push('?'),
        PatKind::TypedWildcard(t) => {
            out.push_str("? |-> ");
            write_type(out, t);
        }
        PatKind::Bind { name, anno } => {
            out.push_str(name);
            if let Some(t) = anno {
                out.push_str(" |-> ");
                write_type(out, t);
            }
        }
        PatKind::Lit(l) => write_lit(out, l),
        PatKind::Eq(e) => {
            out.push('=');
            write_expr(out, e);
        }
        PatKind::Guard { op, expr } => {
            let _ = write!(out, "({} ", op.symbol());
            write_expr(out, expr);
            out.push(')');
        }
        PatKind::ThatIs { base, pred } => {
            write_pat(out, base);
            out.push_str(" thatIs ");
            write_pat(out, pred);
        }
        PatKind::And(a, b) => {
            out.push('(');
            write_pat(out, a);
            out.push_str(" and ");
            write_pat(out, b);
            out.push(')');
        }
        PatKind::Or(a, b) => {
            out.push('(');
            write_pat(out, a);
            out.push_str(" or ");
            write_pat(out, b);
            out.push(')');
        }
        PatKind::ListPat(items) => {
            out.push('[');
            for (i, (pat, spread)) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if *spread {
                    out.push_str("...");
                }
                write_pat(out, pat);
            }
            out.push(']');
        }
        PatKind::Construct { name, args } => {
            out.push_str(name);
            out.push('[');
            for (i, (kw, pat)) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if let Some(k) = kw {
                    let _ = write!(out, "{k}: ");
                }
                write_pat(out, pat);
            }
            out.push(']');
        }
        PatKind::Tag(n) => out.push_str(n),
    }
}

fn write_type(out: &mut String, t: &TypeExpr) {
    match t {
        TypeExpr::Universal => out.push('?'),
        TypeExpr::Named(n) => out.push_str(n),
        TypeExpr::Nullable(inner) => {
            out.push_str("Nullable ");
            write_type(out, inner);
        }
        TypeExpr::ListOf(inner, star) => {
            out.push('[');
            write_type(out, inner);
            if *star {
                out.push('*');
            }
            out.push(']');
        }
        TypeExpr::Fn(args, ret) => {
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_type(out, a);
            }
            out.push_str(") |-> ");
            write_type(out, ret);
        }
    }
}

fn write_prop(out: &mut String, p: &PropAst) {
    out.push_str(&p.functor);
    out.push('[');
    for (i, t) in p.terms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match t {
            PropTerm::Var(v) => out.push_str(v),
            PropTerm::Symbol(s) => out.push_str(s),
            PropTerm::Lit(l) => write_lit(out, l),
            PropTerm::Eq(e) => {
                out.push('=');
                write_expr(out, e);
            }
        }
    }
    out.push(']');
}

fn write_json(out: &mut String, j: &JsonAst) {
    match j {
        JsonAst::Null => out.push_str("null"),
        JsonAst::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        JsonAst::Int(n) => {
            let _ = write!(out, "{n}");
        }
        JsonAst::Float(x) => {
            let _ = write!(out, "{x:?}");
        }
        JsonAst::Str(s) => write_string(out, s),
        JsonAst::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_json(out, v);
            }
            out.push(']');
        }
        JsonAst::Object(pairs) => {
            out.push('{');
            for (i, (k, v)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_string(out, k);
                out.push_str(": ");
                write_json(out, v);
            }
            out.push('}');
        }
    }
}
