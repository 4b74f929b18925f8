//! Runtime values. Everything is immutable and cheaply clonable; actor and
//! future identities are indices into the runtime's tables.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::stdlib::json::JsonTree;
use crate::syntax::ast::{ActorDecl, Expr, Method, Params, TypeExpr};
use crate::syntax::Span;

use super::env::Env;

pub type ActorId = usize;
pub type FutureId = usize;
pub type TheoryId = usize;

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(Rc<str>),
    Void,
    /// `null T` — permitted only where the expected type is Nullable.
    NullOf(Rc<str>),
    List(Rc<ListVal>),
    /// Canonically sorted bag.
    Multiset(Rc<Vec<Value>>),
    /// Canonically sorted, deduplicated.
    Set(Rc<Vec<Value>>),
    /// Sorted by key; keys unique.
    Map(Rc<Vec<(Value, Value)>>),
    /// Sorted by key; each key maps to a canonically sorted bag.
    Multimap(Rc<Vec<(Value, Vec<Value>)>>),
    Enum(Rc<EnumType>, usize),
    EnumType(Rc<EnumType>),
    Type(Rc<TypeTag>),
    Closure(Rc<ClosureVal>),
    Builtin(Rc<BuiltinVal>),
    /// Immutable object: a structure instance or receiver.
    Obj(Rc<ObjVal>),
    ActorDeclV(Rc<ActorDeclVal>),
    StructDeclV(Rc<StructDeclVal>),
    ActorRef(ActorId),
    Future(FutureId),
    QueueRef(ActorId, Rc<str>),
    Message(Rc<MessageVal>),
    Json(Rc<JsonTree>),
    Theory(TheoryId),
    Prop(Rc<crate::logic::Prop>),
    /// Loop variable of an `inline` form; calling it signals a tail call.
    InlineMarker(Rc<str>),
}

#[derive(Debug)]
pub struct ListVal {
    pub items: Vec<Value>,
    /// Lazy tail (a postponed actor or future); forced on demand when
    /// matching or printing needs elements beyond `items`.
    pub tail: Option<Value>,
}

impl ListVal {
    pub fn eager(items: Vec<Value>) -> Rc<ListVal> {
        Rc::new(ListVal { items, tail: None })
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct EnumType {
    pub name: Rc<str>,
    pub members: Vec<Rc<str>>,
}

impl EnumType {
    pub fn ordinal(&self, member: &str) -> Option<usize> {
        self.members.iter().position(|m| &**m == member)
    }
}

#[derive(Debug)]
pub struct TypeTag {
    pub name: Rc<str>,
    /// Interfaces this type extends, nearest first.
    pub extends: Vec<Rc<str>>,
}

#[derive(Debug)]
pub struct ClosureVal {
    pub name: Option<Rc<str>>,
    pub params: Rc<Params>,
    pub body: Rc<Expr>,
    pub env: Env,
    /// Creation serial used for deterministic ordering.
    pub serial: u64,
}

pub struct BuiltinVal {
    pub name: &'static str,
    pub arity: Option<usize>,
    pub f: BuiltinFn,
}

pub type BuiltinFn = Box<
    dyn Fn(
        &crate::runtime::machine::Interp,
        &[Value],
        &Span,
    ) -> Result<Value, crate::kernel::Thrown>,
>;

impl std::fmt::Debug for BuiltinVal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<builtin {}>", self.name)
    }
}

/// One `implements I (| ... |)` method suite of an object.
#[derive(Debug)]
pub struct Suite {
    pub interface: Option<Rc<str>>,
    pub methods: Rc<Vec<Method>>,
}

#[derive(Debug)]
pub struct ObjVal {
    pub tag: Option<Rc<str>>,
    /// Own tag plus every implemented interface (and their extends chains).
    pub type_chain: Vec<Rc<str>>,
    pub fields: Vec<(Option<Rc<str>>, Value)>,
    pub suites: Vec<Suite>,
    pub env: Env,
    /// When set (by an interface cast), dispatch only considers suites of
    /// this interface.
    pub view: Option<Rc<str>>,
    pub serial: u64,
}

#[derive(Debug)]
pub struct ActorDeclVal {
    pub name: Rc<str>,
    pub decl: Rc<ActorDecl>,
    pub env: Env,
}

#[derive(Debug)]
pub struct StructDeclVal {
    pub name: Rc<str>,
    pub params: Rc<Params>,
    pub impls: Vec<(Rc<str>, Rc<Vec<Method>>)>,
    pub env: Env,
}

#[derive(Debug)]
pub struct MessageVal {
    pub selector: Rc<str>,
    pub positional: Vec<Value>,
    pub keyword: Vec<(Rc<str>, Value)>,
}

thread_local! {
    static SERIAL: Cell<u64> = const { Cell::new(0) };
}

pub fn next_serial() -> u64 {
    SERIAL.with(|s| {
        let v = s.get();
        s.set(v + 1);
        v
    })
}

impl Value {
    pub fn text(s: &str) -> Value {
        Value::Text(Rc::from(s))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(ListVal::eager(items))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "Integer",
            Value::Float(_) => "Float",
            Value::Bool(_) => "Boolean",
            Value::Text(_) => "Text",
            Value::Void => "void",
            Value::NullOf(_) => "null",
            Value::List(_) => "List",
            Value::Multiset(_) => "Multiset",
            Value::Set(_) => "Set",
            Value::Map(_) => "Map",
            Value::Multimap(_) => "Multimap",
            Value::Enum(..) => "Enumeration",
            Value::EnumType(_) => "EnumerationType",
            Value::Type(_) => "Type",
            Value::Closure(_) => "Procedure",
            Value::Builtin(_) => "Procedure",
            Value::Obj(_) => "Actor",
            Value::ActorDeclV(_) => "ActorDeclaration",
            Value::StructDeclV(_) => "StructureDeclaration",
            Value::ActorRef(_) => "Actor",
            Value::Future(_) => "Future",
            Value::QueueRef(..) => "Queue",
            Value::Message(_) => "Message",
            Value::Json(_) => "JSON",
            Value::Theory(_) => "Theory",
            Value::Prop(_) => "Proposition",
            Value::InlineMarker(_) => "Procedure",
        }
    }

    /// Tagged structure constructor used for built-in exceptions.
    pub fn exception(tag: &str, fields: Vec<Value>) -> Value {
        Value::Obj(Rc::new(ObjVal {
            tag: Some(Rc::from(tag)),
            type_chain: vec![Rc::from(tag)],
            fields: fields.into_iter().map(|v| (None, v)).collect(),
            suites: Vec::new(),
            env: Env::empty(),
            view: None,
            serial: next_serial(),
        }))
    }

    pub fn obj_tag(&self) -> Option<&str> {
        match self {
            Value::Obj(o) => o.tag.as_deref(),
            _ => None,
        }
    }

    pub fn truthy(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

/// Structural equality. Numbers compare within their kind only: an Integer
/// is never equal to a Float. Actors, futures, closures, and receivers
/// compare by identity.
pub fn structural_equal(a: &Value, b: &Value) -> bool {
    use Value::*;
    match (a, b) {
        (Int(x), Int(y)) => x == y,
        (Float(x), Float(y)) => x == y,
        (Bool(x), Bool(y)) => x == y,
        (Text(x), Text(y)) => x == y,
        (Void, Void) => true,
        (NullOf(x), NullOf(y)) => x == y,
        (List(x), List(y)) => {
            x.tail.is_none()
                && y.tail.is_none()
                && x.items.len() == y.items.len()
                && x.items
                    .iter()
                    .zip(&y.items)
                    .all(|(a, b)| structural_equal(a, b))
        }
        (Multiset(x), Multiset(y)) | (Set(x), Set(y)) => {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(a, b)| structural_equal(a, b))
        }
        (Map(x), Map(y)) => {
            x.len() == y.len()
                && x.iter().zip(y.iter()).all(|((ka, va), (kb, vb))| {
                    structural_equal(ka, kb) && structural_equal(va, vb)
                })
        }
        (Multimap(x), Multimap(y)) => {
            x.len() == y.len()
                && x.iter().zip(y.iter()).all(|((ka, va), (kb, vb))| {
                    structural_equal(ka, kb)
                        && va.len() == vb.len()
                        && va.iter().zip(vb).all(|(a, b)| structural_equal(a, b))
                })
        }
        (Enum(ta, oa), Enum(tb, ob)) => ta.name == tb.name && oa == ob,
        (EnumType(x), EnumType(y)) => x.name == y.name,
        (Type(x), Type(y)) => x.name == y.name,
        (Closure(x), Closure(y)) => Rc::ptr_eq(x, y),
        (Builtin(x), Builtin(y)) => Rc::ptr_eq(x, y),
        (Obj(x), Obj(y)) => {
            if Rc::ptr_eq(x, y) {
                return true;
            }
            // data structures (no methods) compare structurally by tag+fields
            if x.suites.is_empty() && y.suites.is_empty() {
                x.tag == y.tag
                    && x.fields.len() == y.fields.len()
                    && x.fields
                        .iter()
                        .zip(&y.fields)
                        .all(|((ka, va), (kb, vb))| ka == kb && structural_equal(va, vb))
            } else {
                false
            }
        }
        (ActorRef(x), ActorRef(y)) => x == y,
        (Future(x), Future(y)) => x == y,
        (QueueRef(a1, q1), QueueRef(a2, q2)) => a1 == a2 && q1 == q2,
        (Json(x), Json(y)) => x == y,
        (Theory(x), Theory(y)) => x == y,
        (Prop(x), Prop(y)) => x == y,
        _ => false,
    }
}

fn rank(v: &Value) -> u8 {
    use Value::*;
    match v {
        Void => 0,
        Bool(_) => 1,
        Int(_) | Float(_) => 2,
        Text(_) => 3,
        Enum(..) => 4,
        NullOf(_) => 5,
        List(_) => 6,
        Multiset(_) => 7,
        Set(_) => 8,
        Map(_) => 9,
        Multimap(_) => 10,
        Obj(_) => 11,
        Json(_) => 12,
        Type(_) => 13,
        EnumType(_) => 14,
        Closure(_) => 15,
        Builtin(_) => 16,
        ActorDeclV(_) => 17,
        StructDeclV(_) => 18,
        ActorRef(_) => 19,
        Future(_) => 20,
        QueueRef(..) => 21,
        Message(_) => 22,
        Theory(_) => 23,
        Prop(_) => 24,
        InlineMarker(_) => 25,
    }
}

/// Total deterministic order used for canonical storage and printing of
/// sets, multisets, and maps. Equality under this order coincides with
/// `structural_equal` for the orderable kinds.
pub fn canonical_cmp(a: &Value, b: &Value) -> Ordering {
    use Value::*;
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Void, Void) => Ordering::Equal,
        (Bool(x), Bool(y)) => x.cmp(y),
        (Int(x), Int(y)) => x.cmp(y),
        (Float(x), Float(y)) => x.total_cmp(y),
        (Int(x), Float(y)) => (*x as f64).total_cmp(y).then(Ordering::Less),
        (Float(x), Int(y)) => x.total_cmp(&(*y as f64)).then(Ordering::Greater),
        (Text(x), Text(y)) => x.cmp(y),
        (Enum(ta, oa), Enum(tb, ob)) => ta.name.cmp(&tb.name).then(oa.cmp(ob)),
        (NullOf(x), NullOf(y)) => x.cmp(y),
        (List(x), List(y)) => {
            let t = cmp_seq(&x.items, &y.items);
            t.then(x.tail.is_some().cmp(&y.tail.is_some()))
        }
        (Multiset(x), Multiset(y)) | (Set(x), Set(y)) => cmp_seq(x, y),
        (Map(x), Map(y)) => {
            for ((ka, va), (kb, vb)) in x.iter().zip(y.iter()) {
                let c = canonical_cmp(ka, kb).then_with(|| canonical_cmp(va, vb));
                if c != Ordering::Equal {
                    return c;
                }
            }
            x.len().cmp(&y.len())
        }
        (Multimap(x), Multimap(y)) => {
            for ((ka, va), (kb, vb)) in x.iter().zip(y.iter()) {
                let c = canonical_cmp(ka, kb).then_with(|| cmp_seq(va, vb));
                if c != Ordering::Equal {
                    return c;
                }
            }
            x.len().cmp(&y.len())
        }
        (Obj(x), Obj(y)) => {
            let tag_cmp = x.tag.cmp(&y.tag);
            if tag_cmp != Ordering::Equal {
                return tag_cmp;
            }
            if x.suites.is_empty() && y.suites.is_empty() {
                for ((_, va), (_, vb)) in x.fields.iter().zip(&y.fields) {
                    let c = canonical_cmp(va, vb);
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                x.fields.len().cmp(&y.fields.len())
            } else {
                x.serial.cmp(&y.serial)
            }
        }
        (Json(x), Json(y)) => {
            crate::stdlib::json::json_print(x).cmp(&crate::stdlib::json::json_print(y))
        }
        (Type(x), Type(y)) => x.name.cmp(&y.name),
        (EnumType(x), EnumType(y)) => x.name.cmp(&y.name),
        (Closure(x), Closure(y)) => x.serial.cmp(&y.serial),
        (Builtin(x), Builtin(y)) => x.name.cmp(y.name),
        (ActorRef(x), ActorRef(y)) => x.cmp(y),
        (Future(x), Future(y)) => x.cmp(y),
        (QueueRef(a1, q1), QueueRef(a2, q2)) => a1.cmp(a2).then(q1.cmp(q2)),
        (Theory(x), Theory(y)) => x.cmp(y),
        (Prop(x), Prop(y)) => x.render().cmp(&y.render()),
        _ => Ordering::Equal,
    }
}

fn cmp_seq(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let c = canonical_cmp(x, y);
        if c != Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// Sort into canonical order (for multisets and canonical printing).
pub fn canonical_sort(items: &mut [Value]) {
    items.sort_by(canonical_cmp);
}

/// Build a set: canonical order with structural duplicates removed.
pub fn make_set(mut items: Vec<Value>) -> Vec<Value> {
    canonical_sort(&mut items);
    items.dedup_by(|a, b| structural_equal(a, b));
    items
}

/// Group multimap pairs: keys in canonical order, values as canonical bags.
#[allow(clippy::mutable_key_type)] // canonical order never reads the interior cells
pub fn make_multimap(pairs: Vec<(Value, Value)>) -> Vec<(Value, Vec<Value>)> {
    let mut grouped: BTreeMap<CanonKey, (Value, Vec<Value>)> = BTreeMap::new();
    for (k, v) in pairs {
        let key = CanonKey(k.clone());
        grouped
            .entry(key)
            .or_insert_with(|| (k, Vec::new()))
            .1
            .push(v);
    }
    grouped
        .into_values()
        .map(|(k, mut vs)| {
            canonical_sort(&mut vs);
            (k, vs)
        })
        .collect()
}

/// Wrapper giving `Value` a total order for use as a BTreeMap key.
pub struct CanonKey(pub Value);

impl PartialEq for CanonKey {
    fn eq(&self, other: &Self) -> bool {
        canonical_cmp(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for CanonKey {}
impl PartialOrd for CanonKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for CanonKey {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_cmp(&self.0, &other.0)
    }
}

/// Render a value in the ASCII surface syntax. Collections print in
/// canonical order, so output is stable across runs.
pub fn render(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Float(x) => format!("{x:?}"),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => {
            let mut out = String::from("\"");
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
            out
        }
        Value::Void => "void".into(),
        Value::NullOf(t) => format!("null {t}"),
        Value::List(l) => {
            let mut parts: Vec<String> = l.items.iter().map(render).collect();
            if l.tail.is_some() {
                parts.push("...".into());
            }
            format!("[{}]", parts.join(", "))
        }
        Value::Multiset(items) => {
            format!(
                "[| {} |]",
                items.iter().map(render).collect::<Vec<_>>().join(", ")
            )
        }
        Value::Set(items) => {
            format!(
                "{{| {} |}}",
                items.iter().map(render).collect::<Vec<_>>().join(", ")
            )
        }
        Value::Map(pairs) => format!(
            "map({})",
            pairs
                .iter()
                .map(|(k, v)| format!("{} -> {}", render(k), render(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Value::Multimap(pairs) => format!(
            "multimap({})",
            pairs
                .iter()
                .map(|(k, vs)| format!(
                    "{} -> [| {} |]",
                    render(k),
                    vs.iter().map(render).collect::<Vec<_>>().join(", ")
                ))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Value::Enum(t, o) => format!("{}.{}", t.name, t.members[*o]),
        Value::EnumType(t) => format!("{}", t.name),
        Value::Type(t) => t.name.to_string(),
        Value::Closure(c) => match &c.name {
            Some(n) => format!("<procedure {n}>"),
            None => "<procedure>".into(),
        },
        Value::Builtin(b) => format!("<procedure {}>", b.name),
        Value::Obj(o) => match &o.tag {
            Some(tag) if o.suites.is_empty() => {
                if o.fields.is_empty() {
                    tag.to_string()
                } else {
                    format!(
                        "{tag}[{}]",
                        o.fields
                            .iter()
                            .map(|(k, v)| match k {
                                Some(k) => format!("{k}: {}", render(v)),
                                None => render(v),
                            })
                            .collect::<Vec<_>>()
                            .join(", ")
                    )
                }
            }
            Some(tag) => format!("<{tag}>"),
            None => "<receiver>".into(),
        },
        Value::ActorDeclV(d) => format!("<actor declaration {}>", d.name),
        Value::StructDeclV(d) => format!("<structure declaration {}>", d.name),
        Value::ActorRef(id) => format!("<actor {id}>"),
        Value::Future(id) => format!("<future {id}>"),
        Value::QueueRef(a, q) => format!("<queue {q}@{a}>"),
        Value::Message(m) => format!("<message {}>", m.selector),
        Value::Json(j) => format!("JSON {}", crate::stdlib::json::json_print(j)),
        Value::Theory(id) => format!("<theory {id}>"),
        Value::Prop(p) => p.render(),
        Value::InlineMarker(n) => format!("<inline {n}>"),
    }
}

/// Named type checks for binder annotations. `?` accepts everything.
pub fn type_accepts(t: &TypeExpr, v: &Value, implements: &dyn Fn(&Value, &str) -> bool) -> bool {
    match t {
        TypeExpr::Universal => true,
        TypeExpr::Nullable(inner) => {
            matches!(v, Value::NullOf(_)) || type_accepts(inner, v, implements)
        }
        TypeExpr::ListOf(inner, star) => match v {
            Value::List(l) => {
                if !*star && l.items.len() != 1 {
                    return false;
                }
                // the eager prefix is checked; a lazy tail is accepted as-is
                l.items.iter().all(|x| type_accepts(inner, x, implements))
            }
            _ => false,
        },
        TypeExpr::Fn(..) => matches!(v, Value::Closure(_) | Value::Builtin(_)),
        TypeExpr::Named(name) => match &**name {
            "Integer" | "Currency" => matches!(v, Value::Int(_)),
            "NonNegativeInteger" => matches!(v, Value::Int(n) if *n >= 0),
            "Float" => matches!(v, Value::Float(_)),
            "Number" | "Degrees" | "Length" => matches!(v, Value::Int(_) | Value::Float(_)),
            "Boolean" => matches!(v, Value::Bool(_)),
            "Text" | "String" => matches!(v, Value::Text(_)),
            "void" => matches!(v, Value::Void),
            "Queue" => matches!(v, Value::QueueRef(..)),
            "JSON" => matches!(v, Value::Json(_)),
            "Theory" => matches!(v, Value::Theory(_)),
            other => {
                if matches!(v, Value::NullOf(_)) {
                    // null is rejected unless the declared type is Nullable
                    return false;
                }
                implements(v, other)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_never_equals_float() {
        assert!(!structural_equal(&Value::Int(3), &Value::Float(3.0)));
        assert!(structural_equal(&Value::Int(3), &Value::Int(3)));
    }

    #[test]
    fn list_equality_is_deep() {
        let a = Value::list(vec![Value::Int(3), Value::Int(4), Value::Int(5)]);
        let b = Value::list(vec![Value::Int(3), Value::Int(4), Value::Int(5)]);
        assert!(structural_equal(&a, &b));
        let empty = Value::list(vec![]);
        let one = Value::list(vec![Value::Int(1)]);
        assert!(!structural_equal(&empty, &one));
    }

    #[test]
    fn multiset_equality_ignores_order() {
        let mut xs = vec![Value::Int(5), Value::Int(4), Value::Int(4)];
        canonical_sort(&mut xs);
        let mut ys = vec![Value::Int(4), Value::Int(5), Value::Int(4)];
        canonical_sort(&mut ys);
        assert!(structural_equal(
            &Value::Multiset(Rc::new(xs)),
            &Value::Multiset(Rc::new(ys))
        ));
    }

    #[test]
    fn set_dedups() {
        let s = make_set(vec![Value::Int(1), Value::Int(1), Value::Int(2)]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn canonical_render_is_stable() {
        let s = make_set(vec![Value::Int(2), Value::Int(1)]);
        assert_eq!(render(&Value::Set(Rc::new(s))), "{| 1, 2 |}");
        let v = Value::list(vec![Value::Int(3), Value::Int(4), Value::Int(5)]);
        assert_eq!(render(&v), "[3, 4, 5]");
    }
}
