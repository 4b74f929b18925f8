//! Typed surface syntax. Every node carries a span; structural equality
//! deliberately ignores spans so that round-trip tests can compare trees.

use std::rc::Rc;

use super::span::Span;

#[derive(Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Rc<Expr> {
        Rc::new(Expr { kind, span })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(Rc<str>),
    Void,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
            BinOp::Concat => "##",
            BinOp::Eq => "=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
        }
    }
}

/// Binding separator in `let`: `in` sequences groups, `with` keeps the
/// binding in the same group as its predecessor (evaluated against the
/// environment from before the group).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BindSep {
    In,
    With,
}

#[derive(Debug, PartialEq)]
pub struct LetBinding {
    pub pattern: Rc<Pat>,
    pub expr: Rc<Expr>,
    /// Separator that preceded this binding (the first is always `In`).
    pub sep: BindSep,
}

#[derive(Debug, PartialEq)]
pub struct Arm {
    /// `None` for a bare `else ->`.
    pub pattern: Option<Rc<Pat>>,
    pub body: Rc<Expr>,
    pub is_else: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    Universal,
    Named(Rc<str>),
    Nullable(Rc<TypeExpr>),
    /// `[T*]` (star) or `[T]` (exactly one).
    ListOf(Rc<TypeExpr>, bool),
    /// `(T, ...) |-> R`; checked shallowly (value must be callable).
    Fn(Vec<TypeExpr>, Rc<TypeExpr>),
}

#[derive(Debug, PartialEq)]
pub struct Param {
    pub keyword: Option<Rc<str>>,
    pub pattern: Rc<Pat>,
    pub anno: Option<TypeExpr>,
    pub rigid: bool,
}

#[derive(Debug, PartialEq)]
pub struct Params {
    pub slots: Vec<Param>,
    /// Variadic tail: `...rest |-> [T*]`.
    pub rest: Option<(Rc<str>, Option<TypeExpr>)>,
}

#[derive(Debug, PartialEq)]
pub struct Argument {
    pub keyword: Option<Rc<str>>,
    pub value: Rc<Expr>,
    pub spread: bool,
}

#[derive(Debug, PartialEq)]
pub struct CallArgs {
    pub items: Vec<Argument>,
}

#[derive(Debug)]
pub struct Method {
    pub selector: Rc<str>,
    pub params: Vec<Rc<Pat>>,
    /// Present when the selector was written without a parameter list.
    pub bare: bool,
    pub is_override: bool,
    pub body: Rc<Expr>,
    pub span: Span,
}

impl PartialEq for Method {
    fn eq(&self, other: &Self) -> bool {
        self.selector == other.selector
            && self.params == other.params
            && self.bare == other.bare
            && self.is_override == other.is_override
            && self.body == other.body
    }
}

#[derive(Debug)]
pub struct VarDecl {
    pub name: Rc<str>,
    pub anno: Option<TypeExpr>,
    pub init: Rc<Expr>,
    pub span: Span,
}

impl PartialEq for VarDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.anno == other.anno && self.init == other.init
    }
}

#[derive(Debug, PartialEq)]
pub struct ActorDecl {
    pub params: Params,
    pub vars: Vec<VarDecl>,
    pub queues: Vec<Rc<str>>,
    pub implements: Vec<Rc<str>>,
    pub extends: Option<(Rc<str>, CallArgs)>,
    pub invariant: Option<Rc<Expr>>,
    pub methods: Vec<Method>,
}

#[derive(Debug, PartialEq)]
pub struct SigArg {
    pub keyword: Option<Rc<str>>,
    pub anno: TypeExpr,
}

#[derive(Debug, PartialEq)]
pub struct Signature {
    pub selector: Rc<str>,
    pub args: Option<Vec<SigArg>>,
    pub ret: TypeExpr,
}

/// One `implements I (| methods |)` part of a structure definition.
#[derive(Debug, PartialEq)]
pub struct StructImpl {
    pub interface: Rc<str>,
    pub methods: Rc<Vec<Method>>,
}

#[derive(Debug, PartialEq)]
pub enum Definiendum {
    /// `name :=: expr`
    Name(Rc<str>),
    /// `name(params) [|->|-> Type] :=: expr`
    Proc {
        name: Rc<str>,
        params: Rc<Params>,
        ret: Option<TypeExpr>,
    },
    /// `Name[params] :=: implements ...`
    Struct { name: Rc<str>, params: Rc<Params> },
}

#[derive(Debug)]
pub struct Definition {
    pub head: Definiendum,
    pub body: Rc<Expr>,
    pub span: Span,
}

impl PartialEq for Definition {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl Definition {
    pub fn name(&self) -> &Rc<str> {
        match &self.head {
            Definiendum::Name(n) => n,
            Definiendum::Proc { name, .. } => name,
            Definiendum::Struct { name, .. } => name,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sep {
    Comma,
    Semi,
}

/// Command attached by `also` or executed by `prep`.
#[derive(Debug)]
pub enum Command {
    Assign {
        name: Rc<str>,
        expr: Rc<Expr>,
        span: Span,
    },
    Dequeue {
        qexpr: Rc<Expr>,
    },
    /// Evaluated for effect (e.g. a guard conditional that may throw).
    Effect {
        expr: Rc<Expr>,
    },
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Command::Assign {
                    name: n1, expr: e1, ..
                },
                Command::Assign {
                    name: n2, expr: e2, ..
                },
            ) => n1 == n2 && e1 == e2,
            (Command::Dequeue { qexpr: a }, Command::Dequeue { qexpr: b }) => a == b,
            (Command::Effect { expr: a }, Command::Effect { expr: b }) => a == b,
            _ => false,
        }
    }
}

/// Value part of an `also` continuation.
#[derive(Debug, PartialEq)]
pub enum AlsoValue {
    Return(Rc<Expr>),
    Throw(Rc<Expr>),
}

/// Handler for exceptions delivered to an activity parked in a queue.
#[derive(Debug, PartialEq)]
pub enum QueueCatch {
    /// `catch rethrow [also Command*]`
    Rethrow(Vec<Command>),
    Handlers(Vec<Arm>),
}

#[derive(Debug, PartialEq)]
pub enum PrepTail {
    PassThru {
        qexpr: Rc<Expr>,
        catch: Option<QueueCatch>,
        cont: Rc<Expr>,
    },
    Hole {
        expr: Rc<Expr>,
    },
}

#[derive(Debug, PartialEq)]
pub enum JsonAst {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    Array(Vec<JsonAst>),
    Object(Vec<(Rc<str>, JsonAst)>),
}

/// A term of a logic proposition: lowercase identifiers are variables in
/// pattern position, and environment references in assertion position.
#[derive(Debug, PartialEq)]
pub enum PropTerm {
    Var(Rc<str>),
    /// Capitalized identifier: a symbolic constant.
    Symbol(Rc<str>),
    Lit(Lit),
    /// `=expr`: the value of the expression.
    Eq(Rc<Expr>),
}

#[derive(Debug)]
pub struct PropAst {
    pub functor: Rc<str>,
    pub terms: Vec<PropTerm>,
    pub span: Span,
}

impl PartialEq for PropAst {
    fn eq(&self, other: &Self) -> bool {
        self.functor == other.functor && self.terms == other.terms
    }
}

#[derive(Debug, PartialEq)]
pub enum ExprKind {
    Literal(Lit),
    Ident(Rc<str>),
    /// The universal type `?`.
    Universal,
    /// `null TypeName`
    NullOf(TypeExpr),
    Cond {
        subject: Rc<Expr>,
        arms: Vec<Arm>,
        catch_arms: Vec<Arm>,
    },
    Let {
        bindings: Vec<LetBinding>,
        body: Rc<Expr>,
    },
    Where {
        body: Rc<Expr>,
        defs: Vec<Definition>,
    },
    Define(Definition),
    Call {
        callee: Rc<Expr>,
        args: CallArgs,
    },
    DotSend {
        recv: Rc<Expr>,
        selector: Rc<str>,
        args: Option<CallArgs>,
    },
    Receiver {
        methods: Rc<Vec<Method>>,
    },
    InterfaceDecl {
        extends: Option<Rc<str>>,
        sigs: Vec<Signature>,
    },
    Actor(Rc<ActorDecl>),
    /// Body of a structure definition: `implements I (| ... |) also implements J ...`
    StructBody {
        impls: Vec<StructImpl>,
    },
    /// `Name[args]`
    BracketConstruct {
        name: Rc<str>,
        args: CallArgs,
    },
    ListExpr(Vec<(Rc<Expr>, bool)>),
    MultisetExpr(Vec<(Rc<Expr>, bool)>),
    SetExpr(Vec<(Rc<Expr>, bool)>),
    MapExpr {
        entries: Vec<MapEntry>,
        multi: bool,
    },
    Block {
        items: Vec<Rc<Expr>>,
        seps: Vec<Sep>,
    },
    Throw(Rc<Expr>),
    CatchExpr {
        body: Rc<Expr>,
        arms: Vec<Arm>,
    },
    Cast {
        ty: Rc<Expr>,
        value: Rc<Expr>,
    },
    FutureExpr(Rc<Expr>),
    PostponeExpr(Rc<Expr>),
    Inline {
        name: Rc<str>,
        inits: Vec<(Rc<str>, Rc<Expr>)>,
        body: Rc<Expr>,
    },
    EnumDecl(Vec<Rc<str>>),
    JsonLit(JsonAst),
    LogicAssert {
        theory: Rc<Expr>,
        prop: PropAst,
    },
    LogicWhenAssert {
        theory: Rc<Expr>,
        pattern: PropAst,
        body: Rc<Expr>,
    },
    LogicGoal {
        theory: Rc<Expr>,
        pattern: PropAst,
        body: Option<Rc<Expr>>,
    },
    LogicWhenGoal {
        theory: Rc<Expr>,
        pattern: PropAst,
        body: Rc<Expr>,
    },
    Also {
        value: AlsoValue,
        cmds: Vec<Command>,
    },
    /// `rethrow [also Command*]`, valid inside catch handler bodies.
    Rethrow {
        cmds: Vec<Command>,
    },
    PassThru {
        qexpr: Rc<Expr>,
        catch: Option<QueueCatch>,
        cont: Rc<Expr>,
    },
    Prep {
        cmds: Vec<Command>,
        tail: PrepTail,
    },
    Relay {
        selector: Rc<str>,
        args: CallArgs,
        arms: Vec<Arm>,
        catch_arms: Vec<Arm>,
    },
    Stay {
        selector: Rc<str>,
        args: CallArgs,
        arms: Vec<Arm>,
        catch_arms: Vec<Arm>,
    },
    Lambda {
        params: Rc<Params>,
        body: Rc<Expr>,
    },
    Bin {
        op: BinOp,
        lhs: Rc<Expr>,
        rhs: Rc<Expr>,
    },
    Not(Rc<Expr>),
    Neg(Rc<Expr>),
}

#[derive(Debug, PartialEq)]
pub enum MapEntry {
    Pair(Rc<Expr>, Rc<Expr>),
    Spread(Rc<Expr>),
}

#[derive(Debug)]
pub struct Pat {
    pub kind: PatKind,
    pub span: Span,
}

impl PartialEq for Pat {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Pat {
    pub fn new(kind: PatKind, span: Span) -> Rc<Pat> {
        Rc::new(Pat { kind, span })
    }
}

#[derive(Debug, PartialEq)]
pub enum PatKind {
    /// `?`
    Wildcard,
    /// `? |-> Type`
    TypedWildcard(TypeExpr),
    Bind {
        name: Rc<str>,
        anno: Option<TypeExpr>,
    },
    Lit(Lit),
    /// `=expr`
    Eq(Rc<Expr>),
    /// `(> 5)` etc.
    Guard {
        op: BinOp,
        expr: Rc<Expr>,
    },
    ThatIs {
        base: Rc<Pat>,
        pred: Rc<Pat>,
    },
    And(Rc<Pat>, Rc<Pat>),
    Or(Rc<Pat>, Rc<Pat>),
    ListPat(Vec<(Rc<Pat>, bool)>),
    /// `Name[...]` with positional or keyword sub-patterns.
    Construct {
        name: Rc<str>,
        args: Vec<(Option<Rc<str>>, Rc<Pat>)>,
    },
    /// Capitalized identifier: matches a structure with that tag.
    Tag(Rc<str>),
}

impl PatKind {
    /// Literal patterns participate in the static disjointness check.
    pub fn literal_key(&self) -> Option<String> {
        match self {
            PatKind::Lit(l) => Some(format!("{l:?}")),
            _ => None,
        }
    }
}
