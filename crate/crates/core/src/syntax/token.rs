use std::rc::Rc;

use super::span::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Reserved,
    Int,
    Float,
    Str,
    Punct,
    Comment,
    Eof,
}

/// One lexed token. `text` is the canonical ASCII spelling: every Unicode
/// glyph form is normalized here, so the parser never sees glyphs.
#[derive(Clone, Debug)]
pub struct Tok {
    pub kind: TokKind,
    pub text: Rc<str>,
    pub span: Span,
}

/// The closed set of reserved words. Identifiers never collide with these.
pub const RESERVED: &[&str] = &[
    "actor",
    "queue",
    "queues",
    "hole",
    "passThru",
    "dequeue",
    "prep",
    "also",
    "become",
    "throw",
    "catch",
    "else",
    "let",
    "with",
    "in",
    "where",
    "interface",
    "implements",
    "extends",
    "override",
    "relay",
    "stay",
    "invariant",
    "future",
    "postpone",
    "inline",
    "enumerate",
    "map",
    "multimap",
    "JSON",
    "null",
    "Nullable",
    "rigid",
    "true",
    "false",
    "void",
    "when",
    "thatIs",
    "and",
    "or",
    "not",
    "mod",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}
