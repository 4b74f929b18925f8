//! Tokenizer, parser, and printer for the surface syntax. Both the Unicode
//! glyph forms and their ASCII equivalents are accepted; tokens are
//! normalized to ASCII.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod span;
pub mod token;

pub use lexer::tokenize;
pub use parser::{parse_expression, parse_pattern_str, parse_program, Parsed};
pub use pretty::{pretty_expr, pretty_program};
pub use span::{ParseError, Span, Warning};
pub use token::{Tok, TokKind};
