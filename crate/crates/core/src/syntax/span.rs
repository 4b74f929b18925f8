use std::fmt;
use std::rc::Rc;

/// A half-open region of source text, 1-based lines and columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub file: Rc<str>,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn new(file: Rc<str>, sl: u32, sc: u32, el: u32, ec: u32) -> Span {
        debug_assert!((sl, sc) <= (el, ec));
        Span {
            file,
            start_line: sl,
            start_col: sc,
            end_line: el,
            end_col: ec,
        }
    }

    pub fn point(file: Rc<str>, line: u32, col: u32) -> Span {
        Span::new(file, line, col, line, col)
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(&self, other: &Span) -> Span {
        Span {
            file: self.file.clone(),
            start_line: self.start_line,
            start_col: self.start_col,
            end_line: other.end_line,
            end_col: other.end_col,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}

/// Parse failure with the location and the tokens that would have been accepted.
#[derive(Clone, Debug)]
pub struct ParseError {
    pub message: String,
    pub span: Span,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(message: impl Into<String>, span: Span) -> ParseError {
        ParseError {
            message: message.into(),
            span,
            expected: Vec::new(),
        }
    }

    pub fn expecting(mut self, expected: Vec<String>) -> ParseError {
        self.expected = expected;
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Non-fatal diagnostic emitted during parsing.
#[derive(Clone, Debug)]
pub struct Warning {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: {}", self.span, self.message)
    }
}
