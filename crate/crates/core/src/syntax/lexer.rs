use std::rc::Rc;

use super::span::{ParseError, Span};
use super::token::{is_reserved, Tok, TokKind};

/// Tokenize a source file. Comment tokens are kept in the stream (the parser
/// filters them out). Unicode glyphs and their ASCII spellings produce
/// identical tokens.
pub fn tokenize(file: &str, source: &str) -> Result<Vec<Tok>, ParseError> {
    Lexer::new(file, source).run()
}

struct Lexer<'a> {
    file: Rc<str>,
    chars: Vec<char>,
    _src: std::marker::PhantomData<&'a str>,
    pos: usize,
    line: u32,
    col: u32,
    out: Vec<Tok>,
}

// Unicode glyph -> canonical ASCII spelling.
const GLYPHS: &[(char, &str)] = &[
    ('→', "->"),
    ('←', "<-"),
    ('≡', ":=:"),
    ('⊢', "|-"),
    ('⇒', "=>"),
    ('≥', ">="),
    ('≤', "<="),
];

impl<'a> Lexer<'a> {
    fn new(file: &str, source: &'a str) -> Lexer<'a> {
        Lexer {
            file: Rc::from(file),
            chars: source.chars().collect(),
            _src: std::marker::PhantomData,
            pos: 0,
            line: 1,
            col: 1,
            out: Vec::new(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> (u32, u32) {
        (self.line, self.col)
    }

    fn span_from(&self, start: (u32, u32)) -> Span {
        Span::new(self.file.clone(), start.0, start.1, self.line, self.col)
    }

    fn push(&mut self, kind: TokKind, text: impl Into<Rc<str>>, start: (u32, u32)) {
        let span = self.span_from(start);
        self.out.push(Tok {
            kind,
            text: text.into(),
            span,
        });
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(i, c)| self.peek_at(i) == Some(c))
    }

    fn eat_str(&mut self, s: &str) {
        for _ in s.chars() {
            self.bump();
        }
    }

    fn run(mut self) -> Result<Vec<Tok>, ParseError> {
        while let Some(c) = self.peek() {
            let start = self.here();
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '①' | 'ⓘ' => {
                    self.bump();
                    self.line_comment(start);
                }
                '/' if self.peek_at(1) == Some('/') => {
                    self.bump();
                    self.bump();
                    self.line_comment(start);
                }
                '/' if self.peek_at(1) == Some('*') => {
                    self.block_comment(start)?;
                }
                '"' => self.string(start)?,
                '€' => {
                    // currency prefix carries no meaning; the amount is the value
                    self.bump();
                    if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        return Err(ParseError::new(
                            "expected digits after currency sign",
                            self.span_from(start),
                        ));
                    }
                    self.number(start);
                }
                c if c.is_ascii_digit() => self.number(start),
                c if c == '_' || c.is_alphabetic() => self.ident(start),
                _ => self.punct(start)?,
            }
        }
        let start = self.here();
        self.push(TokKind::Eof, "", start);
        Ok(self.out)
    }

    fn line_comment(&mut self, start: (u32, u32)) {
        let from = self.pos;
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
        let text: String = self.chars[from..self.pos].iter().collect();
        self.push(TokKind::Comment, text.trim().to_string(), start);
    }

    fn block_comment(&mut self, start: (u32, u32)) -> Result<(), ParseError> {
        self.eat_str("/*");
        let from = self.pos;
        let mut depth = 1usize;
        loop {
            if self.starts_with("/*") {
                depth += 1;
                self.eat_str("/*");
            } else if self.starts_with("*/") {
                depth -= 1;
                if depth == 0 {
                    let text: String = self.chars[from..self.pos].iter().collect();
                    self.eat_str("*/");
                    self.push(TokKind::Comment, text.trim().to_string(), start);
                    return Ok(());
                }
                self.eat_str("*/");
            } else if self.bump().is_none() {
                return Err(ParseError::new(
                    "unterminated block comment",
                    self.span_from(start),
                ));
            }
        }
    }

    fn string(&mut self, start: (u32, u32)) -> Result<(), ParseError> {
        self.bump(); // opening quote
        let mut text = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(ParseError::new(
                        "unterminated string literal",
                        self.span_from(start),
                    ))
                }
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some('\\') => text.push('\\'),
                    Some('"') => text.push('"'),
                    _ => {
                        return Err(ParseError::new(
                            "bad escape in string",
                            self.span_from(start),
                        ))
                    }
                },
                Some(c) => text.push(c),
            }
        }
        self.push(TokKind::Str, text, start);
        Ok(())
    }

    fn number(&mut self, start: (u32, u32)) {
        let from = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let mut is_float = false;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text: String = self.chars[from..self.pos].iter().collect();
        if self.peek() == Some('°') {
            self.bump(); // degree marks are plain numbers
        }
        self.push(
            if is_float {
                TokKind::Float
            } else {
                TokKind::Int
            },
            text,
            start,
        );
    }

    fn ident(&mut self, start: (u32, u32)) {
        let from = self.pos;
        while self.peek().is_some_and(|c| c == '_' || c.is_alphanumeric()) {
            self.bump();
        }
        let text: String = self.chars[from..self.pos].iter().collect();
        let kind = if is_reserved(&text) {
            TokKind::Reserved
        } else {
            TokKind::Ident
        };
        self.push(kind, text, start);
    }

    fn punct(&mut self, start: (u32, u32)) -> Result<(), ParseError> {
        for &(glyph, ascii) in GLYPHS {
            if self.peek() == Some(glyph) {
                self.bump();
                self.push(TokKind::Punct, ascii, start);
                return Ok(());
            }
        }
        // two mapsto glyphs form the signature-result arrow
        if self.peek() == Some('↦') {
            self.bump();
            if self.peek() == Some('↦') {
                self.bump();
                self.push(TokKind::Punct, "|->|->", start);
            } else {
                self.push(TokKind::Punct, "|->", start);
            }
            return Ok(());
        }
        // `{|-` and `(|-` open a block/group followed by an assertion
        // turnstile, not a set or receiver
        if self.starts_with("{|-") || self.starts_with("(|-") {
            let c = self.peek().unwrap();
            self.bump();
            self.push(TokKind::Punct, c.to_string(), start);
            return Ok(());
        }
        // longest match first
        const MULTI: &[&str] = &[
            "|->|->", ";;", ":=:", "...", "|->", "(|", "|)", "[|", "|]", "{|", "|}", "->", "<-",
            "=>", ">=", "<=", "??", "##", "|-",
        ];
        for m in MULTI {
            if self.starts_with(m) {
                self.eat_str(m);
                self.push(TokKind::Punct, *m, start);
                return Ok(());
            }
        }
        let c = self.peek().unwrap();
        if "()[]{},;:.=<>+-*/?".contains(c) {
            self.bump();
            self.push(TokKind::Punct, c.to_string(), start);
            return Ok(());
        }
        Err(ParseError::new(
            format!("unexpected character '{c}'"),
            self.span_from(start),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokKind, String)> {
        tokenize("t", src)
            .unwrap()
            .into_iter()
            .filter(|t| t.kind != TokKind::Eof)
            .map(|t| (t.kind, t.text.to_string()))
            .collect()
    }

    #[test]
    fn basic_conditional_tokens() {
        let ts = kinds("n ?? (0 -> 1)");
        let expect = vec![
            (TokKind::Ident, "n".to_string()),
            (TokKind::Punct, "??".to_string()),
            (TokKind::Punct, "(".to_string()),
            (TokKind::Int, "0".to_string()),
            (TokKind::Punct, "->".to_string()),
            (TokKind::Int, "1".to_string()),
            (TokKind::Punct, ")".to_string()),
        ];
        assert_eq!(ts, expect);
    }

    #[test]
    fn unicode_and_ascii_agree() {
        let a = kinds("x |-> Integer");
        let b = kinds("x ↦ Integer");
        assert_eq!(a, b);
        let a = kinds("f(n) :=: n -> n ## [1] <- x |- t => q >= 1 <= 2");
        let b = kinds("f(n) ≡ n → n ## [1] ← x ⊢ t ⇒ q ≥ 1 ≤ 2");
        assert_eq!(a, b);
        let a = kinds("x |->|-> Integer");
        let b = kinds("x ↦↦ Integer");
        assert_eq!(a, b);
    }

    #[test]
    fn nested_block_comment() {
        let ts: Vec<_> = kinds("/* a /* b */ c */ 1")
            .into_iter()
            .filter(|(k, _)| *k != TokKind::Comment)
            .collect();
        assert_eq!(ts, vec![(TokKind::Int, "1".to_string())]);
    }

    #[test]
    fn unterminated_comment_is_error() {
        assert!(tokenize("t", "/* a /* b */").is_err());
        assert!(tokenize("t", "\"abc").is_err());
    }

    #[test]
    fn line_comment_forms() {
        let ts = kinds("1 // note\n2 ① note\n3 ⓘ note");
        let nums = ts.iter().filter(|(k, _)| *k == TokKind::Int).count();
        assert_eq!(nums, 3);
        let comments: usize = ts.iter().filter(|(k, _)| *k == TokKind::Comment).count();
        assert_eq!(comments, 3);
    }

    #[test]
    fn currency_and_degrees() {
        assert_eq!(kinds("€5"), vec![(TokKind::Int, "5".to_string())]);
        assert_eq!(kinds("45°"), vec![(TokKind::Int, "45".to_string())]);
        assert_eq!(kinds("180.5°"), vec![(TokKind::Float, "180.5".to_string())]);
    }

    #[test]
    fn reserved_words_are_marked() {
        let ts = kinds("actor waiting passThru");
        assert_eq!(ts[0].0, TokKind::Reserved);
        assert_eq!(ts[1].0, TokKind::Ident);
        assert_eq!(ts[2].0, TokKind::Reserved);
    }

    #[test]
    fn spread_and_receiver_delimiters() {
        let ts = kinds("[1, ...[2]] (| x -> 1 |) [| |] {| |}");
        let texts: Vec<_> = ts.iter().map(|(_, t)| t.as_str()).collect();
        assert!(texts.contains(&"..."));
        assert!(texts.contains(&"(|"));
        assert!(texts.contains(&"|)"));
        assert!(texts.contains(&"[|"));
        assert!(texts.contains(&"{|"));
    }
}
