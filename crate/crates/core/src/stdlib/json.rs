//! JSON as a primitive data type: an ordered-key tree with a parser and a
//! printer that are exact inverses on trees.

use std::fmt::Write;
use std::rc::Rc;

#[derive(Clone, Debug, PartialEq)]
pub enum JsonTree {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    Array(Vec<JsonTree>),
    /// Keys unique, insertion order preserved.
    Object(Vec<(Rc<str>, JsonTree)>),
}

#[derive(Clone, Debug)]
pub struct JsonError {
    pub message: String,
    pub offset: usize,
}

impl std::fmt::Display for JsonError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "JSON error at byte {}: {}", self.offset, self.message)
    }
}

pub fn json_parse(text: &str) -> Result<JsonTree, JsonError> {
    let bytes: Vec<char> = text.chars().collect();
    let mut p = P { s: &bytes, i: 0 };
    p.ws();
    let v = p.value()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(v)
}

pub fn json_print(tree: &JsonTree) -> String {
    let mut out = String::new();
    print_into(&mut out, tree);
    out
}

fn print_into(out: &mut String, t: &JsonTree) {
    match t {
        JsonTree::Null => out.push_str("null"),
        JsonTree::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        JsonTree::Int(n) => {
            let _ = write!(out, "{n}");
        }
        JsonTree::Float(x) => {
            if x.fract() == 0.0 && x.is_finite() {
                let _ = write!(out, "{x:.1}");
            } else {
                let _ = write!(out, "{x}");
            }
        }
        JsonTree::Str(s) => print_string(out, s),
        JsonTree::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_into(out, v);
            }
            out.push(']');
        }
        JsonTree::Object(pairs) => {
            out.push('{');
            for (i, (k, v)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_string(out, k);
                out.push_str(": ");
                print_into(out, v);
            }
            out.push('}');
        }
    }
}

fn print_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

struct P<'a> {
    s: &'a [char],
    i: usize,
}

impl<'a> P<'a> {
    fn err(&self, msg: &str) -> JsonError {
        JsonError {
            message: msg.to_string(),
            offset: self.i,
        }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, c: char) -> Result<(), JsonError> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn lit(&mut self, word: &str, v: JsonTree) -> Result<JsonTree, JsonError> {
        for c in word.chars() {
            self.eat(c)?;
        }
        Ok(v)
    }

    fn value(&mut self) -> Result<JsonTree, JsonError> {
        match self.peek() {
            Some('{') => self.object(),
            Some('[') => self.array(),
            Some('"') => Ok(JsonTree::Str(self.string()?)),
            Some('t') => self.lit("true", JsonTree::Bool(true)),
            Some('f') => self.lit("false", JsonTree::Bool(false)),
            Some('n') => self.lit("null", JsonTree::Null),
            Some(c) if c == '-' || c.is_ascii_digit() => self.number(),
            _ => Err(self.err("expected JSON value")),
        }
    }

    fn object(&mut self) -> Result<JsonTree, JsonError> {
        self.eat('{')?;
        self.ws();
        let mut pairs: Vec<(Rc<str>, JsonTree)> = Vec::new();
        if self.peek() == Some('}') {
            self.i += 1;
            return Ok(JsonTree::Object(pairs));
        }
        loop {
            self.ws();
            let k = self.string()?;
            if pairs.iter().any(|(existing, _)| **existing == *k) {
                return Err(self.err("duplicate object key"));
            }
            self.ws();
            self.eat(':')?;
            self.ws();
            let v = self.value()?;
            pairs.push((k, v));
            self.ws();
            match self.peek() {
                Some(',') => {
                    self.i += 1;
                }
                Some('}') => {
                    self.i += 1;
                    return Ok(JsonTree::Object(pairs));
                }
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
    }

    fn array(&mut self) -> Result<JsonTree, JsonError> {
        self.eat('[')?;
        self.ws();
        let mut items = Vec::new();
        if self.peek() == Some(']') {
            self.i += 1;
            return Ok(JsonTree::Array(items));
        }
        loop {
            self.ws();
            items.push(self.value()?);
            self.ws();
            match self.peek() {
                Some(',') => {
                    self.i += 1;
                }
                Some(']') => {
                    self.i += 1;
                    return Ok(JsonTree::Array(items));
                }
                _ => return Err(self.err("expected ',' or ']'")),
            }
        }
    }

    fn string(&mut self) -> Result<Rc<str>, JsonError> {
        self.eat('"')?;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated string")),
                Some('"') => {
                    self.i += 1;
                    return Ok(Rc::from(out));
                }
                Some('\\') => {
                    self.i += 1;
                    match self.peek() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('/') => out.push('/'),
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('r') => out.push('\r'),
                        Some('b') => out.push('\u{8}'),
                        Some('f') => out.push('\u{c}'),
                        Some('u') => {
                            self.i += 1;
                            let mut code = 0u32;
                            for _ in 0..4 {
                                let c = self.peek().ok_or_else(|| self.err("bad \\u escape"))?;
                                code = code * 16
                                    + c.to_digit(16).ok_or_else(|| self.err("bad \\u escape"))?;
                                self.i += 1;
                            }
                            out.push(
                                char::from_u32(code).ok_or_else(|| self.err("bad \\u escape"))?,
                            );
                            continue;
                        }
                        _ => return Err(self.err("bad escape")),
                    }
                    self.i += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.i += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<JsonTree, JsonError> {
        let start = self.i;
        if self.peek() == Some('-') {
            self.i += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.i += 1;
        }
        let mut is_float = false;
        if self.peek() == Some('.') {
            is_float = true;
            self.i += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.i += 1;
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            is_float = true;
            self.i += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.i += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.i += 1;
            }
        }
        let text: String = self.s[start..self.i].iter().collect();
        if is_float {
            text.parse::<f64>()
                .map(JsonTree::Float)
                .map_err(|_| self.err("bad number"))
        } else {
            text.parse::<i64>()
                .map(JsonTree::Int)
                .map_err(|_| self.err("bad number"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_array() {
        assert_eq!(json_parse("[]").unwrap(), JsonTree::Array(vec![]));
    }

    #[test]
    fn person_object_round_trips_with_key_order() {
        let text = r#"{"firstName": "John", "lastName": "Smith", "address": {"streetAddress": "21 2nd Street", "city": "New York", "state": "NY", "postalCode": 10021}, "phoneNumbers": ["555-1234", "555-4567"]}"#;
        let tree = json_parse(text).unwrap();
        if let JsonTree::Object(pairs) = &tree {
            let keys: Vec<&str> = pairs.iter().map(|(k, _)| &**k).collect();
            assert_eq!(
                keys,
                vec!["firstName", "lastName", "address", "phoneNumbers"]
            );
        } else {
            panic!("expected object");
        }
        assert_eq!(json_print(&tree), text);
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(json_parse(r#"{"a": 1, "a": 2}"#).is_err());
    }

    #[test]
    fn malformed_input_is_error() {
        assert!(json_parse("[1, 2").is_err());
        assert!(json_parse("{1: 2}").is_err());
    }
}
