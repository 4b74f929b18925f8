//! Recursive-descent parser for the cheesescript surface syntax.
//!
//! The grammar is token-driven with two speculative spots: definition heads
//! (rolled back to expression parsing when no `:=:` follows) and lambda
//! heads (rolled back to a parenthesized expression).

use std::rc::Rc;

use super::ast::*;
use super::lexer::tokenize;
use super::span::{ParseError, Span, Warning};
use super::token::{Tok, TokKind};

#[derive(Debug)]
pub struct Parsed {
    pub items: Vec<Rc<Expr>>,
    pub warnings: Vec<Warning>,
}

/// Parse a whole source file into its top-level items (definitions and
/// expressions separated by `;;`).
pub fn parse_program(file: &str, source: &str) -> Result<Parsed, ParseError> {
    let toks = tokenize(file, source)?;
    let mut p = Parser::new(toks);
    let mut items = Vec::new();
    while !p.at_eof() {
        items.push(p.parse_item()?);
        if !p.eat_punct(";;") && !p.at_eof() {
            return Err(p.err_here("expected ';;' between top-level items", vec![";;".into()]));
        }
        // tolerate trailing separators
        while p.eat_punct(";;") {}
    }
    Ok(Parsed {
        items,
        warnings: p.warnings,
    })
}

/// Parse a single expression or definition (the REPL entry point).
pub fn parse_expression(file: &str, source: &str) -> Result<Rc<Expr>, ParseError> {
    let toks = tokenize(file, source)?;
    let mut p = Parser::new(toks);
    let e = p.parse_item()?;
    p.eat_punct(";;");
    if !p.at_eof() {
        return Err(p.err_here("unexpected input after expression", vec![]));
    }
    Ok(e)
}

/// Parse a single pattern (used by tests and diagnostics).
pub fn parse_pattern_str(file: &str, source: &str) -> Result<Rc<Pat>, ParseError> {
    let toks = tokenize(file, source)?;
    let mut p = Parser::new(toks);
    let pat = p.parse_pattern()?;
    if !p.at_eof() {
        return Err(p.err_here("unexpected input after pattern", vec![]));
    }
    Ok(pat)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    warnings: Vec<Warning>,
}

impl Parser {
    fn new(toks: Vec<Tok>) -> Parser {
        let toks = toks
            .into_iter()
            .filter(|t| t.kind != TokKind::Comment)
            .collect();
        Parser {
            toks,
            pos: 0,
            warnings: Vec::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokKind::Eof
    }

    fn span_here(&self) -> Span {
        self.peek().span.clone()
    }

    fn err_here(&self, msg: impl Into<String>, expected: Vec<String>) -> ParseError {
        ParseError::new(msg, self.span_here()).expecting(expected)
    }

    fn at_punct(&self, s: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Punct && &*t.text == s
    }

    fn at_punct_n(&self, n: usize, s: &str) -> bool {
        let t = self.peek_at(n);
        t.kind == TokKind::Punct && &*t.text == s
    }

    fn eat_punct(&mut self, s: &str) -> bool {
        if self.at_punct(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, s: &str) -> Result<Span, ParseError> {
        if self.at_punct(s) {
            Ok(self.bump().span)
        } else {
            Err(self.err_here(format!("expected '{s}'"), vec![s.to_string()]))
        }
    }

    fn at_reserved(&self, s: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Reserved && &*t.text == s
    }

    fn at_reserved_n(&self, n: usize, s: &str) -> bool {
        let t = self.peek_at(n);
        t.kind == TokKind::Reserved && &*t.text == s
    }

    fn eat_reserved(&mut self, s: &str) -> bool {
        if self.at_reserved(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_reserved(&mut self, s: &str) -> Result<Span, ParseError> {
        if self.at_reserved(s) {
            Ok(self.bump().span)
        } else {
            Err(self.err_here(format!("expected '{s}'"), vec![s.to_string()]))
        }
    }

    fn at_ident(&self) -> bool {
        self.peek().kind == TokKind::Ident
    }

    fn expect_ident(&mut self) -> Result<(Rc<str>, Span), ParseError> {
        if self.at_ident() {
            let t = self.bump();
            Ok((t.text, t.span))
        } else {
            Err(self.err_here("expected identifier", vec!["identifier".into()]))
        }
    }

    // ── Items and definitions ────────────────────────────────────────────

    fn parse_item(&mut self) -> Result<Rc<Expr>, ParseError> {
        if let Some(def) = self.try_parse_definition()? {
            let span = def.span.clone();
            return Ok(Expr::new(ExprKind::Define(def), span));
        }
        self.parse_continuation()
    }

    /// Speculatively parse `Definiendum :=: body`; rolls back when the head
    /// is not followed by `:=:`.
    fn try_parse_definition(&mut self) -> Result<Option<Definition>, ParseError> {
        if !self.at_ident() {
            return Ok(None);
        }
        let save = self.pos;
        match self.parse_definition_head() {
            Ok(Some(head)) => {
                let start = self.toks[save].span.clone();
                self.expect_punct(":=:")
                    .expect("head guaranteed by lookahead");
                let body = self.parse_definition_body(&head)?;
                let span = start.to(&body.span);
                Ok(Some(Definition { head, body, span }))
            }
            Ok(None) | Err(_) => {
                self.pos = save;
                Ok(None)
            }
        }
    }

    fn parse_definition_head(&mut self) -> Result<Option<Definiendum>, ParseError> {
        let (name, _) = self.expect_ident()?;
        if self.at_punct("(") {
            let params = self.parse_params()?;
            let ret = if self.eat_punct("|->|->") || self.eat_punct("|->") {
                Some(self.parse_type_expr()?)
            } else {
                None
            };
            if self.at_punct(":=:") {
                return Ok(Some(Definiendum::Proc {
                    name,
                    params: Rc::new(params),
                    ret,
                }));
            }
            return Ok(None);
        }
        if self.at_punct("[") {
            let params = self.parse_bracket_params()?;
            if self.at_punct(":=:") {
                return Ok(Some(Definiendum::Struct {
                    name,
                    params: Rc::new(params),
                }));
            }
            return Ok(None);
        }
        if self.at_punct(":=:") {
            return Ok(Some(Definiendum::Name(name)));
        }
        Ok(None)
    }

    fn parse_definition_body(&mut self, head: &Definiendum) -> Result<Rc<Expr>, ParseError> {
        if matches!(head, Definiendum::Struct { .. }) || self.at_reserved("implements") {
            return self.parse_struct_body();
        }
        self.parse_continuation()
    }

    fn parse_struct_body(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.span_here();
        let mut impls = Vec::new();
        loop {
            self.expect_reserved("implements")?;
            let (interface, mut end) = self.expect_ident()?;
            let mut methods = Vec::new();
            if self.at_punct("(|") {
                self.bump();
                methods = self.parse_methods()?;
                end = self.expect_punct("|)")?;
            }
            impls.push(StructImpl {
                interface,
                methods: Rc::new(methods),
            });
            if self.at_reserved("also") && self.at_reserved_n(1, "implements") {
                self.bump();
                continue;
            }
            let span = start.to(&end);
            return Ok(Expr::new(ExprKind::StructBody { impls }, span));
        }
    }

    /// Where-group definitions also allow a plain `name :=: expr` chain.
    fn parse_definition_required(&mut self) -> Result<Definition, ParseError> {
        match self.try_parse_definition()? {
            Some(d) => Ok(d),
            None => Err(self.err_here("expected definition", vec!["definition".into()])),
        }
    }

    // ── Continuations (statement level) ──────────────────────────────────

    fn parse_continuation(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.span_here();
        if self.at_reserved("let") {
            return self.parse_let();
        }
        if self.at_reserved("throw") {
            self.bump();
            let value = self.parse_chained()?;
            let span = start.to(&value.span);
            if self.eat_reserved("also") {
                let cmds = self.parse_commands()?;
                return Ok(Expr::new(
                    ExprKind::Also {
                        value: AlsoValue::Throw(value),
                        cmds,
                    },
                    span,
                ));
            }
            return Ok(Expr::new(ExprKind::Throw(value), span));
        }
        if self.at_ident() && &*self.peek().text == "rethrow" {
            self.bump();
            let mut cmds = Vec::new();
            if self.eat_reserved("also") {
                cmds = self.parse_commands()?;
            }
            return Ok(Expr::new(ExprKind::Rethrow { cmds }, start));
        }
        if self.at_reserved("passThru") {
            self.bump();
            return self.parse_passthru_tail(start);
        }
        if self.at_reserved("prep") {
            self.bump();
            let cmds = self.parse_commands()?;
            let node = if self.eat_reserved("passThru") {
                let inner_start = self.span_here();
                let pass = self.parse_passthru_tail(inner_start)?;
                let (qexpr, catch, cont) = match Rc::try_unwrap(pass) {
                    Ok(Expr {
                        kind: ExprKind::PassThru { qexpr, catch, cont },
                        ..
                    }) => (qexpr, catch, cont),
                    _ => unreachable!("parse_passthru_tail returns PassThru"),
                };
                let span = start.to(&cont.span);
                Expr::new(
                    ExprKind::Prep {
                        cmds,
                        tail: PrepTail::PassThru { qexpr, catch, cont },
                    },
                    span,
                )
            } else {
                self.expect_reserved("hole")?;
                let expr = self.parse_chained()?;
                let span = start.to(&expr.span);
                Expr::new(
                    ExprKind::Prep {
                        cmds,
                        tail: PrepTail::Hole { expr },
                    },
                    span,
                )
            };
            let node = self.parse_postfix_chain(node)?;
            return self.parse_also_tail(node);
        }
        if self.at_reserved("hole") {
            // a hole with no prep command
            self.bump();
            let expr = self.parse_chained()?;
            let span = start.to(&expr.span);
            let node = Expr::new(
                ExprKind::Prep {
                    cmds: Vec::new(),
                    tail: PrepTail::Hole { expr },
                },
                span,
            );
            let node = self.parse_postfix_chain(node)?;
            return self.parse_also_tail(node);
        }
        if self.at_reserved("relay") || self.at_reserved("stay") {
            let is_relay = self.at_reserved("relay");
            self.bump();
            let (selector, _) = self.parse_selector()?;
            let args = if self.at_punct("(") {
                self.parse_call_args()?
            } else {
                CallArgs { items: Vec::new() }
            };
            self.expect_punct("??")?;
            let (arms, catch_arms, end) = self.parse_handler_list()?;
            let span = start.to(&end);
            let kind = if is_relay {
                ExprKind::Relay {
                    selector,
                    args,
                    arms,
                    catch_arms,
                }
            } else {
                ExprKind::Stay {
                    selector,
                    args,
                    arms,
                    catch_arms,
                }
            };
            return self.parse_also_tail(Expr::new(kind, span));
        }
        if self.at_reserved("when") {
            return self.parse_when();
        }
        let e = self.parse_chained()?;
        self.parse_also_tail(e)
    }

    fn parse_also_tail(&mut self, value: Rc<Expr>) -> Result<Rc<Expr>, ParseError> {
        if self.at_reserved("also") && !self.at_reserved_n(1, "implements") {
            self.bump();
            let cmds = self.parse_commands()?;
            let span = value.span.clone();
            return Ok(Expr::new(
                ExprKind::Also {
                    value: AlsoValue::Return(value),
                    cmds,
                },
                span,
            ));
        }
        Ok(value)
    }

    fn parse_passthru_tail(&mut self, start: Span) -> Result<Rc<Expr>, ParseError> {
        let qexpr = self.parse_chained()?;
        let catch = if self.at_reserved("catch") {
            self.bump();
            if self.at_ident() && &*self.peek().text == "rethrow" {
                self.bump();
                let mut cmds = Vec::new();
                if self.eat_reserved("also") {
                    cmds = self.parse_commands()?;
                }
                Some(QueueCatch::Rethrow(cmds))
            } else {
                self.expect_punct("(")?;
                let (arms, _, _) = self.parse_handler_arms()?;
                Some(QueueCatch::Handlers(arms))
            }
        } else {
            None
        };
        self.eat_punct("->"); // the arrow is optional before prep/hole/future
        let cont = self.parse_continuation()?;
        let span = start.to(&cont.span);
        Ok(Expr::new(ExprKind::PassThru { qexpr, catch, cont }, span))
    }

    fn parse_commands(&mut self) -> Result<Vec<Command>, ParseError> {
        let mut cmds = vec![self.parse_command()?];
        while self.at_reserved("also") && !self.at_reserved_n(1, "implements") {
            self.bump();
            cmds.push(self.parse_command()?);
        }
        Ok(cmds)
    }

    fn parse_command(&mut self) -> Result<Command, ParseError> {
        if self.at_reserved("dequeue") {
            self.bump();
            let qexpr = self.parse_chained()?;
            return Ok(Command::Dequeue { qexpr });
        }
        // `name = expr` is an assignment; anything else is an effect
        if self.at_ident() && self.at_punct_n(1, "=") {
            let (name, span) = self.expect_ident()?;
            self.bump(); // '='
            let expr = self.parse_chained()?;
            return Ok(Command::Assign { name, expr, span });
        }
        let expr = self.parse_chained()?;
        Ok(Command::Effect { expr })
    }

    fn parse_let(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_reserved("let")?;
        let mut bindings = Vec::new();
        let mut sep = BindSep::In;
        loop {
            let pattern = self.parse_pattern()?;
            self.expect_punct("=")?;
            let expr = self.parse_chained()?;
            bindings.push(LetBinding { pattern, expr, sep });
            if self.eat_reserved("in") {
                sep = BindSep::In;
            } else if self.eat_reserved("with") {
                sep = BindSep::With;
            } else {
                break;
            }
        }
        self.expect_punct("->")?;
        let body = self.parse_continuation()?;
        let span = start.to(&body.span);
        Ok(Expr::new(ExprKind::Let { bindings, body }, span))
    }

    // ── Logic forms ──────────────────────────────────────────────────────

    fn parse_when(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_reserved("when")?;
        if self.eat_punct("|-") {
            let theory = self.parse_theory_ref()?;
            let pattern = self.parse_prop()?;
            self.expect_punct("->")?;
            let body = self.parse_continuation()?;
            let span = start.to(&body.span);
            return Ok(Expr::new(
                ExprKind::LogicWhenAssert {
                    theory,
                    pattern,
                    body,
                },
                span,
            ));
        }
        self.expect_punct("?")?;
        let theory = self.parse_theory_ref()?;
        let pattern = self.parse_prop()?;
        self.expect_punct("->")?;
        let body = self.parse_continuation()?;
        let span = start.to(&body.span);
        Ok(Expr::new(
            ExprKind::LogicWhenGoal {
                theory,
                pattern,
                body,
            },
            span,
        ))
    }

    fn parse_assert(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_punct("|-")?;
        let theory = self.parse_theory_ref()?;
        let prop = self.parse_prop()?;
        let span = start.to(&prop.span);
        Ok(Expr::new(ExprKind::LogicAssert { theory, prop }, span))
    }

    fn parse_goal(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_punct("?")?;
        let theory = self.parse_theory_ref()?;
        let pattern = self.parse_prop()?;
        let mut span = start.to(&pattern.span);
        let body = if self.eat_punct("->") {
            let b = self.parse_continuation()?;
            span = start.to(&b.span);
            Some(b)
        } else {
            None
        };
        Ok(Expr::new(
            ExprKind::LogicGoal {
                theory,
                pattern,
                body,
            },
            span,
        ))
    }

    fn parse_theory_ref(&mut self) -> Result<Rc<Expr>, ParseError> {
        let (name, span) = self.expect_ident()?;
        Ok(Expr::new(ExprKind::Ident(name), span))
    }

    fn parse_prop(&mut self) -> Result<PropAst, ParseError> {
        let (functor, start) = self.expect_ident()?;
        if !functor.chars().next().is_some_and(|c| c.is_uppercase()) {
            return Err(ParseError::new(
                "proposition functors are capitalized",
                start,
            ));
        }
        self.expect_punct("[")?;
        let mut terms = Vec::new();
        if !self.at_punct("]") {
            loop {
                terms.push(self.parse_prop_term()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let end = self.expect_punct("]")?;
        Ok(PropAst {
            functor,
            terms,
            span: start.to(&end),
        })
    }

    fn parse_prop_term(&mut self) -> Result<PropTerm, ParseError> {
        if self.eat_punct("=") {
            let e = self.parse_unary()?;
            return Ok(PropTerm::Eq(e));
        }
        let t = self.peek().clone();
        match t.kind {
            TokKind::Ident => {
                self.bump();
                if t.text.chars().next().unwrap().is_uppercase() {
                    Ok(PropTerm::Symbol(t.text))
                } else {
                    Ok(PropTerm::Var(t.text))
                }
            }
            TokKind::Int => {
                self.bump();
                Ok(PropTerm::Lit(Lit::Int(t.text.parse().map_err(|_| {
                    ParseError::new("integer literal out of range", t.span.clone())
                })?)))
            }
            TokKind::Str => {
                self.bump();
                Ok(PropTerm::Lit(Lit::Text(t.text)))
            }
            _ => Err(self.err_here("expected proposition term", vec!["term".into()])),
        }
    }

    // ── Chained expressions: operators plus `??`/`catch`/`where` postfixes ─

    fn parse_chained(&mut self) -> Result<Rc<Expr>, ParseError> {
        if self.at_punct("|-") {
            let e = self.parse_assert()?;
            return self.parse_postfix_chain(e);
        }
        // `? theory Functor[...]` is a goal expression; a lone `?` elsewhere
        // is the universal type
        if self.at_punct("?")
            && self.peek_at(1).kind == TokKind::Ident
            && self.peek_at(2).kind == TokKind::Ident
            && self.at_punct_n(3, "[")
        {
            let e = self.parse_goal()?;
            return self.parse_postfix_chain(e);
        }
        if self.at_reserved("future") {
            let start = self.bump().span;
            let e = self.parse_chained()?;
            let span = start.to(&e.span);
            return Ok(Expr::new(ExprKind::FutureExpr(e), span));
        }
        if self.at_reserved("postpone") {
            let start = self.bump().span;
            let e = self.parse_chained()?;
            let span = start.to(&e.span);
            return Ok(Expr::new(ExprKind::PostponeExpr(e), span));
        }
        let e = self.parse_binary(0)?;
        self.parse_postfix_chain(e)
    }

    fn parse_postfix_chain(&mut self, mut e: Rc<Expr>) -> Result<Rc<Expr>, ParseError> {
        loop {
            if self.at_punct("??") {
                self.bump();
                let (arms, catch_arms, end) = self.parse_handler_list()?;
                let span = e.span.to(&end);
                self.check_literal_disjointness(&arms)?;
                e = Expr::new(
                    ExprKind::Cond {
                        subject: e,
                        arms,
                        catch_arms,
                    },
                    span,
                );
            } else if self.at_reserved("catch") && self.at_punct_n(1, "(") {
                self.bump();
                let (arms, catch_arms, end) = self.parse_handler_list()?;
                if !catch_arms.is_empty() {
                    return Err(ParseError::new(
                        "nested catch section in catch handlers",
                        end,
                    ));
                }
                let span = e.span.to(&end);
                e = Expr::new(ExprKind::CatchExpr { body: e, arms }, span);
            } else if self.at_reserved("where") {
                self.bump();
                let defs = self.parse_where_defs()?;
                let span = e.span.clone();
                e = Expr::new(ExprKind::Where { body: e, defs }, span);
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_where_defs(&mut self) -> Result<Vec<Definition>, ParseError> {
        let mut defs = Vec::new();
        if self.eat_punct("(") {
            loop {
                defs.push(self.parse_definition_required()?);
                if self.eat_punct(",") || self.eat_reserved("with") || self.eat_reserved("in") {
                    continue;
                }
                break;
            }
            self.expect_punct(")")?;
        } else {
            defs.push(self.parse_definition_required()?);
        }
        Ok(defs)
    }

    fn parse_handler_list(&mut self) -> Result<(Vec<Arm>, Vec<Arm>, Span), ParseError> {
        self.expect_punct("(")?;
        let (arms, catch_arms, end) = self.parse_handler_arms()?;
        Ok((arms, catch_arms, end))
    }

    /// Parses arms up to and including the closing `)`. Once a `catch`
    /// keyword is seen every following arm belongs to the catch section.
    fn parse_handler_arms(&mut self) -> Result<(Vec<Arm>, Vec<Arm>, Span), ParseError> {
        let mut arms = Vec::new();
        let mut catch_arms = Vec::new();
        let mut in_catch = false;
        loop {
            if self.at_punct(")") {
                let end = self.bump().span;
                return Ok((arms, catch_arms, end));
            }
            if self.eat_reserved("catch") {
                in_catch = true;
            }
            let arm = if self.eat_reserved("else") {
                let pattern = if self.at_punct("->") {
                    None
                } else {
                    Some(self.parse_pattern()?)
                };
                self.expect_punct("->")?;
                let body = self.parse_continuation()?;
                Arm {
                    pattern,
                    body,
                    is_else: true,
                }
            } else if in_catch && self.at_ident() && &*self.peek().text == "rethrow" {
                let span = self.bump().span;
                let mut cmds = Vec::new();
                if self.eat_reserved("also") {
                    cmds = self.parse_commands()?;
                }
                Arm {
                    pattern: None,
                    body: Expr::new(ExprKind::Rethrow { cmds }, span),
                    is_else: true,
                }
            } else {
                let pattern = Some(self.parse_pattern()?);
                self.expect_punct("->")?;
                let body = self.parse_continuation()?;
                Arm {
                    pattern,
                    body,
                    is_else: false,
                }
            };
            if in_catch {
                catch_arms.push(arm);
            } else {
                arms.push(arm);
            }
            if !self.eat_punct(",") && !self.at_punct(")") {
                return Err(self.err_here(
                    "expected ',' or ')' in handler list",
                    vec![",".into(), ")".into()],
                ));
            }
        }
    }

    /// Duplicate literal patterns are rejected; overlap among non-literal
    /// patterns is only diagnosed (structurally equal patterns, or a
    /// handler shadowed by an earlier irrefutable one).
    fn check_literal_disjointness(&mut self, arms: &[Arm]) -> Result<(), ParseError> {
        let mut seen_literals: Vec<(String, Span)> = Vec::new();
        let mut irrefutable_at: Option<Span> = None;
        for arm in arms {
            if arm.is_else {
                continue;
            }
            let p = match &arm.pattern {
                Some(p) => p,
                None => continue,
            };
            if let Some(key) = p.kind.literal_key() {
                if let Some((_, first)) = seen_literals.iter().find(|(k, _)| *k == key) {
                    return Err(ParseError::new(
                        format!(
                            "duplicate literal pattern; handlers must be disjoint (first at {first})"
                        ),
                        p.span.clone(),
                    ));
                }
                seen_literals.push((key, p.span.clone()));
            }
            if let Some(first) = &irrefutable_at {
                self.warnings.push(Warning {
                    message: format!(
                        "handler is unreachable: the pattern at {first} matches anything"
                    ),
                    span: p.span.clone(),
                });
            }
            for other in arms.iter().take_while(|a| !std::ptr::eq(*a, arm)) {
                if let Some(q) = &other.pattern {
                    if !other.is_else && q.kind == p.kind && q.kind.literal_key().is_none() {
                        self.warnings.push(Warning {
                            message: "handler patterns overlap".into(),
                            span: p.span.clone(),
                        });
                        break;
                    }
                }
            }
            if irrefutable_at.is_none()
                && matches!(p.kind, PatKind::Wildcard | PatKind::Bind { anno: None, .. })
            {
                irrefutable_at = Some(p.span.clone());
            }
        }
        Ok(())
    }

    // ── Operator precedence ──────────────────────────────────────────────

    fn parse_binary(&mut self, min_level: u8) -> Result<Rc<Expr>, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, level) = match self.peek_binop() {
                Some(x) => x,
                None => return Ok(lhs),
            };
            if level < min_level {
                return Ok(lhs);
            }
            self.bump();
            let rhs = self.parse_binary(level + 1)?;
            let span = lhs.span.to(&rhs.span);
            lhs = Expr::new(ExprKind::Bin { op, lhs, rhs }, span);
        }
    }

    fn peek_binop(&self) -> Option<(BinOp, u8)> {
        let t = self.peek();
        let s: &str = &t.text;
        match t.kind {
            TokKind::Punct => match s {
                "=>" => Some((BinOp::Implies, 1)),
                "=" => Some((BinOp::Eq, 4)),
                "<" => Some((BinOp::Lt, 4)),
                ">" => Some((BinOp::Gt, 4)),
                "<=" => Some((BinOp::Le, 4)),
                ">=" => Some((BinOp::Ge, 4)),
                "##" => Some((BinOp::Concat, 5)),
                "+" => Some((BinOp::Add, 6)),
                "-" => Some((BinOp::Sub, 6)),
                "*" => Some((BinOp::Mul, 7)),
                "/" => Some((BinOp::Div, 7)),
                _ => None,
            },
            TokKind::Reserved => match s {
                "or" => Some((BinOp::Or, 2)),
                "and" => Some((BinOp::And, 3)),
                "mod" => Some((BinOp::Mod, 7)),
                _ => None,
            },
            _ => None,
        }
    }

    fn parse_unary(&mut self) -> Result<Rc<Expr>, ParseError> {
        if self.at_reserved("not") {
            let start = self.bump().span;
            let e = self.parse_unary()?;
            let span = start.to(&e.span);
            return Ok(Expr::new(ExprKind::Not(e), span));
        }
        if self.at_punct("-") {
            let start = self.bump().span;
            let e = self.parse_unary()?;
            let span = start.to(&e.span);
            return Ok(Expr::new(ExprKind::Neg(e), span));
        }
        let e = self.parse_postfix()?;
        if self.at_punct("<-") {
            self.bump();
            let value = self.parse_unary()?;
            let span = e.span.to(&value.span);
            return Ok(Expr::new(ExprKind::Cast { ty: e, value }, span));
        }
        Ok(e)
    }

    fn parse_postfix(&mut self) -> Result<Rc<Expr>, ParseError> {
        let mut e = self.parse_primary()?;
        loop {
            if self.at_punct("(") {
                let args = self.parse_call_args()?;
                let span = e.span.clone();
                e = Expr::new(ExprKind::Call { callee: e, args }, span);
            } else if self.at_punct(".") {
                self.bump();
                let (selector, sel_span) = self.parse_selector()?;
                let args = if self.at_punct("(") {
                    Some(self.parse_call_args()?)
                } else {
                    None
                };
                let span = e.span.to(&sel_span);
                e = Expr::new(
                    ExprKind::DotSend {
                        recv: e,
                        selector,
                        args,
                    },
                    span,
                );
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_selector(&mut self) -> Result<(Rc<str>, Span), ParseError> {
        if self.at_ident() {
            let t = self.bump();
            return Ok((t.text, t.span));
        }
        let t = self.peek().clone();
        if t.kind == TokKind::Punct && matches!(&*t.text, "+" | "-" | "*" | "/") {
            self.bump();
            return Ok((t.text, t.span));
        }
        Err(self.err_here("expected message name", vec!["message name".into()]))
    }

    fn parse_call_args(&mut self) -> Result<CallArgs, ParseError> {
        self.expect_punct("(")?;
        let mut items = Vec::new();
        if !self.at_punct(")") {
            loop {
                let spread = self.eat_punct("...");
                let keyword = if !spread && self.at_ident() && self.at_punct_n(1, ":") {
                    let (kw, _) = self.expect_ident()?;
                    self.bump(); // ':'
                    Some(kw)
                } else {
                    None
                };
                let value = self.parse_continuation()?;
                items.push(Argument {
                    keyword,
                    value,
                    spread,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(CallArgs { items })
    }

    // ── Primary expressions ──────────────────────────────────────────────

    fn parse_primary(&mut self) -> Result<Rc<Expr>, ParseError> {
        let t = self.peek().clone();
        match t.kind {
            TokKind::Int => {
                self.bump();
                let n: i64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("integer literal out of range", t.span.clone()))?;
                Ok(Expr::new(ExprKind::Literal(Lit::Int(n)), t.span))
            }
            TokKind::Float => {
                self.bump();
                let x: f64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("malformed float literal", t.span.clone()))?;
                Ok(Expr::new(ExprKind::Literal(Lit::Float(x)), t.span))
            }
            TokKind::Str => {
                self.bump();
                Ok(Expr::new(ExprKind::Literal(Lit::Text(t.text)), t.span))
            }
            TokKind::Ident => {
                self.bump();
                if self.at_punct("[") {
                    let args = self.parse_bracket_args()?;
                    return Ok(Expr::new(
                        ExprKind::BracketConstruct { name: t.text, args },
                        t.span,
                    ));
                }
                Ok(Expr::new(ExprKind::Ident(t.text), t.span))
            }
            TokKind::Reserved => self.parse_reserved_primary(t),
            TokKind::Punct => self.parse_punct_primary(t),
            TokKind::Comment | TokKind::Eof => {
                Err(self.err_here("unexpected end of input", vec!["expression".into()]))
            }
        }
    }

    fn parse_reserved_primary(&mut self, t: Tok) -> Result<Rc<Expr>, ParseError> {
        match &*t.text {
            "true" => {
                self.bump();
                Ok(Expr::new(ExprKind::Literal(Lit::Bool(true)), t.span))
            }
            "false" => {
                self.bump();
                Ok(Expr::new(ExprKind::Literal(Lit::Bool(false)), t.span))
            }
            "void" => {
                self.bump();
                Ok(Expr::new(ExprKind::Literal(Lit::Void), t.span))
            }
            "null" => {
                self.bump();
                let ty = self.parse_type_expr()?;
                Ok(Expr::new(ExprKind::NullOf(ty), t.span))
            }
            "actor" => self.parse_actor_decl(),
            "interface" => self.parse_interface_decl(),
            "implements" => self.parse_struct_body(),
            "enumerate" => {
                self.bump();
                self.expect_punct("(")?;
                let mut names = Vec::new();
                loop {
                    let (n, _) = self.expect_ident()?;
                    names.push(n);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                let end = self.expect_punct(")")?;
                Ok(Expr::new(ExprKind::EnumDecl(names), t.span.to(&end)))
            }
            "inline" => self.parse_inline(),
            "map" | "multimap" => {
                let multi = &*t.text == "multimap";
                self.bump();
                self.expect_punct("(")?;
                let mut entries = Vec::new();
                if !self.at_punct(")") {
                    loop {
                        if self.eat_punct("...") {
                            let e = self.parse_chained()?;
                            entries.push(MapEntry::Spread(e));
                        } else {
                            let k = self.parse_chained()?;
                            self.expect_punct("->")?;
                            let v = self.parse_chained()?;
                            entries.push(MapEntry::Pair(k, v));
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                let end = self.expect_punct(")")?;
                Ok(Expr::new(
                    ExprKind::MapExpr { entries, multi },
                    t.span.to(&end),
                ))
            }
            "JSON" => {
                self.bump();
                let (j, end) = self.parse_json_value()?;
                Ok(Expr::new(ExprKind::JsonLit(j), t.span.to(&end)))
            }
            "future" => {
                self.bump();
                let e = self.parse_chained()?;
                let span = t.span.to(&e.span);
                Ok(Expr::new(ExprKind::FutureExpr(e), span))
            }
            "postpone" => {
                self.bump();
                let e = self.parse_chained()?;
                let span = t.span.to(&e.span);
                Ok(Expr::new(ExprKind::PostponeExpr(e), span))
            }
            other => Err(self.err_here(
                format!("'{other}' cannot start an expression"),
                vec!["expression".into()],
            )),
        }
    }

    fn parse_punct_primary(&mut self, t: Tok) -> Result<Rc<Expr>, ParseError> {
        match &*t.text {
            "(" => {
                if let Some(lambda) = self.try_parse_lambda()? {
                    return Ok(lambda);
                }
                self.bump();
                let e = self.parse_continuation()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            "(|" => {
                self.bump();
                let methods = self.parse_methods()?;
                let end = self.expect_punct("|)")?;
                Ok(Expr::new(
                    ExprKind::Receiver {
                        methods: Rc::new(methods),
                    },
                    t.span.to(&end),
                ))
            }
            "[" => {
                self.bump();
                let items = self.parse_spread_items("]")?;
                let end = self.expect_punct("]")?;
                Ok(Expr::new(ExprKind::ListExpr(items), t.span.to(&end)))
            }
            "[|" => {
                self.bump();
                let items = self.parse_spread_items("|]")?;
                let end = self.expect_punct("|]")?;
                Ok(Expr::new(ExprKind::MultisetExpr(items), t.span.to(&end)))
            }
            "{|" => {
                self.bump();
                let items = self.parse_spread_items("|}")?;
                let end = self.expect_punct("|}")?;
                Ok(Expr::new(ExprKind::SetExpr(items), t.span.to(&end)))
            }
            "{" => {
                self.bump();
                let mut items = Vec::new();
                let mut seps = Vec::new();
                if !self.at_punct("}") {
                    loop {
                        items.push(self.parse_continuation()?);
                        if self.eat_punct(",") {
                            seps.push(Sep::Comma);
                        } else if self.eat_punct(";") {
                            seps.push(Sep::Semi);
                        } else {
                            break;
                        }
                    }
                }
                let end = self.expect_punct("}")?;
                Ok(Expr::new(ExprKind::Block { items, seps }, t.span.to(&end)))
            }
            "?" => {
                self.bump();
                Ok(Expr::new(ExprKind::Universal, t.span))
            }
            other => Err(self.err_here(
                format!("unexpected token '{other}'"),
                vec!["expression".into()],
            )),
        }
    }

    fn parse_spread_items(&mut self, close: &str) -> Result<Vec<(Rc<Expr>, bool)>, ParseError> {
        let mut items = Vec::new();
        if self.at_punct(close) {
            return Ok(items);
        }
        loop {
            let spread = self.eat_punct("...");
            let e = self.parse_chained()?;
            items.push((e, spread));
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(items)
    }

    /// Lambda lookahead: a parenthesized parameter list followed by `->`.
    fn try_parse_lambda(&mut self) -> Result<Option<Rc<Expr>>, ParseError> {
        // scan to the matching close paren
        let mut depth = 0usize;
        let mut i = 0usize;
        loop {
            let t = self.peek_at(i);
            match t.kind {
                TokKind::Eof => return Ok(None),
                TokKind::Punct => match &*t.text {
                    "(" | "(|" | "[" | "[|" | "{" | "{|" => depth += 1,
                    ")" | "|)" | "]" | "|]" | "}" | "|}" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                },
                _ => {}
            }
            i += 1;
        }
        if !self.at_punct_n(i + 1, "->") {
            return Ok(None);
        }
        let save = self.pos;
        let start = self.span_here();
        let params = match self.parse_params() {
            Ok(p) => p,
            Err(_) => {
                self.pos = save;
                return Ok(None);
            }
        };
        if !self.eat_punct("->") {
            self.pos = save;
            return Ok(None);
        }
        let body = self.parse_continuation()?;
        let span = start.to(&body.span);
        Ok(Some(Expr::new(
            ExprKind::Lambda {
                params: Rc::new(params),
                body,
            },
            span,
        )))
    }

    // ── Declarations ─────────────────────────────────────────────────────

    fn parse_actor_decl(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_reserved("actor")?;
        let params = self.parse_params()?;
        let mut vars = Vec::new();
        let mut queues = Vec::new();
        let mut implements = Vec::new();
        let mut extends = None;
        let mut invariant = None;
        loop {
            if self.eat_punct(",") {
                continue;
            }
            if self.at_reserved("queue") || self.at_reserved("queues") {
                self.bump();
                loop {
                    let (n, _) = self.expect_ident()?;
                    queues.push(n);
                    if !(self.eat_punct(",") && self.at_ident() && !self.at_punct_n(1, "=")) {
                        break;
                    }
                }
                continue;
            }
            if self.at_reserved("implements") {
                self.bump();
                let (n, _) = self.expect_ident()?;
                implements.push(n);
                continue;
            }
            if self.at_reserved("extends") {
                self.bump();
                let (n, _) = self.expect_ident()?;
                let args = if self.at_punct("(") {
                    self.parse_call_args()?
                } else {
                    CallArgs { items: vec![] }
                };
                extends = Some((n, args));
                continue;
            }
            if self.at_reserved("invariant") {
                self.bump();
                invariant = Some(self.parse_chained()?);
                continue;
            }
            if self.at_ident() {
                let (name, span) = self.expect_ident()?;
                let anno = if self.eat_punct("|->") {
                    Some(self.parse_type_expr()?)
                } else {
                    None
                };
                self.expect_punct("=")?;
                let init = self.parse_chained()?;
                vars.push(VarDecl {
                    name,
                    anno,
                    init,
                    span,
                });
                continue;
            }
            break;
        }
        self.expect_punct("(|")?;
        let methods = self.parse_methods()?;
        let end = self.expect_punct("|)")?;
        let span = start.to(&end);
        Ok(Expr::new(
            ExprKind::Actor(Rc::new(ActorDecl {
                params,
                vars,
                queues,
                implements,
                extends,
                invariant,
                methods,
            })),
            span,
        ))
    }

    fn parse_methods(&mut self) -> Result<Vec<Method>, ParseError> {
        let mut methods = Vec::new();
        if self.at_punct("|)") {
            return Ok(methods);
        }
        loop {
            let (selector, span) = self.parse_selector()?;
            let mut bare = true;
            let mut params = Vec::new();
            if self.at_punct("(") {
                bare = false;
                self.bump();
                if !self.at_punct(")") {
                    loop {
                        params.push(self.parse_pattern()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
            }
            let is_override = self.eat_reserved("override");
            self.expect_punct("->")?;
            let body = self.parse_continuation()?;
            methods.push(Method {
                selector,
                params,
                bare,
                is_override,
                body,
                span,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(methods)
    }

    fn parse_interface_decl(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_reserved("interface")?;
        let extends = if self.eat_reserved("extends") {
            let (n, _) = self.expect_ident()?;
            Some(n)
        } else {
            None
        };
        let mut sigs = Vec::new();
        let mut end = start.clone();
        if self.at_punct("(") {
            self.bump();
            if !self.at_punct(")") {
                loop {
                    sigs.push(self.parse_signature()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            end = self.expect_punct(")")?;
        }
        Ok(Expr::new(
            ExprKind::InterfaceDecl { extends, sigs },
            start.to(&end),
        ))
    }

    fn parse_signature(&mut self) -> Result<Signature, ParseError> {
        let (selector, _) = self.parse_selector()?;
        let args = if self.at_punct("(") {
            self.bump();
            let mut args = Vec::new();
            if !self.at_punct(")") {
                loop {
                    let keyword = if self.at_ident() && self.at_punct_n(1, "|->") {
                        let (k, _) = self.expect_ident()?;
                        Some(k)
                    } else if self.eat_punct("?") {
                        None
                    } else if self.at_ident() {
                        let (k, _) = self.expect_ident()?;
                        Some(k)
                    } else {
                        None
                    };
                    let anno = if self.eat_punct("|->") {
                        self.parse_type_expr()?
                    } else {
                        TypeExpr::Universal
                    };
                    args.push(SigArg { keyword, anno });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            Some(args)
        } else {
            None
        };
        if !self.eat_punct("|->|->") {
            // some signatures write the result with a single arrow
            self.expect_punct("|->")?;
        }
        let ret = self.parse_type_expr()?;
        Ok(Signature {
            selector,
            args,
            ret,
        })
    }

    fn parse_inline(&mut self) -> Result<Rc<Expr>, ParseError> {
        let start = self.expect_reserved("inline")?;
        let (name, _) = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut inits = Vec::new();
        if !self.at_punct(")") {
            loop {
                let (n, _) = self.expect_ident()?;
                self.expect_punct("=")?;
                let e = self.parse_chained()?;
                inits.push((n, e));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("->")?;
        let body = self.parse_continuation()?;
        check_tail_calls(&name, &body, true)?;
        let span = start.to(&body.span);
        Ok(Expr::new(ExprKind::Inline { name, inits, body }, span))
    }

    // ── Parameters and types ─────────────────────────────────────────────

    fn parse_params(&mut self) -> Result<Params, ParseError> {
        self.expect_punct("(")?;
        let mut slots = Vec::new();
        let mut rest = None;
        if !self.at_punct(")") {
            loop {
                if self.eat_punct("...") {
                    let (name, _) = self.expect_ident()?;
                    let anno = if self.eat_punct("|->") {
                        Some(self.parse_type_expr()?)
                    } else {
                        None
                    };
                    rest = Some((name, anno));
                    break;
                }
                if self.at_punct("(") {
                    // a grouped parameter list sharing an annotation
                    self.bump();
                    let mut group = Vec::new();
                    loop {
                        let keyword = if self.at_ident() && self.at_punct_n(1, ":") {
                            let (k, _) = self.expect_ident()?;
                            self.bump();
                            Some(k)
                        } else {
                            None
                        };
                        let pattern = self.parse_param_binder()?;
                        let rigid = self.eat_reserved("rigid");
                        group.push((keyword, pattern, rigid));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                    let anno = if self.eat_punct("|->") {
                        Some(self.parse_type_expr()?)
                    } else {
                        None
                    };
                    let group_rigid = self.eat_reserved("rigid");
                    for (keyword, pattern, rigid) in group {
                        slots.push(Param {
                            keyword,
                            pattern,
                            anno: anno.clone(),
                            rigid: rigid || group_rigid,
                        });
                    }
                } else {
                    let keyword = if self.at_ident() && self.at_punct_n(1, ":") {
                        let (k, _) = self.expect_ident()?;
                        self.bump();
                        Some(k)
                    } else {
                        None
                    };
                    let pattern = self.parse_param_binder()?;
                    let anno = if self.eat_punct("|->") {
                        Some(self.parse_type_expr()?)
                    } else {
                        None
                    };
                    let rigid = self.eat_reserved("rigid");
                    slots.push(Param {
                        keyword,
                        pattern,
                        anno,
                        rigid,
                    });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(Params { slots, rest })
    }

    fn parse_param_binder(&mut self) -> Result<Rc<Pat>, ParseError> {
        if self.at_punct("?") {
            let span = self.bump().span;
            return Ok(Pat::new(PatKind::Wildcard, span));
        }
        let (name, span) = self.expect_ident()?;
        Ok(Pat::new(PatKind::Bind { name, anno: None }, span))
    }

    fn parse_bracket_params(&mut self) -> Result<Params, ParseError> {
        self.expect_punct("[")?;
        let mut slots = Vec::new();
        if !self.at_punct("]") {
            loop {
                if self.at_punct("(") {
                    self.bump();
                    let mut group = Vec::new();
                    loop {
                        let keyword = if self.at_ident() && self.at_punct_n(1, ":") {
                            let (k, _) = self.expect_ident()?;
                            self.bump();
                            Some(k)
                        } else {
                            None
                        };
                        let pattern = self.parse_param_binder()?;
                        group.push((keyword, pattern));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                    let anno = if self.eat_punct("|->") {
                        Some(self.parse_type_expr()?)
                    } else {
                        None
                    };
                    for (keyword, pattern) in group {
                        slots.push(Param {
                            keyword,
                            pattern,
                            anno: anno.clone(),
                            rigid: false,
                        });
                    }
                } else {
                    let keyword = if self.at_ident() && self.at_punct_n(1, ":") {
                        let (k, _) = self.expect_ident()?;
                        self.bump();
                        Some(k)
                    } else {
                        None
                    };
                    let pattern = self.parse_param_binder()?;
                    let anno = if self.eat_punct("|->") {
                        Some(self.parse_type_expr()?)
                    } else {
                        None
                    };
                    slots.push(Param {
                        keyword,
                        pattern,
                        anno,
                        rigid: false,
                    });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("]")?;
        Ok(Params { slots, rest: None })
    }

    fn parse_bracket_args(&mut self) -> Result<CallArgs, ParseError> {
        self.expect_punct("[")?;
        let mut items = Vec::new();
        if !self.at_punct("]") {
            loop {
                let spread = self.eat_punct("...");
                let keyword = if !spread && self.at_ident() && self.at_punct_n(1, ":") {
                    let (k, _) = self.expect_ident()?;
                    self.bump();
                    Some(k)
                } else {
                    None
                };
                let value = self.parse_chained()?;
                items.push(Argument {
                    keyword,
                    value,
                    spread,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("]")?;
        Ok(CallArgs { items })
    }

    fn parse_type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        if self.eat_punct("?") {
            return Ok(TypeExpr::Universal);
        }
        if self.at_reserved("Nullable") {
            self.bump();
            let inner = self.parse_type_expr()?;
            return Ok(TypeExpr::Nullable(Rc::new(inner)));
        }
        if self.at_reserved("void") {
            self.bump();
            return Ok(TypeExpr::Named("void".into()));
        }
        if self.eat_punct("[") {
            let inner = self.parse_type_expr()?;
            let star = self.eat_punct("*");
            self.expect_punct("]")?;
            return Ok(TypeExpr::ListOf(Rc::new(inner), star));
        }
        if self.eat_punct("(") {
            let mut args = Vec::new();
            if !self.at_punct(")") {
                loop {
                    args.push(self.parse_type_expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            if self.eat_punct("|->|->") || self.eat_punct("|->") {
                let ret = self.parse_type_expr()?;
                return Ok(TypeExpr::Fn(args, Rc::new(ret)));
            }
            if args.len() == 1 {
                return Ok(args.pop().unwrap());
            }
            return Err(self.err_here("expected '|->' after type group", vec!["|->".into()]));
        }
        if self.at_reserved("queue") {
            self.bump();
            return Ok(TypeExpr::Named("Queue".into()));
        }
        let (name, _) = self.expect_ident()?;
        Ok(TypeExpr::Named(name))
    }

    // ── Patterns ─────────────────────────────────────────────────────────

    fn parse_pattern(&mut self) -> Result<Rc<Pat>, ParseError> {
        let mut lhs = self.parse_pattern_and()?;
        while self.at_reserved("or") {
            self.bump();
            let rhs = self.parse_pattern_and()?;
            let span = lhs.span.to(&rhs.span);
            lhs = Pat::new(PatKind::Or(lhs, rhs), span);
        }
        Ok(lhs)
    }

    fn parse_pattern_and(&mut self) -> Result<Rc<Pat>, ParseError> {
        let mut lhs = self.parse_pattern_thatis()?;
        while self.at_reserved("and") {
            self.bump();
            let rhs = self.parse_pattern_thatis()?;
            let span = lhs.span.to(&rhs.span);
            lhs = Pat::new(PatKind::And(lhs, rhs), span);
        }
        Ok(lhs)
    }

    fn parse_pattern_thatis(&mut self) -> Result<Rc<Pat>, ParseError> {
        let base = self.parse_pattern_base()?;
        if self.at_reserved("thatIs") {
            self.bump();
            let pred = self.parse_pattern()?;
            let span = base.span.to(&pred.span);
            return Ok(Pat::new(PatKind::ThatIs { base, pred }, span));
        }
        Ok(base)
    }

    fn parse_pattern_base(&mut self) -> Result<Rc<Pat>, ParseError> {
        let t = self.peek().clone();
        match (&t.kind, &*t.text) {
            (TokKind::Punct, "?") => {
                self.bump();
                if self.eat_punct("|->") {
                    let ty = self.parse_type_expr()?;
                    return Ok(Pat::new(PatKind::TypedWildcard(ty), t.span));
                }
                Ok(Pat::new(PatKind::Wildcard, t.span))
            }
            (TokKind::Punct, "=") => {
                self.bump();
                if self.at_punct("?") {
                    let end = self.bump().span;
                    let u = Expr::new(ExprKind::Universal, end.clone());
                    return Ok(Pat::new(PatKind::Eq(u), t.span.to(&end)));
                }
                let e = self.parse_unary()?;
                let span = t.span.to(&e.span);
                Ok(Pat::new(PatKind::Eq(e), span))
            }
            (TokKind::Punct, "-") => {
                self.bump();
                let n = self.peek().clone();
                match n.kind {
                    TokKind::Int => {
                        self.bump();
                        let v: i64 = n.text.parse().map_err(|_| {
                            ParseError::new("integer literal out of range", n.span.clone())
                        })?;
                        Ok(Pat::new(PatKind::Lit(Lit::Int(-v)), t.span.to(&n.span)))
                    }
                    TokKind::Float => {
                        self.bump();
                        let v: f64 = n.text.parse().map_err(|_| {
                            ParseError::new("malformed float literal", n.span.clone())
                        })?;
                        Ok(Pat::new(PatKind::Lit(Lit::Float(-v)), t.span.to(&n.span)))
                    }
                    _ => Err(self.err_here("expected numeric literal", vec!["number".into()])),
                }
            }
            (TokKind::Punct, "(") => {
                self.bump();
                // relational guard or parenthesized pattern
                let op = match (&self.peek().kind, &*self.peek().text) {
                    (TokKind::Punct, ">") => Some(BinOp::Gt),
                    (TokKind::Punct, "<") => Some(BinOp::Lt),
                    (TokKind::Punct, ">=") => Some(BinOp::Ge),
                    (TokKind::Punct, "<=") => Some(BinOp::Le),
                    (TokKind::Punct, "=") => Some(BinOp::Eq),
                    _ => None,
                };
                if let Some(op) = op {
                    self.bump();
                    let e = self.parse_chained()?;
                    let end = self.expect_punct(")")?;
                    return Ok(Pat::new(PatKind::Guard { op, expr: e }, t.span.to(&end)));
                }
                let inner = self.parse_pattern()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            (TokKind::Punct, "[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.at_punct("]") {
                    loop {
                        let spread = self.eat_punct("...");
                        let p = self.parse_pattern()?;
                        items.push((p, spread));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                let end = self.expect_punct("]")?;
                Ok(Pat::new(PatKind::ListPat(items), t.span.to(&end)))
            }
            (TokKind::Int, _) => {
                self.bump();
                let v: i64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("integer literal out of range", t.span.clone()))?;
                Ok(Pat::new(PatKind::Lit(Lit::Int(v)), t.span))
            }
            (TokKind::Float, _) => {
                self.bump();
                let v: f64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("malformed float literal", t.span.clone()))?;
                Ok(Pat::new(PatKind::Lit(Lit::Float(v)), t.span))
            }
            (TokKind::Str, _) => {
                self.bump();
                Ok(Pat::new(PatKind::Lit(Lit::Text(t.text)), t.span))
            }
            (TokKind::Reserved, "true") => {
                self.bump();
                Ok(Pat::new(PatKind::Lit(Lit::Bool(true)), t.span))
            }
            (TokKind::Reserved, "false") => {
                self.bump();
                Ok(Pat::new(PatKind::Lit(Lit::Bool(false)), t.span))
            }
            (TokKind::Reserved, "void") => {
                self.bump();
                Ok(Pat::new(PatKind::Lit(Lit::Void), t.span))
            }
            (TokKind::Ident, _) => {
                self.bump();
                let name = t.text.clone();
                let capitalized = name.chars().next().unwrap().is_uppercase();
                if self.at_punct("[") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at_punct("]") {
                        loop {
                            let kw = if self.at_ident() && self.at_punct_n(1, ":") {
                                let (k, _) = self.expect_ident()?;
                                self.bump();
                                Some(k)
                            } else {
                                None
                            };
                            let p = self.parse_pattern()?;
                            args.push((kw, p));
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    let end = self.expect_punct("]")?;
                    return Ok(Pat::new(PatKind::Construct { name, args }, t.span.to(&end)));
                }
                if self.at_punct(".") {
                    // a dotted value pattern such as an enumeration member
                    let mut e = Expr::new(ExprKind::Ident(name), t.span.clone());
                    let mut end = t.span.clone();
                    while self.at_punct(".") {
                        self.bump();
                        let (sel, sp) = self.parse_selector()?;
                        end = sp.clone();
                        let span = e.span.to(&sp);
                        e = Expr::new(
                            ExprKind::DotSend {
                                recv: e,
                                selector: sel,
                                args: None,
                            },
                            span,
                        );
                    }
                    return Ok(Pat::new(PatKind::Eq(e), t.span.to(&end)));
                }
                if capitalized {
                    return Ok(Pat::new(PatKind::Tag(name), t.span));
                }
                let anno = if self.eat_punct("|->") {
                    Some(self.parse_type_expr()?)
                } else {
                    None
                };
                Ok(Pat::new(PatKind::Bind { name, anno }, t.span))
            }
            _ => Err(self.err_here("expected pattern", vec!["pattern".into()])),
        }
    }

    // ── JSON literals ────────────────────────────────────────────────────

    fn parse_json_value(&mut self) -> Result<(JsonAst, Span), ParseError> {
        let t = self.peek().clone();
        match (&t.kind, &*t.text) {
            (TokKind::Reserved, "JSON") => {
                self.bump();
                self.parse_json_value()
            }
            (TokKind::Punct, "{") => {
                self.bump();
                let mut pairs: Vec<(Rc<str>, JsonAst)> = Vec::new();
                if !self.at_punct("}") {
                    loop {
                        let k = self.peek().clone();
                        if k.kind != TokKind::Str {
                            return Err(self.err_here("JSON object keys are strings", vec![]));
                        }
                        self.bump();
                        if pairs.iter().any(|(existing, _)| *existing == k.text) {
                            return Err(ParseError::new("duplicate JSON object key", k.span));
                        }
                        self.expect_punct(":")?;
                        let (v, _) = self.parse_json_value()?;
                        pairs.push((k.text, v));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                let end = self.expect_punct("}")?;
                Ok((JsonAst::Object(pairs), t.span.to(&end)))
            }
            (TokKind::Punct, "[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.at_punct("]") {
                    loop {
                        let (v, _) = self.parse_json_value()?;
                        items.push(v);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                let end = self.expect_punct("]")?;
                Ok((JsonAst::Array(items), t.span.to(&end)))
            }
            (TokKind::Punct, "(") => {
                self.bump();
                let (v, _) = self.parse_json_value()?;
                let end = self.expect_punct(")")?;
                Ok((v, t.span.to(&end)))
            }
            (TokKind::Str, _) => {
                self.bump();
                Ok((JsonAst::Str(t.text), t.span))
            }
            (TokKind::Int, _) => {
                self.bump();
                let v: i64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("integer literal out of range", t.span.clone()))?;
                Ok((JsonAst::Int(v), t.span))
            }
            (TokKind::Float, _) => {
                self.bump();
                let v: f64 = t
                    .text
                    .parse()
                    .map_err(|_| ParseError::new("malformed float literal", t.span.clone()))?;
                Ok((JsonAst::Float(v), t.span))
            }
            (TokKind::Punct, "-") => {
                self.bump();
                let (inner, end) = self.parse_json_value()?;
                let neg = match inner {
                    JsonAst::Int(v) => JsonAst::Int(-v),
                    JsonAst::Float(v) => JsonAst::Float(-v),
                    _ => return Err(ParseError::new("'-' applies to JSON numbers", t.span)),
                };
                Ok((neg, t.span.to(&end)))
            }
            (TokKind::Reserved, "true") => {
                self.bump();
                Ok((JsonAst::Bool(true), t.span))
            }
            (TokKind::Reserved, "false") => {
                self.bump();
                Ok((JsonAst::Bool(false), t.span))
            }
            (TokKind::Reserved, "null") => {
                self.bump();
                Ok((JsonAst::Null, t.span))
            }
            _ => Err(self.err_here("expected JSON value", vec!["JSON value".into()])),
        }
    }
}

/// `inline` bodies may call the loop name only in tail position.
fn check_tail_calls(name: &str, body: &Expr, tail: bool) -> Result<(), ParseError> {
    let recurse = |e: &Expr, t: bool| check_tail_calls(name, e, t);
    match &body.kind {
        ExprKind::Call { callee, args } => {
            if let ExprKind::Ident(n) = &callee.kind {
                if &**n == name && !tail {
                    return Err(ParseError::new(
                        format!("'{name}' may only be called in tail position inside inline"),
                        body.span.clone(),
                    ));
                }
            }
            for a in &args.items {
                recurse(&a.value, false)?;
            }
            Ok(())
        }
        ExprKind::Cond {
            subject,
            arms,
            catch_arms,
        } => {
            recurse(subject, false)?;
            for a in arms.iter().chain(catch_arms) {
                recurse(&a.body, tail)?;
            }
            Ok(())
        }
        ExprKind::Let { bindings, body } => {
            for b in bindings {
                recurse(&b.expr, false)?;
            }
            recurse(body, tail)
        }
        ExprKind::Where { body, defs } => {
            for d in defs {
                recurse(&d.body, false)?;
            }
            recurse(body, tail)
        }
        ExprKind::Ident(n) if &**n == name => Err(ParseError::new(
            format!("'{name}' names the inline loop and cannot be used as a value"),
            body.span.clone(),
        )),
        ExprKind::Bin { lhs, rhs, .. } => {
            recurse(lhs, false)?;
            recurse(rhs, false)
        }
        ExprKind::Not(e) | ExprKind::Neg(e) | ExprKind::Throw(e) => recurse(e, false),
        ExprKind::ListExpr(items) | ExprKind::MultisetExpr(items) | ExprKind::SetExpr(items) => {
            for (e, _) in items {
                recurse(e, false)?;
            }
            Ok(())
        }
        ExprKind::DotSend { recv, args, .. } => {
            recurse(recv, false)?;
            if let Some(args) = args {
                for a in &args.items {
                    recurse(&a.value, false)?;
                }
            }
            Ok(())
        }
        ExprKind::CatchExpr { body, arms } => {
            recurse(body, false)?;
            for a in arms {
                recurse(&a.body, tail)?;
            }
            Ok(())
        }
        ExprKind::Block { items, .. } => {
            for e in items {
                recurse(e, false)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
