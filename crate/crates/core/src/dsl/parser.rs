use std::collections::HashSet;

use crate::constraint::{Arg, Call, CondExpr, Span};

use super::ast::{Behavior, BehaviorProgram, Block, Branch, Stmt};
use super::lexer::{lex, Tok, Token};
use super::registry::{ApiRegistry, ApiSig, ParamKind};
use super::ParseError;

pub fn parse(src: &str, reg: &ApiRegistry) -> Result<BehaviorProgram, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, reg };
    p.program()
}

/// Parses a standalone condition such as a condition hint.
pub fn parse_condition(src: &str, reg: &ApiRegistry) -> Result<CondExpr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, reg };
    let e = p.cond()?;
    p.skip_newlines();
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected(&["end of condition"]));
    }
    Ok(e)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    reg: &'a ApiRegistry,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    /// Missing closer: reported at the offending token, naming the opener.
    fn unclosed(&self, opener: Span, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: format!("{} (group opened at {}:{})", self.peek().describe(), opener.line, opener.col),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Span, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn program(&mut self) -> Result<BehaviorProgram, ParseError> {
        let mut behaviors = Vec::new();
        let mut names = HashSet::new();
        self.skip_newlines();
        while *self.peek() != Tok::Eof {
            let b = self.behavior()?;
            if !names.insert(b.name.clone()) {
                return Err(ParseError::Structure { span: b.span, message: format!("duplicate behavior {}", b.name) });
            }
            behaviors.push(b);
            self.skip_newlines();
        }
        if behaviors.is_empty() {
            return Err(self.unexpected(&["`behavior`"]));
        }
        Ok(BehaviorProgram { behaviors })
    }

    fn name(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Name(n) => Ok((n, self.bump().span)),
            _ => Err(self.unexpected(&["name"])),
        }
    }

    fn behavior(&mut self) -> Result<Behavior, ParseError> {
        let start = self.expect(Tok::Kw("behavior"), "`behavior`")?;
        let (name, _) = self.name()?;
        let open = self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.name()?.0);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.unclosed(open, &["`,`", "`)`"])),
                }
            }
        }
        self.bump();
        self.expect(Tok::Colon, "`:`")?;
        let head = start.to(self.prev_span());
        let body = self.suite()?;
        Ok(Behavior { name, params, body, span: head })
    }

    /// NEWLINE INDENT stmt+ DEDENT
    fn suite(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::Newline, "end of line")?;
        self.expect(Tok::Indent, "indented block")?;
        let mut block = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            block.push(self.stmt()?);
        }
        if block.is_empty() {
            return Err(self.unexpected(&["statement"]));
        }
        self.expect(Tok::Dedent, "dedent")?;
        Ok(block)
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::Newline, "end of line").map(|_| ())
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span();
        match self.peek() {
            Tok::Kw("do") => {
                self.bump();
                let s = self.do_stmt(start)?;
                self.end_of_line()?;
                Ok(s)
            }
            Tok::Kw("if") => {
                self.bump();
                let mut branches = Vec::new();
                let cond = self.cond()?;
                self.expect(Tok::Colon, "`:`")?;
                let span = start.to(self.prev_span());
                branches.push(Branch { cond, body: self.suite()?, span });
                let mut otherwise = None;
                loop {
                    let s = self.span();
                    match self.peek() {
                        Tok::Kw("elif") => {
                            self.bump();
                            let cond = self.cond()?;
                            self.expect(Tok::Colon, "`:`")?;
                            let span = s.to(self.prev_span());
                            branches.push(Branch { cond, body: self.suite()?, span });
                        }
                        Tok::Kw("else") => {
                            self.bump();
                            self.expect(Tok::Colon, "`:`")?;
                            otherwise = Some(self.suite()?);
                            break;
                        }
                        _ => break,
                    }
                }
                Ok(Stmt::If { branches, otherwise, span })
            }
            Tok::Kw("while") => {
                self.bump();
                let cond = self.cond()?;
                self.expect(Tok::Colon, "`:`")?;
                let span = start.to(self.prev_span());
                Ok(Stmt::While { cond, body: self.suite()?, span })
            }
            Tok::Kw("terminate") => {
                self.bump();
                self.end_of_line()?;
                Ok(Stmt::Terminate { span: start })
            }
            _ => Err(self.unexpected(&["`do`", "`if`", "`while`", "`terminate`"])),
        }
    }

    fn do_stmt(&mut self, start: Span) -> Result<Stmt, ParseError> {
        let (name, name_span) = self.name()?;
        let (args, call_span) = self.args(name_span)?;
        let call = Call { name: name.clone(), args, span: call_span };
        match name.as_str() {
            "Wait" => {
                if !call.args.is_empty() {
                    return Err(arity(&call, 0, 0));
                }
                self.expect(Tok::Kw("until"), "`until`")?;
                let cond = self.cond()?;
                Ok(Stmt::Wait { cond, span: start.to(self.prev_span()) })
            }
            "Speak" => {
                if call.args.len() != 1 {
                    return Err(arity(&call, 1, 1));
                }
                let text = match &call.args[0] {
                    Arg::Text(s, _) => s.clone(),
                    other => return Err(kind_err(&call, "text", "string", other)),
                };
                Ok(Stmt::Speak { text, span: start.to(call_span) })
            }
            "Sample" => Err(ParseError::Structure {
                span: call_span,
                message: "Sample is only valid as an action argument".into(),
            }),
            _ => {
                let sig = match self.reg.action(&name) {
                    Some(s) => s,
                    None if self.reg.constraint(&name).is_some() => {
                        return Err(ParseError::Structure {
                            span: call_span,
                            message: format!("{name} is a condition, not an action"),
                        })
                    }
                    None => return Err(ParseError::UnknownApi { span: name_span, name }),
                };
                check_call(sig, &call, self.reg)?;
                let until = if *self.peek() == Tok::Kw("until") {
                    self.bump();
                    Some(self.cond()?)
                } else {
                    None
                };
                Ok(Stmt::Do { call, until, span: start.to(self.prev_span()) })
            }
        }
    }

    /// `( arg, ... )` following a call name.
    fn args(&mut self, name_span: Span) -> Result<(Vec<Arg>, Span), ParseError> {
        let open = self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.arg()?);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.unclosed(open, &["`,`", "`)`"])),
                }
            }
        }
        let close = self.bump().span;
        Ok((args, name_span.to(close)))
    }

    fn number(&mut self) -> Result<(f64, Span), ParseError> {
        match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                Ok((v, self.bump().span))
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Arg::Number(v, start))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Arg::Text(s, start))
            }
            Tok::LParen => {
                self.bump();
                let (x, _) = self.number()?;
                self.expect(Tok::Comma, "`,`")?;
                let (y, _) = self.number()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unclosed(start, &["`)`"]));
                }
                let end = self.bump().span;
                Ok(Arg::Point(x, y, start.to(end)))
            }
            Tok::Name(n) => {
                self.bump();
                if n == "Sample" && *self.peek() != Tok::LParen {
                    return Err(self.unexpected(&["`(`"]));
                }
                if n == "Sample" {
                    let open = self.bump().span;
                    let e = self.cond()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unclosed(open, &["`)`", "`and`", "`or`"]));
                    }
                    let end = self.bump().span;
                    check_samplable(&e, self.reg)?;
                    Ok(Arg::Sample(Box::new(e), start.to(end)))
                } else {
                    Ok(Arg::Name(n, start))
                }
            }
            _ => Err(self.unexpected(&["argument"])),
        }
    }

    pub(super) fn cond(&mut self) -> Result<CondExpr, ParseError> {
        let first = self.and_expr()?;
        if *self.peek() != Tok::Kw("or") {
            return Ok(first);
        }
        let mut items = vec![first];
        while *self.peek() == Tok::Kw("or") {
            self.bump();
            items.push(self.and_expr()?);
        }
        let span = items[0].span().to(items.last().unwrap().span());
        Ok(CondExpr::Or(items, span))
    }

    fn and_expr(&mut self) -> Result<CondExpr, ParseError> {
        let first = self.not_expr()?;
        if *self.peek() != Tok::Kw("and") {
            return Ok(first);
        }
        let mut items = vec![first];
        while *self.peek() == Tok::Kw("and") {
            self.bump();
            items.push(self.not_expr()?);
        }
        let span = items[0].span().to(items.last().unwrap().span());
        Ok(CondExpr::And(items, span))
    }

    fn not_expr(&mut self) -> Result<CondExpr, ParseError> {
        if *self.peek() == Tok::Kw("not") {
            let start = self.bump().span;
            let inner = self.not_expr()?;
            let span = start.to(inner.span());
            return Ok(CondExpr::Not(Box::new(inner), span));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<CondExpr, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Kw("True") => {
                self.bump();
                Ok(CondExpr::Const(true, start))
            }
            Tok::Kw("False") => {
                self.bump();
                Ok(CondExpr::Const(false, start))
            }
            Tok::LParen => {
                self.bump();
                let e = self.cond()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unclosed(start, &["`)`", "`and`", "`or`"]));
                }
                self.bump();
                Ok(e)
            }
            Tok::Name(n) => {
                // resolve the name first so a stray entity name is reported where it stands
                let sig = match self.reg.constraint(&n) {
                    Some(s) => s,
                    None if self.reg.action(&n).is_some() || ["Wait", "Speak", "Sample"].contains(&n.as_str()) => {
                        return Err(ParseError::Structure { span: start, message: format!("{n} is not a condition") })
                    }
                    None => return Err(ParseError::UnknownApi { span: start, name: n }),
                };
                self.bump();
                let (args, span) = self.args(start)?;
                let call = Call { name: n.clone(), args, span };
                check_call(sig, &call, self.reg)?;
                Ok(CondExpr::Call(call))
            }
            _ => Err(self.unexpected(&["condition"])),
        }
    }
}

/// Too many arguments point at the first extra one, too few at the `)`.
fn arity(call: &Call, min: usize, max: usize) -> ParseError {
    let span = match call.args.get(max) {
        Some(extra) => extra.span(),
        None => Span::new(call.span.end_line, call.span.end_col, call.span.end_line, call.span.end_col),
    };
    ParseError::Arity { span, name: call.name.clone(), min, max, found: call.args.len() }
}

fn kind_err(call: &Call, param: &str, expected: &str, found: &Arg) -> ParseError {
    ParseError::Kind {
        span: found.span(),
        name: call.name.clone(),
        param: param.to_string(),
        expected: expected.to_string(),
        found: found.kind_name().to_string(),
    }
}

fn check_call(sig: &ApiSig, call: &Call, _reg: &ApiRegistry) -> Result<(), ParseError> {
    let n = call.args.len();
    if n < sig.min_arity() || n > sig.max_arity() {
        return Err(arity(call, sig.min_arity(), sig.max_arity()));
    }
    for (param, arg) in sig.params.iter().zip(&call.args) {
        let ok = match param.kind {
            ParamKind::Entity => matches!(arg, Arg::Name(..)),
            ParamKind::Number => matches!(arg, Arg::Number(..)),
            ParamKind::Point => matches!(arg, Arg::Point(..)),
            ParamKind::Text => matches!(arg, Arg::Text(..)),
            ParamKind::Symbol => matches!(arg, Arg::Name(..) | Arg::Text(..)),
            ParamKind::Target => matches!(arg, Arg::Point(..) | Arg::Name(..) | Arg::Sample(..)),
        };
        if !ok {
            return Err(kind_err(call, &param.name, param.kind.describe(), arg));
        }
    }
    Ok(())
}

fn check_samplable(e: &CondExpr, reg: &ApiRegistry) -> Result<(), ParseError> {
    for leaf in e.leaves() {
        if reg.constraint(&leaf.name).is_some_and(|s| !s.field) {
            return Err(ParseError::Kind {
                span: leaf.span,
                name: "Sample".into(),
                param: "cond".into(),
                expected: "a samplable condition".into(),
                found: leaf.name.clone(),
            });
        }
    }
    Ok(())
}
