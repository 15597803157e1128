// SPDX-License-Identifier: Apache-2.0

//! Hand-written lexer and recursive-descent parser for `.pfil` source.
//!
//! Semicolons between commands are optional, `[i]` and `{i}` index
//! spellings are equivalent, and an interval endpoint may omit the tick on
//! its event (`[G, G+1]`).

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Cmp, CmpOp, Expr, Func};
use crate::ir::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl core::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Event(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Event(e) => write!(f, "`'{e}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "::", ":=", "<-", "->", "..", "<=", ">=", "==", "!=", "&&", "(", ")", "[", "]", "{", "}", "<",
    ">", "=", ":", ";", ",", ".", "+", "-", "*", "/", "%",
];

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if bytes[*i] == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    while i < bytes.len() {
        let c = bytes[i];
        let span = Span { line, col };
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
        } else if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
        } else if src[i..].starts_with("/*") {
            match src[i + 2..].find("*/") {
                Some(end) => advance(&mut i, &mut line, &mut col, end + 4),
                None => {
                    return Err(ParseError {
                        span,
                        message: "unterminated block comment".into(),
                        expected: Vec::new(),
                    })
                }
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let n = src[start..i].parse::<u64>().map_err(|_| ParseError {
                span,
                message: "integer literal out of range".into(),
                expected: Vec::new(),
            })?;
            out.push((Tok::Num(n), span));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && is_ident(bytes[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push((Tok::Ident(src[start..i].to_owned()), span));
        } else if c == b'\'' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < bytes.len() && is_ident(bytes[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if start == i {
                return Err(ParseError {
                    span,
                    message: "expected an event name after `'`".into(),
                    expected: Vec::new(),
                });
            }
            out.push((Tok::Event(src[start..i].to_owned()), span));
        } else if c == b'"' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < bytes.len() && bytes[i] != b'"' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= bytes.len() {
                return Err(ParseError {
                    span,
                    message: "unterminated string literal".into(),
                    expected: Vec::new(),
                });
            }
            let s = src[start..i].to_owned();
            advance(&mut i, &mut line, &mut col, 1);
            out.push((Tok::Str(s), span));
        } else {
            let sym = SYMBOLS.iter().find(|s| src[i..].starts_with(**s));
            match sym {
                Some(s) => {
                    advance(&mut i, &mut line, &mut col, s.len());
                    out.push((Tok::Sym(s), span));
                }
                None => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(ParseError {
                        span,
                        message: alloc::format!("unexpected character `{ch}`"),
                        expected: Vec::new(),
                    });
                }
            }
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            message: alloc::format!("unexpected {}", self.peek()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            let quoted = alloc::format!("`{s}`");
            self.error(&[&quoted])
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let quoted = alloc::format!("`{kw}`");
            self.error(&[&quoted])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn comma_list<T>(
        &mut self,
        close: &str,
        mut item: impl FnMut(&mut Self) -> PResult<T>,
    ) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        while !self.at_sym(close) {
            out.push(item(self)?);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(close)?;
        Ok(out)
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        loop {
            while self.eat_sym(";") {}
            let span = self.span();
            match self.peek() {
                Tok::Eof => return Ok(prog),
                Tok::Ident(kw) if kw == "import" => {
                    self.bump();
                    self.expect_kw("gen")?;
                    let path = match self.bump() {
                        Tok::Str(s) => s,
                        _ => {
                            self.pos -= 1;
                            return self.error(&["string literal"]);
                        }
                    };
                    self.expect_kw("as")?;
                    let alias = self.ident()?;
                    prog.imports.push(Import { alias, path, span });
                }
                Tok::Ident(kw) if kw == "ext" => {
                    self.bump();
                    self.expect_kw("comp")?;
                    let sig = self.signature(SigKind::External, span)?;
                    prog.components.push(Component { sig, body: None });
                }
                Tok::Ident(kw) if kw == "gen" => {
                    self.bump();
                    let tool = self.ident()?;
                    self.expect_kw("comp")?;
                    let sig = self.signature(SigKind::Generated { tool }, span)?;
                    prog.components.push(Component { sig, body: None });
                }
                Tok::Ident(kw) if kw == "comp" => {
                    self.bump();
                    let sig = self.signature(SigKind::Source, span)?;
                    let body = self.block()?;
                    prog.components.push(Component {
                        sig,
                        body: Some(body),
                    });
                }
                _ => return self.error(&["`comp`", "`ext`", "`gen`", "`import`"]),
            }
        }
    }

    fn signature(&mut self, kind: SigKind, span: Span) -> PResult<Signature> {
        let name = self.ident()?;
        let mut sig = Signature {
            name,
            params: Vec::new(),
            events: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            lets: Vec::new(),
            out_params: Vec::new(),
            out_constraints: Vec::new(),
            where_clauses: Vec::new(),
            kind,
            span,
        };
        if self.eat_sym("[") {
            sig.params = self.comma_list("]", |p| {
                let name = p.ident()?;
                let default = if p.eat_sym("=") { Some(p.expr()?) } else { None };
                Ok(Param { name, default })
            })?;
        }
        if self.eat_sym("<") {
            sig.events = self.comma_list(">", |p| {
                let name = p.event_name()?;
                p.expect_sym(":")?;
                let delay = p.expr()?;
                Ok(EventDef { name, delay })
            })?;
        }
        self.expect_sym("(")?;
        sig.inputs = self.comma_list(")", Parser::port_def)?;
        if self.eat_sym("->") {
            self.expect_sym("(")?;
            sig.outputs = self.comma_list(")", Parser::port_def)?;
        }
        if self.eat_kw("with") {
            self.expect_sym("{")?;
            loop {
                while self.eat_sym(";") {}
                if self.eat_sym("}") {
                    break;
                }
                if self.eat_kw("let") {
                    let name = self.ident()?;
                    self.expect_sym("=")?;
                    let value = self.expr()?;
                    sig.lets.push((name, value));
                } else if self.eat_kw("some") {
                    loop {
                        sig.out_params.push(self.ident()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                    if self.eat_kw("where") {
                        let cs = self.cmp_list()?;
                        sig.out_constraints.extend(cs);
                    }
                } else {
                    return self.error(&["`let`", "`some`", "`}`"]);
                }
            }
        }
        if self.eat_kw("where") {
            sig.where_clauses = self.cmp_list()?;
        }
        if sig.kind != SigKind::Source {
            self.expect_sym(";")?;
        }
        Ok(sig)
    }

    fn event_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Event(e) => {
                self.bump();
                Ok(e)
            }
            _ => self.error(&["event (`'G`)"]),
        }
    }

    fn port_def(&mut self) -> PResult<PortDef> {
        let span = self.span();
        let name = self.ident()?;
        let mut dims = Vec::new();
        while self.eat_sym("[") {
            dims.push(self.expr()?);
            self.expect_sym("]")?;
        }
        self.expect_sym(":")?;
        let mut index_vars = Vec::new();
        if self.eat_kw("for") {
            self.expect_sym("<")?;
            index_vars = self.comma_list(">", Parser::ident)?;
        }
        let live = if self.at_sym("[") {
            Some(self.interval()?)
        } else {
            None
        };
        if index_vars.is_empty() {
            index_vars = vec!["_".to_string(); dims.len()];
        }
        let width = self.expr()?;
        Ok(PortDef {
            name,
            dims,
            index_vars,
            live,
            width,
            span,
        })
    }

    fn interval(&mut self) -> PResult<Interval> {
        self.expect_sym("[")?;
        let start = self.time()?;
        self.expect_sym(",")?;
        let end = self.time()?;
        self.expect_sym("]")?;
        Ok(Interval { start, end })
    }

    fn time(&mut self) -> PResult<Time> {
        let event = match self.peek().clone() {
            Tok::Event(e) | Tok::Ident(e) => {
                self.bump();
                e
            }
            _ => return self.error(&["event (`'G`)"]),
        };
        let offset = if self.eat_sym("+") {
            self.expr()?
        } else {
            Expr::Nat(0)
        };
        Ok(Time { event, offset })
    }

    fn cmp_list(&mut self) -> PResult<Vec<Cmp>> {
        let mut out = self.cmp_chain()?;
        while self.eat_sym(",") {
            out.extend(self.cmp_chain()?);
        }
        Ok(out)
    }

    fn cmp_conj(&mut self) -> PResult<Vec<Cmp>> {
        let mut out = self.cmp_chain()?;
        while self.eat_sym("&&") {
            out.extend(self.cmp_chain()?);
        }
        Ok(out)
    }

    /// `a >= b > c` is sugar for `a >= b, b > c`.
    fn cmp_chain(&mut self) -> PResult<Vec<Cmp>> {
        let mut lhs = self.expr()?;
        let mut out = Vec::new();
        while let Some(op) = self.cmp_op() {
            let rhs = self.expr()?;
            out.push(Cmp::new(lhs, op, rhs.clone()));
            lhs = rhs;
        }
        if out.is_empty() {
            return self.error(&["comparison operator"]);
        }
        Ok(out)
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => crate::expr::BinOp::Add,
                Tok::Sym("-") => crate::expr::BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => crate::expr::BinOp::Mul,
                Tok::Sym("/") => crate::expr::BinOp::Div,
                Tok::Sym("%") => crate::expr::BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.atom()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Nat(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat_sym("::") {
                    let param = self.ident()?;
                    return Ok(Expr::Var(alloc::format!("{name}::{param}")));
                }
                if self.at_sym("(") {
                    let span = self.span();
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError {
                            span,
                            message: alloc::format!("unknown function `{name}`"),
                            expected: vec!["pow2".into(), "log2".into(), "bit_rev".into()],
                        });
                    };
                    self.bump();
                    let args = self.comma_list(")", Parser::expr)?;
                    if args.len() != func.arity() {
                        return Err(ParseError {
                            span,
                            message: alloc::format!(
                                "`{name}` takes {} argument(s), found {}",
                                func.arity(),
                                args.len()
                            ),
                            expected: Vec::new(),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                Ok(Expr::Var(name))
            }
            _ => self.error(&["number", "identifier", "`(`"]),
        }
    }

    fn block(&mut self) -> PResult<Vec<Command>> {
        self.expect_sym("{")?;
        let mut cmds = Vec::new();
        loop {
            while self.eat_sym(";") {}
            if self.eat_sym("}") {
                return Ok(cmds);
            }
            self.command(&mut cmds)?;
        }
    }

    fn command(&mut self, out: &mut Vec<Command>) -> PResult<()> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Ident(kw) if kw == "bundle" => {
                self.bump();
                CommandKind::Bundle(self.port_def()?)
            }
            Tok::Ident(kw) if kw == "for" => {
                self.bump();
                let var = self.ident()?;
                self.expect_kw("in")?;
                let lo = self.expr()?;
                self.expect_sym("..")?;
                let hi = self.expr()?;
                let body = self.block()?;
                CommandKind::For { var, lo, hi, body }
            }
            Tok::Ident(kw) if kw == "if" => {
                self.bump();
                self.if_rest()?
            }
            Tok::Ident(kw) if kw == "let" && matches!(self.peek_at(2), Tok::Sym("=")) => {
                self.bump();
                let name = self.ident()?;
                self.expect_sym("=")?;
                CommandKind::Let {
                    name,
                    value: self.expr()?,
                }
            }
            Tok::Ident(kw) if kw == "assume" => {
                self.bump();
                CommandKind::Assume(self.cmp_conj()?)
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Sym(":=")) => {
                self.bump();
                self.bump();
                if self.eat_kw("new") {
                    return self.instance(name, span, out);
                }
                let inst = self.ident()?;
                let (events, args) = self.invocation_tail()?;
                CommandKind::Invoke {
                    name,
                    inst,
                    events,
                    args,
                }
            }
            Tok::Ident(param) if matches!(self.peek_at(1), Tok::Sym("<-")) => {
                self.bump();
                self.bump();
                CommandKind::OutAssign {
                    param,
                    value: self.expr()?,
                }
            }
            Tok::Ident(_) => {
                let dst = self.port_ref()?;
                self.expect_sym("=")?;
                let src = self.port_ref()?;
                CommandKind::Connect { dst, src }
            }
            _ => return self.error(&["command"]),
        };
        out.push(Command::new(kind, span));
        Ok(())
    }

    fn if_rest(&mut self) -> PResult<CommandKind> {
        let cond = self.cmp_conj()?;
        let then = self.block()?;
        let mut otherwise = Vec::new();
        if self.eat_kw("else") {
            if self.at_kw("if") {
                let span = self.span();
                self.bump();
                otherwise.push(Command::new(self.if_rest()?, span));
            } else {
                otherwise = self.block()?;
            }
        }
        Ok(CommandKind::If {
            cond,
            then,
            otherwise,
        })
    }

    fn instance(&mut self, name: String, span: Span, out: &mut Vec<Command>) -> PResult<()> {
        let first = self.ident()?;
        let (tool, comp) = if self.eat_sym(".") {
            (Some(first), self.ident()?)
        } else {
            (None, first)
        };
        let args = if self.eat_sym("[") {
            self.comma_list("]", Parser::expr)?
        } else {
            Vec::new()
        };
        let avail = if self.eat_kw("in") {
            Some(self.interval()?)
        } else {
            None
        };
        out.push(Command::new(
            CommandKind::Instance {
                name: name.clone(),
                comp,
                tool,
                args,
                avail,
            },
            span,
        ));
        if self.at_sym("<") {
            // `x := new C<'G>(..)` instantiates and invokes in one step; the
            // instance and the invocation share the name.
            let (events, args) = self.invocation_tail()?;
            out.push(Command::new(
                CommandKind::Invoke {
                    name: name.clone(),
                    inst: name,
                    events,
                    args,
                },
                span,
            ));
        }
        Ok(())
    }

    fn invocation_tail(&mut self) -> PResult<(Vec<Time>, Vec<PortRef>)> {
        self.expect_sym("<")?;
        let events = self.comma_list(">", Parser::time)?;
        self.expect_sym("(")?;
        let args = self.comma_list(")", Parser::port_ref)?;
        Ok((events, args))
    }

    fn port_ref(&mut self) -> PResult<PortRef> {
        if let Tok::Num(n) = *self.peek() {
            self.bump();
            return Ok(PortRef::Const(n));
        }
        let first = self.ident()?;
        let invoc_port = if self.eat_sym(".") {
            Some(self.ident()?)
        } else {
            None
        };
        let mut indices = Vec::new();
        loop {
            let close = if self.eat_sym("[") {
                "]"
            } else if self.eat_sym("{") {
                "}"
            } else {
                break;
            };
            let idx = if self.eat_sym("..") {
                Index::Full
            } else {
                let lo = self.expr()?;
                if self.eat_sym("..") {
                    Index::Range(lo, self.expr()?)
                } else {
                    Index::At(lo)
                }
            };
            self.expect_sym(close)?;
            indices.push(idx);
        }
        Ok(match invoc_port {
            Some(port) => PortRef::InvocOut {
                invoc: first,
                port,
                indices,
            },
            None => PortRef::Local {
                port: first,
                indices,
            },
        })
    }
}

/// Parses one source file.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    Parser { toks, pos: 0 }.program()
}

/// Parses a standalone parameter expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(&["end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_component() {
        let p = parse("comp C<'G:1>() -> () {}").unwrap();
        assert_eq!(p.components.len(), 1);
        let c = &p.components[0];
        assert_eq!(c.sig.name, "C");
        assert!(c.sig.inputs.is_empty() && c.sig.outputs.is_empty());
        assert_eq!(c.body.as_deref(), Some(&[][..]));
    }

    #[test]
    fn syntax_error_reports_position_and_expectations() {
        let err = parse("comp C<'G:1>(a: ['G, 'G+1] 32) -> () {\n  x := \n}").unwrap_err();
        assert_eq!(err.span.line, 3);
        assert!(!err.expected.is_empty());
    }

    #[test]
    fn chained_comparisons_split() {
        let p = parse(
            "ext comp B[W]<'G: II>(a: ['G, 'G+II] W) -> (o: ['G+L, 'G+L+1] W) \
             with { some II, L where L >= II > 0; };",
        )
        .unwrap();
        let sig = &p.components[0].sig;
        assert_eq!(sig.out_params, ["II", "L"]);
        assert_eq!(sig.out_constraints.len(), 2);
        assert_eq!(sig.out_constraints[1].to_string(), "II > 0");
    }

    #[test]
    fn brace_and_bracket_indices_agree() {
        let a = parse("comp C<'G:1>() -> () { out{i}{..} = inp{i*2}{0..2} }").unwrap();
        let b = parse("comp C<'G:1>() -> () { out[i][..] = inp[i*2][0..2]; }").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn untick_event_in_interval() {
        let p = parse("comp S[N]<'G:1>(in: [G, G+1] 32) -> (out: [G+N, G+N+1] 32) {}").unwrap();
        let live = p.components[0].sig.outputs[0].live.as_ref().unwrap();
        assert_eq!(live.to_string(), "['G+N, 'G+N+1]");
    }

    #[test]
    fn combined_new_and_invoke() {
        let p = parse("comp C<'G:1>() -> () { m := new Mux[32]<'G+2>(a, b) }").unwrap();
        let body = p.components[0].body.as_ref().unwrap();
        assert_eq!(body.len(), 2);
        assert!(matches!(&body[1].kind, CommandKind::Invoke { inst, .. } if inst == "m"));
    }

    #[test]
    fn function_arity_checked() {
        assert!(parse_expr("bit_rev(j)").is_err());
        assert!(parse_expr("pow2(Stages)").is_ok());
    }
}
