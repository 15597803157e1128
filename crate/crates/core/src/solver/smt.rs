// SPDX-License-Identifier: Apache-2.0

//! SMT-LIB 2 encoding and the incremental query protocol.
//!
//! Parameters are integers constrained to be non-negative. `pow2`, `log2`
//! and `bit_rev` are uninterpreted functions; each query carries the axiom
//! instances for the applications it mentions.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{Backend, Obligation, Verdict};
use crate::expr::{BinOp, Binding, CmpOp, Expr, Func, Prop};

/// Quoted SMT symbol for a parameter name.
pub fn symbol(name: &str) -> String {
    format!("|{name}|")
}

pub fn encode_expr(e: &Expr) -> String {
    match e {
        Expr::Nat(n) => n.to_string(),
        Expr::Var(v) => symbol(v),
        Expr::Bin(op, l, r) => {
            let op = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "div",
                BinOp::Mod => "mod",
            };
            format!("({op} {} {})", encode_expr(l), encode_expr(r))
        }
        Expr::Call(f, args) => {
            let mut s = format!("({}", f.name());
            for a in args {
                s.push(' ');
                s.push_str(&encode_expr(a));
            }
            s.push(')');
            s
        }
    }
}

pub fn encode_prop(p: &Prop) -> String {
    let join = |op: &str, ps: &[Prop]| {
        let mut s = format!("({op}");
        for p in ps {
            s.push(' ');
            s.push_str(&encode_prop(p));
        }
        s.push(')');
        s
    };
    match p {
        Prop::True => "true".into(),
        Prop::False => "false".into(),
        Prop::Cmp(c) => {
            let (l, r) = (encode_expr(&c.lhs), encode_expr(&c.rhs));
            match c.op {
                CmpOp::Lt => format!("(< {l} {r})"),
                CmpOp::Le => format!("(<= {l} {r})"),
                CmpOp::Gt => format!("(> {l} {r})"),
                CmpOp::Ge => format!("(>= {l} {r})"),
                CmpOp::Eq => format!("(= {l} {r})"),
                CmpOp::Ne => format!("(distinct {l} {r})"),
            }
        }
        Prop::Not(p) => format!("(not {})", encode_prop(p)),
        Prop::And(ps) => join("and", ps),
        Prop::Or(ps) => join("or", ps),
        Prop::Implies(a, b) => format!("(=> {} {})", encode_prop(a), encode_prop(b)),
    }
}

/// Commands sent once per session.
pub fn preamble(timeout_ms: u64) -> Vec<String> {
    [
        "(set-option :print-success false)",
        "(set-option :produce-models true)",
        "(set-logic ALL)",
    ]
    .into_iter()
    .map(String::from)
    .chain([
        format!("(set-option :timeout {timeout_ms})"),
        "(declare-fun pow2 (Int) Int)".into(),
        "(declare-fun log2 (Int) Int)".into(),
        "(declare-fun bit_rev (Int Int) Int)".into(),
    ])
    .collect()
}

fn collect_calls(e: &Expr, out: &mut BTreeSet<(Func, Vec<Expr>)>) {
    e.walk(&mut |sub| {
        if let Expr::Call(f, args) = sub {
            out.insert((*f, args.clone()));
        }
    });
}

/// Axiom instances for the builtin applications that occur in `formula`.
pub fn axioms(formula: &Prop) -> Vec<String> {
    let mut calls = BTreeSet::new();
    formula.for_each_expr(&mut |e| collect_calls(e, &mut calls));
    // bit_rev's bound mentions pow2 of its width.
    let extra: Vec<_> = calls
        .iter()
        .filter(|(f, _)| *f == Func::BitRev)
        .map(|(_, a)| (Func::Pow2, alloc::vec![a[1].clone()]))
        .collect();
    calls.extend(extra);
    let pow_args: Vec<Expr> = calls
        .iter()
        .filter(|(f, _)| *f == Func::Pow2)
        .map(|(_, a)| a[0].clone())
        .collect();
    let mut out = Vec::new();
    for a in &pow_args {
        let (x, p) = (encode_expr(a), format!("(pow2 {})", encode_expr(a)));
        out.push(format!("(>= {p} 1)"));
        out.push(format!("(> {p} {x})"));
        out.push(format!("(= (pow2 (+ {x} 1)) (* 2 {p}))"));
        out.push(format!("(=> (>= {x} 1) (= (mod {p} 2) 0))"));
        out.push(format!("(=> (>= {x} 1) (= {p} (* 2 (pow2 (- {x} 1)))))"));
        out.push(format!("(= (log2 {p}) {x})"));
        if let Some(k) = a.as_nat().filter(|k| *k < 63) {
            out.push(format!("(= {p} {})", 1u64 << k));
        }
    }
    out.push("(= (pow2 0) 1)".into());
    for (i, a) in pow_args.iter().enumerate() {
        for b in &pow_args[i + 1..] {
            let (x, y) = (encode_expr(a), encode_expr(b));
            out.push(format!("(=> (< {x} {y}) (< (pow2 {x}) (pow2 {y})))"));
            out.push(format!("(=> (< {y} {x}) (< (pow2 {y}) (pow2 {x})))"));
        }
    }
    for (f, args) in &calls {
        match f {
            Func::Log2 => {
                let x = encode_expr(&args[0]);
                out.push(format!("(>= (log2 {x}) 0)"));
                out.push(format!("(=> (>= {x} 1) (< (log2 {x}) {x}))"));
                out.push(format!("(=> (>= {x} 2) (>= (log2 {x}) 1))"));
                out.push("(= (log2 1) 0)".into());
            }
            Func::BitRev => {
                let (v, w) = (encode_expr(&args[0]), encode_expr(&args[1]));
                out.push(format!("(>= (bit_rev {v} {w}) 0)"));
                out.push(format!("(< (bit_rev {v} {w}) (pow2 {w}))"));
            }
            Func::Pow2 => {}
        }
    }
    out
}

/// The command lines for one query, from `push` to `check-sat`.
pub fn query_commands(assumptions: &[Prop], o: &Obligation) -> (Vec<String>, Vec<String>) {
    let query = o.negated_query(assumptions);
    let vars: Vec<String> = query.free_vars().into_iter().collect();
    let mut cmds = alloc::vec!["(push 1)".to_string()];
    for v in &vars {
        cmds.push(format!("(declare-fun {} () Int)", symbol(v)));
        cmds.push(format!("(assert (>= {} 0))", symbol(v)));
    }
    for ax in axioms(&query) {
        cmds.push(format!("(assert {ax})"));
    }
    for a in assumptions {
        cmds.push(format!("(assert {})", encode_prop(a)));
    }
    cmds.push(format!("(assert {})", encode_prop(&o.path_condition)));
    cmds.push(format!("(assert (not {}))", encode_prop(&o.goal)));
    cmds.push("(check-sat)".into());
    (cmds, vars)
}

/// A parsed s-expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtError(pub String);

impl fmt::Display for SmtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::error::Error for SmtError {}

/// True once `text` holds at least one complete s-expression or atom.
pub fn is_complete(text: &str) -> bool {
    let mut depth = 0i64;
    let mut seen = false;
    let mut quoted = false;
    let mut string = false;
    for c in text.chars() {
        match c {
            '|' if !string => quoted = !quoted,
            '"' if !quoted => string = !string,
            '(' if !quoted && !string => {
                depth += 1;
                seen = true;
            }
            ')' if !quoted && !string => depth -= 1,
            c if !c.is_whitespace() => seen = true,
            _ => {}
        }
    }
    seen && depth <= 0 && !quoted && !string
}

pub fn parse_sexpr(text: &str) -> Result<SExpr, SmtError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let e = parse_at(&chars, &mut pos)?;
    Ok(e)
}

fn parse_at(chars: &[char], pos: &mut usize) -> Result<SExpr, SmtError> {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
    match chars.get(*pos) {
        None => Err(SmtError("unexpected end of solver output".into())),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                while *pos < chars.len() && chars[*pos].is_whitespace() {
                    *pos += 1;
                }
                match chars.get(*pos) {
                    None => return Err(SmtError("unbalanced solver output".into())),
                    Some(')') => {
                        *pos += 1;
                        return Ok(SExpr::List(items));
                    }
                    _ => items.push(parse_at(chars, pos)?),
                }
            }
        }
        Some(')') => Err(SmtError("unexpected `)` in solver output".into())),
        Some('|') => {
            let start = *pos + 1;
            *pos = start;
            while *pos < chars.len() && chars[*pos] != '|' {
                *pos += 1;
            }
            let s: String = chars[start..(*pos).min(chars.len())].iter().collect();
            *pos += 1;
            Ok(SExpr::Atom(s))
        }
        Some('"') => {
            let start = *pos;
            *pos += 1;
            while *pos < chars.len() && chars[*pos] != '"' {
                *pos += 1;
            }
            *pos += 1;
            Ok(SExpr::Atom(chars[start..(*pos).min(chars.len())].iter().collect()))
        }
        Some(_) => {
            let start = *pos;
            while *pos < chars.len() && !chars[*pos].is_whitespace() && !"()".contains(chars[*pos])
            {
                *pos += 1;
            }
            Ok(SExpr::Atom(chars[start..*pos].iter().collect()))
        }
    }
}

fn sexpr_nat(e: &SExpr) -> Result<u64, SmtError> {
    match e {
        SExpr::Atom(a) => a
            .parse::<u64>()
            .map_err(|_| SmtError(format!("non-natural model value `{a}`"))),
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(op), _] if op == "-" => {
                Err(SmtError("negative model value".into()))
            }
            _ => Err(SmtError(format!("unsupported model value {e:?}"))),
        },
    }
}

/// Parses the reply to `(get-value (...))`.
pub fn parse_model(text: &str) -> Result<Binding, SmtError> {
    let SExpr::List(pairs) = parse_sexpr(text)? else {
        return Err(SmtError(format!("malformed model: {text}")));
    };
    let mut out = Binding::new();
    for pair in pairs {
        match pair {
            SExpr::List(kv) if kv.len() == 2 => {
                let SExpr::Atom(name) = &kv[0] else {
                    return Err(SmtError(format!("malformed model entry: {text}")));
                };
                out.insert(name.clone(), sexpr_nat(&kv[1])?);
            }
            _ => return Err(SmtError(format!("malformed model entry: {text}"))),
        }
    }
    Ok(out)
}

/// Transport to a running solver.
pub trait SmtIo {
    fn send(&mut self, line: &str) -> Result<(), SmtError>;
    /// Reads one complete response.
    fn read(&mut self) -> Result<String, SmtError>;
    /// Discards the current process and starts a fresh one.
    fn restart(&mut self) -> Result<(), SmtError>;
}

/// Incremental SMT backend: one session, one `push`/`pop` scope per query.
pub struct SmtBackend<T: SmtIo> {
    io: T,
    timeout_ms: u64,
    started: bool,
}

impl<T: SmtIo> SmtBackend<T> {
    pub fn new(io: T, timeout_ms: u64) -> SmtBackend<T> {
        SmtBackend {
            io,
            timeout_ms,
            started: false,
        }
    }

    pub fn io(&mut self) -> &mut T {
        &mut self.io
    }

    fn run(&mut self, assumptions: &[Prop], o: &Obligation) -> Result<Verdict, SmtError> {
        if !self.started {
            for line in preamble(self.timeout_ms) {
                self.io.send(&line)?;
            }
            self.started = true;
        }
        let (cmds, vars) = query_commands(assumptions, o);
        for c in &cmds {
            self.io.send(c)?;
        }
        let answer = self.io.read()?;
        let verdict = match answer.trim() {
            "unsat" => Verdict::Proven,
            "sat" => {
                let names: Vec<String> = vars.iter().map(|v| symbol(v)).collect();
                self.io
                    .send(&format!("(get-value ({}))", names.join(" ")))?;
                let model = if names.is_empty() {
                    Binding::new()
                } else {
                    parse_model(&self.io.read()?)?
                };
                Verdict::Refuted(model)
            }
            "unknown" => {
                self.io.send("(get-info :reason-unknown)")?;
                let reason = self.io.read().unwrap_or_default();
                Verdict::Unknown(format!("solver returned unknown {}", reason.trim()))
            }
            other => return Err(SmtError(format!("unexpected solver reply: {other}"))),
        };
        self.io.send("(pop 1)")?;
        Ok(verdict)
    }
}

impl<T: SmtIo> Backend for SmtBackend<T> {
    fn check(&mut self, assumptions: &[Prop], o: &Obligation) -> Verdict {
        match self.run(assumptions, o) {
            Ok(v) => v,
            Err(e) => {
                self.started = false;
                let restarted = self.io.restart();
                let suffix = match restarted {
                    Ok(()) => String::new(),
                    Err(r) => format!("; restart failed: {r}"),
                };
                Verdict::Unknown(format!("solver failure: {e}{suffix}"))
            }
        }
    }

    fn name(&self) -> &str {
        "smt"
    }
}
