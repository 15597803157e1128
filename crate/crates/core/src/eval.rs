// SPDX-License-Identifier: Apache-2.0

//! Partial evaluation: a parametric component plus a binding becomes a
//! parameter-free component and the values of its output parameters.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Binding, Cmp, EvalError, Expr};
use crate::ir::*;
use crate::order::{topo_order, CycleError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElabErrorKind {
    Eval(EvalError),
    UnknownComponent(String),
    /// Argument count outside what the signature accepts.
    Arity { expected: usize, found: usize },
    WhereViolated(Cmp),
    AssumeViolated(Cmp),
    /// An output-parameter value outside the declared constraints.
    ConstraintViolated(Cmp),
    OutParam(String),
    Cycle(CycleError),
    DepthLimit(usize),
    Gen(String),
    Bundle(String),
    Residual(BTreeSet<String>),
}

/// An elaboration failure with the instantiation chain leading to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElabError {
    pub kind: ElabErrorKind,
    pub component: String,
    pub span: Span,
    /// Outermost first, e.g. `["IterFFT[8, 4]", "Butterfly[32, 8]"]`.
    pub chain: Vec<String>,
}

impl ElabError {
    pub fn new(kind: ElabErrorKind, component: impl Into<String>, span: Span) -> ElabError {
        ElabError {
            kind,
            component: component.into(),
            span,
            chain: Vec::new(),
        }
    }
}

impl fmt::Display for ElabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: in `{}`: ", self.span, self.component)?;
        match &self.kind {
            ElabErrorKind::Eval(e) => write!(f, "{e}")?,
            ElabErrorKind::UnknownComponent(c) => write!(f, "unknown component `{c}`")?,
            ElabErrorKind::Arity { expected, found } => {
                write!(f, "expected {expected} parameter(s), found {found}")?
            }
            ElabErrorKind::WhereViolated(c) => write!(f, "where clause `{c}` does not hold")?,
            ElabErrorKind::AssumeViolated(c) => write!(f, "assumption `{c}` does not hold")?,
            ElabErrorKind::ConstraintViolated(c) => {
                write!(f, "output parameters violate `{c}`")?
            }
            ElabErrorKind::OutParam(m) | ElabErrorKind::Gen(m) | ElabErrorKind::Bundle(m) => {
                f.write_str(m)?
            }
            ElabErrorKind::Cycle(c) => write!(f, "{c}")?,
            ElabErrorKind::DepthLimit(n) => write!(f, "instantiation depth exceeds {n}")?,
            ElabErrorKind::Residual(vars) => {
                let v: Vec<&str> = vars.iter().map(String::as_str).collect();
                write!(f, "parameters left after evaluation: {}", v.join(", "))?
            }
        }
        if !self.chain.is_empty() {
            write!(f, " (instantiated via {})", self.chain.join(" -> "))?;
        }
        Ok(())
    }
}

impl core::error::Error for ElabError {}

/// A concrete child: the name of its parameter-free definition and the
/// values of its output parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unit {
    pub name: String,
    pub outs: Binding,
}

/// Supplies concrete children while a parent is evaluated.
pub trait Instantiate {
    fn instantiate(&mut self, comp: &str, args: &[u64], span: Span) -> Result<Unit, ElabError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluated {
    pub component: Component,
    /// The component's own output parameters.
    pub outs: Binding,
    /// Children's output parameters seen by the body, keyed `inst::P`
    /// with concrete instance names.
    pub injected: Binding,
}

fn eval_err(e: EvalError, comp: &str, span: Span) -> ElabError {
    ElabError::new(ElabErrorKind::Eval(e), comp, span)
}

/// Positional arguments plus defaults and signature `let`s.
pub fn bind_params(sig: &Signature, args: &[u64]) -> Result<Binding, ElabError> {
    let required = sig.params.iter().filter(|p| p.default.is_none()).count();
    if args.len() > sig.params.len() || args.len() < required {
        return Err(ElabError::new(
            ElabErrorKind::Arity {
                expected: sig.params.len(),
                found: args.len(),
            },
            &sig.name,
            sig.span,
        ));
    }
    let mut b = Binding::new();
    for (i, p) in sig.params.iter().enumerate() {
        let v = match (args.get(i), &p.default) {
            (Some(v), _) => *v,
            (None, Some(d)) => d.eval(&b).map_err(|e| eval_err(e, &sig.name, sig.span))?,
            (None, None) => unreachable!("arity checked above"),
        };
        b.insert(p.name.clone(), v);
    }
    for (name, value) in &sig.lets {
        let v = value
            .eval(&b)
            .map_err(|e| eval_err(e, &sig.name, sig.span))?;
        b.insert(name.clone(), v);
    }
    Ok(b)
}

/// Like [`bind_params`] with arguments given by name. Returns the
/// positional argument list and the full binding.
pub fn bind_named(sig: &Signature, named: &Binding) -> Result<(Vec<u64>, Binding), ElabError> {
    for k in named.keys() {
        if !sig.has_param(k) {
            return Err(ElabError::new(
                ElabErrorKind::Eval(EvalError::Unbound(k.clone())),
                &sig.name,
                sig.span,
            ));
        }
    }
    let mut b = Binding::new();
    let mut args = Vec::new();
    for p in &sig.params {
        let v = match (named.get(&p.name), &p.default) {
            (Some(v), _) => *v,
            (None, Some(d)) => d.eval(&b).map_err(|e| eval_err(e, &sig.name, sig.span))?,
            (None, None) => {
                return Err(eval_err(
                    EvalError::Unbound(p.name.clone()),
                    &sig.name,
                    sig.span,
                ))
            }
        };
        b.insert(p.name.clone(), v);
        args.push(v);
    }
    let full = bind_params(sig, &args)?;
    Ok((args, full))
}

/// Checks the where clauses of `sig` under `binding`.
pub fn check_where(sig: &Signature, binding: &Binding, span: Span) -> Result<(), ElabError> {
    for w in &sig.where_clauses {
        let ok = w.eval(binding).map_err(|e| eval_err(e, &sig.name, span))?;
        if !ok {
            return Err(ElabError::new(
                ElabErrorKind::WhereViolated(w.clone()),
                &sig.name,
                span,
            ));
        }
    }
    Ok(())
}

/// Checks output-parameter constraints of `sig` under `binding`.
pub fn check_out_constraints(sig: &Signature, binding: &Binding) -> Result<(), ElabError> {
    for c in &sig.out_constraints {
        let ok = c
            .eval(binding)
            .map_err(|e| eval_err(e, &sig.name, sig.span))?;
        if !ok {
            return Err(ElabError::new(
                ElabErrorKind::ConstraintViolated(c.clone()),
                &sig.name,
                sig.span,
            ));
        }
    }
    Ok(())
}

fn nat_map(b: &Binding) -> BTreeMap<String, Expr> {
    b.iter().map(|(k, v)| (k.clone(), Expr::Nat(*v))).collect()
}

fn close(e: &Expr, b: &Binding, comp: &str, span: Span) -> Result<Expr, ElabError> {
    e.eval(b).map(Expr::Nat).map_err(|e| eval_err(e, comp, span))
}

/// Substitutes `b` into a port type; index variables stay symbolic.
fn concrete_port(def: &PortDef, b: &Binding, comp: &str) -> Result<PortDef, ElabError> {
    let mut inner = b.clone();
    for v in &def.index_vars {
        inner.remove(v);
    }
    let map = nat_map(&inner);
    let norm = |e: &Expr| {
        e.subst(&map)
            .normalize()
            .map_err(|e| eval_err(e, comp, def.span))
    };
    Ok(PortDef {
        name: def.name.clone(),
        dims: def
            .dims
            .iter()
            .map(|d| close(d, b, comp, def.span))
            .collect::<Result<_, _>>()?,
        index_vars: def.index_vars.clone(),
        live: match &def.live {
            Some(l) => Some(Interval::new(
                Time::new(l.start.event.clone(), norm(&l.start.offset)?),
                Time::new(l.end.event.clone(), norm(&l.end.offset)?),
            )),
            None => None,
        },
        width: close(&def.width, b, comp, def.span)?,
        span: def.span,
    })
}

/// The signature with every parameter, `let` and output parameter replaced
/// by its value under `binding`.
pub fn concrete_signature(
    sig: &Signature,
    binding: &Binding,
    name: &str,
) -> Result<Signature, ElabError> {
    let comp = sig.name.as_str();
    Ok(Signature {
        name: name.into(),
        params: Vec::new(),
        events: sig
            .events
            .iter()
            .map(|e| {
                Ok(EventDef {
                    name: e.name.clone(),
                    delay: close(&e.delay, binding, comp, sig.span)?,
                })
            })
            .collect::<Result<_, ElabError>>()?,
        inputs: sig
            .inputs
            .iter()
            .map(|p| concrete_port(p, binding, comp))
            .collect::<Result<_, _>>()?,
        outputs: sig
            .outputs
            .iter()
            .map(|p| concrete_port(p, binding, comp))
            .collect::<Result<_, _>>()?,
        lets: Vec::new(),
        out_params: Vec::new(),
        out_constraints: Vec::new(),
        where_clauses: Vec::new(),
        kind: sig.kind.clone(),
        span: sig.span,
    })
}

/// Variables left in a component other than bundle index variables.
pub fn residual_vars(c: &Component) -> BTreeSet<String> {
    fn port(def: &PortDef, out: &mut BTreeSet<String>) {
        let mut vars = BTreeSet::new();
        def.for_each_expr(&mut |e| e.collect_vars(&mut vars));
        for v in vars {
            if !def.index_vars.contains(&v) {
                out.insert(v);
            }
        }
    }
    fn block(cmds: &[Command], out: &mut BTreeSet<String>) {
        for c in cmds {
            match &c.kind {
                CommandKind::Bundle(def) => port(def, out),
                _ => c.for_each_expr(&mut |e| e.collect_vars(out)),
            }
            let kids: Vec<Command> = c.children().cloned().collect();
            block(&kids, out);
        }
    }
    let mut out = BTreeSet::new();
    for p in c.sig.inputs.iter().chain(&c.sig.outputs) {
        port(p, &mut out);
    }
    for e in &c.sig.events {
        e.delay.collect_vars(&mut out);
    }
    if let Some(body) = &c.body {
        block(body, &mut out);
    }
    out
}

#[derive(Clone, Default)]
struct Scope {
    vals: Binding,
    names: BTreeMap<String, String>,
    suffix: String,
}

impl Scope {
    fn name(&self, n: &str) -> String {
        self.names.get(n).cloned().unwrap_or_else(|| n.to_string())
    }

    fn define(&mut self, n: &str) -> String {
        let full = format!("{n}{}", self.suffix);
        self.names.insert(n.to_string(), full.clone());
        full
    }
}

struct Ev<'a> {
    sig: &'a Signature,
    inst: &'a mut dyn Instantiate,
    out: Vec<Command>,
    outs: Binding,
    injected: Binding,
}

/// Evaluates `name[args]` into a parameter-free component called `mangled`.
pub fn eval_component(
    prog: &Program,
    name: &str,
    args: &[u64],
    mangled: &str,
    inst: &mut dyn Instantiate,
) -> Result<Evaluated, ElabError> {
    let comp = prog.get(name).ok_or_else(|| {
        ElabError::new(
            ElabErrorKind::UnknownComponent(name.into()),
            name,
            Span::default(),
        )
    })?;
    let sig = &comp.sig;
    let binding = bind_params(sig, args)?;
    check_where(sig, &binding, sig.span)?;
    let mut ev = Ev {
        sig,
        inst,
        out: Vec::new(),
        outs: Binding::new(),
        injected: Binding::new(),
    };
    let mut scope = Scope {
        vals: binding.clone(),
        ..Scope::default()
    };
    if let Some(body) = &comp.body {
        ev.block(body, &mut scope)?;
    }
    for p in &sig.out_params {
        if !ev.outs.contains_key(p) {
            return Err(ElabError::new(
                ElabErrorKind::OutParam(format!("output parameter `{p}` is never assigned")),
                name,
                sig.span,
            ));
        }
    }
    let mut full = binding;
    full.extend(ev.outs.clone());
    check_out_constraints(sig, &full)?;
    let component = Component {
        sig: concrete_signature(sig, &full, mangled)?,
        body: comp.body.as_ref().map(|_| core::mem::take(&mut ev.out)),
    };
    let residual = residual_vars(&component);
    if !residual.is_empty() {
        return Err(ElabError::new(
            ElabErrorKind::Residual(residual),
            name,
            sig.span,
        ));
    }
    Ok(Evaluated {
        component,
        outs: ev.outs,
        injected: ev.injected,
    })
}

impl Ev<'_> {
    fn err(&self, kind: ElabErrorKind, span: Span) -> ElabError {
        ElabError::new(kind, &self.sig.name, span)
    }

    fn nat(&self, e: &Expr, s: &Scope, span: Span) -> Result<u64, ElabError> {
        e.eval(&s.vals)
            .map_err(|e| self.err(ElabErrorKind::Eval(e), span))
    }

    fn cond(&self, cs: &[Cmp], s: &Scope, span: Span) -> Result<Option<Cmp>, ElabError> {
        for c in cs {
            let ok = c
                .eval(&s.vals)
                .map_err(|e| self.err(ElabErrorKind::Eval(e), span))?;
            if !ok {
                return Ok(Some(c.clone()));
            }
        }
        Ok(None)
    }

    fn time(&self, t: &Time, s: &Scope, span: Span) -> Result<Time, ElabError> {
        Ok(Time::new(t.event.clone(), self.nat(&t.offset, s, span)?))
    }

    fn port_ref(&self, r: &PortRef, s: &Scope, span: Span) -> Result<PortRef, ElabError> {
        let idx = |ix: &[Index]| -> Result<Vec<Index>, ElabError> {
            ix.iter()
                .map(|i| {
                    Ok(match i {
                        Index::At(e) => Index::At(Expr::Nat(self.nat(e, s, span)?)),
                        Index::Range(lo, hi) => Index::Range(
                            Expr::Nat(self.nat(lo, s, span)?),
                            Expr::Nat(self.nat(hi, s, span)?),
                        ),
                        Index::Full => Index::Full,
                    })
                })
                .collect()
        };
        Ok(match r {
            PortRef::Const(n) => PortRef::Const(*n),
            PortRef::Local { port, indices } => PortRef::Local {
                port: s.name(port),
                indices: idx(indices)?,
            },
            PortRef::InvocOut {
                invoc,
                port,
                indices,
            } => PortRef::InvocOut {
                invoc: s.name(invoc),
                port: port.clone(),
                indices: idx(indices)?,
            },
        })
    }

    fn block(&mut self, cmds: &[Command], s: &mut Scope) -> Result<(), ElabError> {
        let order = topo_order(cmds).map_err(|c| {
            let span = c.span;
            self.err(ElabErrorKind::Cycle(c), span)
        })?;
        for i in order {
            self.command(&cmds[i], s)?;
        }
        Ok(())
    }

    fn command(&mut self, cmd: &Command, s: &mut Scope) -> Result<(), ElabError> {
        let span = cmd.span;
        let kind = match &cmd.kind {
            CommandKind::Let { name, value } => {
                let v = self.nat(value, s, span)?;
                s.vals.insert(name.clone(), v);
                return Ok(());
            }
            CommandKind::Assume(cs) => {
                if let Some(c) = self.cond(cs, s, span)? {
                    return Err(self.err(ElabErrorKind::AssumeViolated(c), span));
                }
                return Ok(());
            }
            CommandKind::OutAssign { param, value } => {
                let v = self.nat(value, s, span)?;
                if self.outs.insert(param.clone(), v).is_some() {
                    return Err(self.err(
                        ElabErrorKind::OutParam(format!(
                            "output parameter `{param}` is assigned more than once"
                        )),
                        span,
                    ));
                }
                return Ok(());
            }
            CommandKind::For { var, lo, hi, body } => {
                let (lo, hi) = (self.nat(lo, s, span)?, self.nat(hi, s, span)?);
                for i in lo..hi {
                    let mut inner = s.clone();
                    inner.vals.insert(var.clone(), i);
                    inner.suffix = format!("{}_{i}", s.suffix);
                    self.block(body, &mut inner)?;
                }
                return Ok(());
            }
            CommandKind::If {
                cond,
                then,
                otherwise,
            } => {
                let branch = if self.cond(cond, s, span)?.is_none() {
                    then
                } else {
                    otherwise
                };
                let mut inner = s.clone();
                return self.block(branch, &mut inner);
            }
            CommandKind::Instance {
                name,
                comp,
                args,
                avail,
                ..
            } => {
                let vals = args
                    .iter()
                    .map(|a| self.nat(a, s, span))
                    .collect::<Result<Vec<_>, _>>()?;
                let unit = self.inst.instantiate(comp, &vals, span)?;
                let full = s.define(name);
                for (p, v) in &unit.outs {
                    s.vals.insert(format!("{name}::{p}"), *v);
                    self.injected.insert(format!("{full}::{p}"), *v);
                }
                let avail = match avail {
                    Some(a) => Some(Interval::new(
                        self.time(&a.start, s, span)?,
                        self.time(&a.end, s, span)?,
                    )),
                    None => None,
                };
                CommandKind::Instance {
                    name: full,
                    comp: unit.name,
                    tool: None,
                    args: Vec::new(),
                    avail,
                }
            }
            CommandKind::Invoke {
                name,
                inst,
                events,
                args,
            } => {
                let inst = s.name(inst);
                let events = events
                    .iter()
                    .map(|t| self.time(t, s, span))
                    .collect::<Result<_, _>>()?;
                let args = args
                    .iter()
                    .map(|a| self.port_ref(a, s, span))
                    .collect::<Result<_, _>>()?;
                CommandKind::Invoke {
                    name: s.define(name),
                    inst,
                    events,
                    args,
                }
            }
            CommandKind::Connect { dst, src } => CommandKind::Connect {
                dst: self.port_ref(dst, s, span)?,
                src: self.port_ref(src, s, span)?,
            },
            CommandKind::Bundle(def) => {
                let mut def = concrete_port(def, &s.vals, &self.sig.name)?;
                def.name = s.define(&def.name);
                CommandKind::Bundle(def)
            }
        };
        self.out.push(Command::new(kind, span));
        Ok(())
    }
}

/// Instantiates children by name only, for tests and tools that need the
/// body of one component without elaborating its children. Each child is
/// named `Comp[args]`-style via [`mangle`] and has no output parameters
/// unless listed in `outs`.
pub struct Shallow {
    pub outs: BTreeMap<String, Binding>,
}

impl Instantiate for Shallow {
    fn instantiate(&mut self, comp: &str, args: &[u64], _span: Span) -> Result<Unit, ElabError> {
        Ok(Unit {
            name: mangle(comp, args),
            outs: self.outs.get(comp).cloned().unwrap_or_default(),
        })
    }
}

/// `Shift` with `[32, 3]` becomes `Shift_32_3`.
pub fn mangle(comp: &str, args: &[u64]) -> String {
    let mut s = comp.to_string();
    for a in args {
        s.push('_');
        s.push_str(&a.to_string());
    }
    s
}
