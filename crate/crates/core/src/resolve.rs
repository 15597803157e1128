// SPDX-License-Identifier: Apache-2.0

//! Name resolution and arity checking.
//!
//! Names defined in a block (instances, invocations, bundles, lets) are
//! visible in the whole block and its nested blocks, so commands may appear
//! in any order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Cmp, Expr};
use crate::ir::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SymbolKind {
    InputParam,
    Let,
    OutputParam,
    Event,
    Port,
    Bundle,
    Instance,
    Invocation,
    LoopVar,
    IndexVar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolveErrorKind {
    Unbound,
    Duplicate,
    Arity,
    /// `P <- e` where `P` is not an output parameter of the component.
    OutAssign,
    Malformed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolveError {
    pub span: Span,
    pub component: String,
    pub kind: ResolveErrorKind,
    pub message: String,
}

impl fmt::Display for ResolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: in `{}`: {}", self.span, self.component, self.message)
    }
}

impl core::error::Error for ResolveError {}

/// Classifies every name a signature introduces.
pub fn signature_symbols(sig: &Signature) -> BTreeMap<String, SymbolKind> {
    let mut out = BTreeMap::new();
    for p in &sig.params {
        out.insert(p.name.clone(), SymbolKind::InputParam);
    }
    for (name, _) in &sig.lets {
        out.insert(name.clone(), SymbolKind::Let);
    }
    for name in &sig.out_params {
        out.insert(name.clone(), SymbolKind::OutputParam);
    }
    for e in &sig.events {
        out.insert(format!("'{}", e.name), SymbolKind::Event);
    }
    for p in sig.inputs.iter().chain(&sig.outputs) {
        out.insert(p.name.clone(), SymbolKind::Port);
    }
    out
}

/// Checks the whole program; returns every error found, in source order.
pub fn resolve(p: &Program) -> Result<(), Vec<ResolveError>> {
    let mut r = Resolver {
        prog: p,
        comp: String::new(),
        errors: Vec::new(),
    };
    r.program();
    if r.errors.is_empty() {
        Ok(())
    } else {
        Err(r.errors)
    }
}

struct Resolver<'a> {
    prog: &'a Program,
    comp: String,
    errors: Vec<ResolveError>,
}

/// Names visible at one point of a body.
#[derive(Clone, Default)]
struct Scope {
    values: BTreeSet<String>,
    /// instance -> component name
    instances: BTreeMap<String, String>,
    /// invocation -> instance
    invocations: BTreeMap<String, String>,
    /// bundle -> dims
    bundles: BTreeMap<String, usize>,
}

impl<'a> Resolver<'a> {
    fn err(&mut self, span: Span, kind: ResolveErrorKind, message: String) {
        self.errors.push(ResolveError {
            span,
            component: self.comp.clone(),
            kind,
            message,
        });
    }

    fn program(&mut self) {
        let mut aliases = BTreeSet::new();
        for imp in &self.prog.imports {
            if !aliases.insert(imp.alias.as_str()) {
                self.err(
                    imp.span,
                    ResolveErrorKind::Duplicate,
                    format!("duplicate import alias `{}`", imp.alias),
                );
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.prog.components {
            self.comp = c.sig.name.clone();
            if !names.insert(c.sig.name.as_str()) {
                self.err(
                    c.sig.span,
                    ResolveErrorKind::Duplicate,
                    format!("duplicate component `{}`", c.sig.name),
                );
            }
            if let SigKind::Generated { tool } = &c.sig.kind {
                if !aliases.contains(tool.as_str()) {
                    self.err(
                        c.sig.span,
                        ResolveErrorKind::Unbound,
                        format!("unknown generator `{tool}`; add `import gen \"...\" as {tool};`"),
                    );
                }
            }
            self.signature(&c.sig);
            if let Some(body) = &c.body {
                let scope = Scope {
                    values: c
                        .sig
                        .params
                        .iter()
                        .map(|p| p.name.clone())
                        .chain(c.sig.lets.iter().map(|(n, _)| n.clone()))
                        .collect(),
                    ..Scope::default()
                };
                self.block(&c.sig, body, &scope);
            }
        }
    }

    fn check_expr(&mut self, e: &Expr, scope: &BTreeSet<String>, span: Span, what: &str) {
        for v in e.free_vars() {
            if !scope.contains(&v) {
                self.err(
                    span,
                    ResolveErrorKind::Unbound,
                    format!("unbound identifier `{v}` in {what}"),
                );
            }
        }
    }

    fn check_cmps(&mut self, cs: &[Cmp], scope: &BTreeSet<String>, span: Span, what: &str) {
        for c in cs {
            self.check_expr(&c.lhs, scope, span, what);
            self.check_expr(&c.rhs, scope, span, what);
        }
    }

    fn check_interval(
        &mut self,
        iv: &Interval,
        events: &[EventDef],
        scope: &BTreeSet<String>,
        span: Span,
    ) {
        for t in [&iv.start, &iv.end] {
            if !events.iter().any(|e| e.name == t.event) {
                self.err(
                    span,
                    ResolveErrorKind::Unbound,
                    format!("unbound event `'{}`", t.event),
                );
            }
            self.check_expr(&t.offset, scope, span, "interval");
        }
        if iv.start.event != iv.end.event {
            self.err(
                span,
                ResolveErrorKind::Malformed,
                format!(
                    "interval {iv} mixes events `'{}` and `'{}`",
                    iv.start.event, iv.end.event
                ),
            );
        }
    }

    fn signature(&mut self, sig: &Signature) {
        let span = sig.span;
        let mut scope = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut dup = |r: &mut Self, name: &str| {
            if !seen.insert(name.to_string()) {
                r.err(
                    span,
                    ResolveErrorKind::Duplicate,
                    format!("`{name}` is defined more than once"),
                );
            }
        };
        for p in &sig.params {
            dup(self, &p.name);
            if let Some(d) = &p.default {
                self.check_expr(d, &scope, span, "parameter default");
            }
            scope.insert(p.name.clone());
        }
        for (name, value) in &sig.lets {
            dup(self, name);
            self.check_expr(value, &scope, span, "let binding");
            scope.insert(name.clone());
        }
        self.check_cmps(&sig.where_clauses, &scope, span, "where clause");
        for name in &sig.out_params {
            dup(self, name);
            scope.insert(name.clone());
        }
        self.check_cmps(&sig.out_constraints, &scope, span, "output constraint");
        let mut events = BTreeSet::new();
        for e in &sig.events {
            if !events.insert(e.name.as_str()) {
                self.err(
                    span,
                    ResolveErrorKind::Duplicate,
                    format!("event `'{}` is defined more than once", e.name),
                );
            }
            self.check_expr(&e.delay, &scope, span, "event delay");
        }
        let mut ports = BTreeSet::new();
        for p in sig.inputs.iter().chain(&sig.outputs) {
            if !ports.insert(p.name.as_str()) {
                self.err(
                    p.span,
                    ResolveErrorKind::Duplicate,
                    format!("port `{}` is defined more than once", p.name),
                );
            }
            self.port_def(p, &sig.events, &scope);
        }
    }

    fn port_def(&mut self, p: &PortDef, events: &[EventDef], scope: &BTreeSet<String>) {
        if p.index_vars.len() != p.dims.len() {
            self.err(
                p.span,
                ResolveErrorKind::Arity,
                format!(
                    "`{}` has {} dimension(s) but binds {} index variable(s)",
                    p.name,
                    p.dims.len(),
                    p.index_vars.len()
                ),
            );
        }
        for d in &p.dims {
            self.check_expr(d, scope, p.span, "bundle size");
        }
        let mut inner = scope.clone();
        inner.extend(p.index_vars.iter().filter(|v| *v != "_").cloned());
        if let Some(live) = &p.live {
            self.check_interval(live, events, &inner, p.span);
        }
        self.check_expr(&p.width, scope, p.span, "port width");
    }

    /// Values defined directly in a block.
    fn collect_defs(&mut self, sig: &Signature, cmds: &[Command], outer: &Scope) -> Scope {
        let mut scope = outer.clone();
        let mut local = BTreeSet::new();
        for cmd in cmds {
            let (name, table) = match &cmd.kind {
                CommandKind::Instance { name, comp, .. } => {
                    scope.instances.insert(name.clone(), comp.clone());
                    (name, "instance")
                }
                CommandKind::Invoke { name, inst, .. } => {
                    scope.invocations.insert(name.clone(), inst.clone());
                    (name, "invocation")
                }
                CommandKind::Bundle(def) => {
                    if sig.input(&def.name).is_some() || sig.output(&def.name).is_some() {
                        self.err(
                            cmd.span,
                            ResolveErrorKind::Duplicate,
                            format!("bundle `{}` shadows a port", def.name),
                        );
                    }
                    scope.bundles.insert(def.name.clone(), def.dims.len());
                    (&def.name, "wire")
                }
                CommandKind::Let { name, .. } => {
                    scope.values.insert(name.clone());
                    (name, "value")
                }
                _ => continue,
            };
            let shadow = match table {
                "instance" => outer.instances.contains_key(name),
                "invocation" => outer.invocations.contains_key(name),
                "wire" => outer.bundles.contains_key(name),
                _ => outer.values.contains(name) || sig.out_params.contains(name),
            };
            if shadow || !local.insert((table, name.clone())) {
                self.err(
                    cmd.span,
                    ResolveErrorKind::Duplicate,
                    format!("`{name}` is defined more than once"),
                );
            }
        }
        scope
    }

    fn value_scope(&self, scope: &Scope) -> BTreeSet<String> {
        let mut vals = scope.values.clone();
        for (inst, comp) in &scope.instances {
            if let Some(c) = self.prog.get(comp) {
                for p in &c.sig.out_params {
                    vals.insert(format!("{inst}::{p}"));
                }
            }
        }
        vals
    }

    fn block(&mut self, sig: &Signature, cmds: &[Command], outer: &Scope) {
        let scope = self.collect_defs(sig, cmds, outer);
        let vals = self.value_scope(&scope);
        for cmd in cmds {
            let span = cmd.span;
            match &cmd.kind {
                CommandKind::Instance {
                    comp,
                    tool,
                    args,
                    avail,
                    ..
                } => {
                    for a in args {
                        self.check_expr(a, &vals, span, "instance argument");
                    }
                    if let Some(a) = avail {
                        self.check_interval(a, &sig.events, &vals, span);
                    }
                    self.instance_target(comp, tool.as_deref(), args.len(), span);
                }
                CommandKind::Invoke {
                    inst, events, args, ..
                } => {
                    for t in events {
                        if sig.event(&t.event).is_none() {
                            self.err(
                                span,
                                ResolveErrorKind::Unbound,
                                format!("unbound event `'{}`", t.event),
                            );
                        }
                        self.check_expr(&t.offset, &vals, span, "invocation time");
                    }
                    for a in args {
                        self.port_ref(sig, a, &scope, &vals, span, false);
                    }
                    let Some(comp) = scope.instances.get(inst) else {
                        self.err(
                            span,
                            ResolveErrorKind::Unbound,
                            format!("unbound instance `{inst}`"),
                        );
                        continue;
                    };
                    if let Some(child) = self.prog.get(comp) {
                        let child = &child.sig;
                        if events.len() != child.events.len() {
                            self.err(
                                span,
                                ResolveErrorKind::Arity,
                                format!(
                                    "`{}` takes {} event(s), found {}",
                                    child.name,
                                    child.events.len(),
                                    events.len()
                                ),
                            );
                        }
                        let expected = child.timed_inputs().count();
                        if args.len() != expected {
                            self.err(
                                span,
                                ResolveErrorKind::Arity,
                                format!(
                                    "`{}` takes {expected} input(s), found {}",
                                    child.name,
                                    args.len()
                                ),
                            );
                        }
                    }
                }
                CommandKind::Connect { dst, src } => {
                    self.port_ref(sig, dst, &scope, &vals, span, true);
                    self.port_ref(sig, src, &scope, &vals, span, false);
                }
                CommandKind::Bundle(def) => {
                    if def.live.is_none() {
                        self.err(
                            span,
                            ResolveErrorKind::Malformed,
                            format!("bundle `{}` needs an availability interval", def.name),
                        );
                    }
                    self.port_def(def, &sig.events, &vals);
                }
                CommandKind::For { var, lo, hi, body } => {
                    self.check_expr(lo, &vals, span, "loop bound");
                    self.check_expr(hi, &vals, span, "loop bound");
                    if vals.contains(var) {
                        self.err(
                            span,
                            ResolveErrorKind::Duplicate,
                            format!("loop variable `{var}` shadows an existing name"),
                        );
                    }
                    let mut inner = scope.clone();
                    inner.values.insert(var.clone());
                    self.block(sig, body, &inner);
                }
                CommandKind::If {
                    cond,
                    then,
                    otherwise,
                } => {
                    self.check_cmps(cond, &vals, span, "condition");
                    self.block(sig, then, &scope);
                    self.block(sig, otherwise, &scope);
                }
                CommandKind::Let { value, .. } => {
                    self.check_expr(value, &vals, span, "let binding");
                }
                CommandKind::Assume(cs) => self.check_cmps(cs, &vals, span, "assumption"),
                CommandKind::OutAssign { param, value } => {
                    if !sig.out_params.contains(param) {
                        self.err(
                            span,
                            ResolveErrorKind::OutAssign,
                            format!("`{param}` is not an output parameter of `{}`", sig.name),
                        );
                    }
                    self.check_expr(value, &vals, span, "output parameter assignment");
                }
            }
        }
    }

    fn instance_target(&mut self, comp: &str, tool: Option<&str>, nargs: usize, span: Span) {
        let Some(child) = self.prog.get(comp) else {
            self.err(
                span,
                ResolveErrorKind::Unbound,
                format!("unknown component `{comp}`"),
            );
            return;
        };
        if let Some(t) = tool {
            if !matches!(&child.sig.kind, SigKind::Generated { tool: ct } if ct == t) {
                self.err(
                    span,
                    ResolveErrorKind::Unbound,
                    format!("`{t}` does not generate `{comp}`"),
                );
            }
        }
        let total = child.sig.params.len();
        let required = child
            .sig
            .params
            .iter()
            .rposition(|p| p.default.is_none())
            .map_or(0, |i| i + 1);
        if nargs < required || nargs > total {
            let expected = if required == total {
                format!("{total}")
            } else {
                format!("{required} to {total}")
            };
            self.err(
                span,
                ResolveErrorKind::Arity,
                format!("`{comp}` takes {expected} parameter(s), found {nargs}"),
            );
        }
    }

    fn port_ref(
        &mut self,
        sig: &Signature,
        r: &PortRef,
        scope: &Scope,
        vals: &BTreeSet<String>,
        span: Span,
        is_dst: bool,
    ) {
        r.for_each_expr(&mut |e| {
            for v in e.free_vars() {
                if !vals.contains(&v) {
                    self.errors.push(ResolveError {
                        span,
                        component: self.comp.clone(),
                        kind: ResolveErrorKind::Unbound,
                        message: format!("unbound identifier `{v}` in index"),
                    });
                }
            }
        });
        let dims = match r {
            PortRef::Const(_) => {
                if is_dst {
                    self.err(
                        span,
                        ResolveErrorKind::Malformed,
                        "cannot assign to a constant".into(),
                    );
                }
                return;
            }
            PortRef::Local { port, .. } => {
                if let Some(d) = scope.bundles.get(port) {
                    *d
                } else if let Some(p) = sig.output(port) {
                    p.dims.len()
                } else if let Some(p) = sig.input(port) {
                    if is_dst {
                        self.err(
                            span,
                            ResolveErrorKind::Malformed,
                            format!("cannot assign to input port `{port}`"),
                        );
                    }
                    p.dims.len()
                } else {
                    self.err(
                        span,
                        ResolveErrorKind::Unbound,
                        format!("unbound port `{port}`"),
                    );
                    return;
                }
            }
            PortRef::InvocOut { invoc, port, .. } => {
                if is_dst {
                    self.err(
                        span,
                        ResolveErrorKind::Malformed,
                        format!("cannot assign to invocation output `{invoc}.{port}`"),
                    );
                }
                let Some(inst) = scope.invocations.get(invoc) else {
                    self.err(
                        span,
                        ResolveErrorKind::Unbound,
                        format!("unbound invocation `{invoc}`"),
                    );
                    return;
                };
                let Some(child) = scope.instances.get(inst).and_then(|c| self.prog.get(c)) else {
                    return;
                };
                match child.sig.output(port) {
                    Some(p) => p.dims.len(),
                    None => {
                        self.err(
                            span,
                            ResolveErrorKind::Unbound,
                            format!("`{}` has no output `{port}`", child.sig.name),
                        );
                        return;
                    }
                }
            }
        };
        if r.indices().len() > dims {
            self.err(
                span,
                ResolveErrorKind::Arity,
                format!(
                    "`{}` has {dims} dimension(s) but is indexed {} time(s)",
                    crate::emit::print_port_ref(r),
                    r.indices().len()
                ),
            );
        }
    }
}
