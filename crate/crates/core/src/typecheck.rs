// SPDX-License-Identifier: Apache-2.0

//! Symbolic type checking.
//!
//! Each component is walked once. Every timing rule becomes an
//! [`Obligation`] guarded by the path condition at that point, and the
//! obligations are discharged against the facts in scope.
//!
//! Symbols: parameters keep their names, loop indices become fresh
//! constants, and a child's output parameter `P` becomes `X::P` for the
//! instance `X` (`X#2::P` when another instance with the same name was
//! declared elsewhere in the component).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::expr::{BinOp, Cmp, Expr, Func, Prop};
use crate::ir::*;
use crate::order::topo_order;
use crate::solver::{discharge, Backend, Category, Obligation, Verdict};

/// Which facts an obligation may assume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactSet {
    /// Where clauses and the component's own output constraints.
    Signature,
    /// Where clauses, children's output constraints, `assume`s and the
    /// component's own output-parameter assignments.
    Body,
}

/// Obligations and facts of one component, before discharge.
#[derive(Clone, Debug, Default)]
pub struct Generated {
    pub component: String,
    pub sig_facts: Vec<Prop>,
    pub body_facts: Vec<Prop>,
    pub obligations: Vec<(Obligation, FactSet)>,
    /// `assume`d facts, trusted without proof.
    pub trusted: Vec<(Span, Prop)>,
    /// Structural errors that stop checking (dependency cycles).
    pub errors: Vec<(Span, String)>,
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub component: String,
    pub results: Vec<(Obligation, Verdict)>,
    pub trusted: Vec<(Span, Prop)>,
    pub errors: Vec<(Span, String)>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.results.iter().all(|(_, v)| v.is_proven())
    }

    pub fn failures(&self) -> impl Iterator<Item = &(Obligation, Verdict)> {
        self.results.iter().filter(|(_, v)| !v.is_proven())
    }

    pub fn refuted(&self) -> impl Iterator<Item = &(Obligation, Verdict)> {
        self.results
            .iter()
            .filter(|(_, v)| matches!(v, Verdict::Refuted(_)))
    }

    /// Categories of failed obligations, without duplicates.
    pub fn failed_categories(&self) -> BTreeSet<Category> {
        self.failures().map(|(o, _)| o.category).collect()
    }
}

/// Checks one component.
pub fn check_component(prog: &Program, name: &str, backend: &mut dyn Backend) -> CheckReport {
    let Some(g) = generate(prog, name) else {
        return CheckReport {
            component: name.into(),
            errors: alloc::vec![(Span::default(), format!("unknown component `{name}`"))],
            ..CheckReport::default()
        };
    };
    discharge_all(g, backend)
}

/// Checks every component in program order.
pub fn check_program(prog: &Program, backend: &mut dyn Backend) -> Vec<CheckReport> {
    prog.components
        .iter()
        .map(|c| check_component(prog, &c.sig.name, backend))
        .collect()
}

pub fn discharge_all(g: Generated, backend: &mut dyn Backend) -> CheckReport {
    let results = g
        .obligations
        .into_iter()
        .map(|(o, set)| {
            let facts = match set {
                FactSet::Signature => &g.sig_facts,
                FactSet::Body => &g.body_facts,
            };
            let v = discharge(backend, &o, facts);
            (o, v)
        })
        .collect();
    CheckReport {
        component: g.component,
        results,
        trusted: g.trusted,
        errors: g.errors,
    }
}

/// Generates the obligations of one component without discharging them.
pub fn generate(prog: &Program, name: &str) -> Option<Generated> {
    let comp = prog.get(name)?;
    let mut c = Checker {
        prog,
        sig: &comp.sig,
        out: Generated {
            component: name.into(),
            ..Generated::default()
        },
        seen: BTreeSet::new(),
        used: BTreeSet::new(),
        insts: Vec::new(),
        invs: Vec::new(),
        scoped: BTreeMap::new(),
        base: BTreeMap::new(),
    };
    c.signature();
    if let Some(body) = &comp.body {
        c.body(body);
    }
    Some(c.out)
}

/// A port or bundle type in symbol space. Index variables are `@0`, `@1`..
#[derive(Clone, Debug)]
struct Wire {
    dims: Vec<Expr>,
    live: Option<Interval>,
    width: Expr,
}

/// A port access: remaining free dimensions as `(base, len)` and the
/// element type with free positions written `#f0`, `#f1`..
#[derive(Clone, Debug)]
struct Access {
    free: Vec<(Expr, Expr)>,
    live: Option<Interval>,
    width: Option<Expr>,
}

#[derive(Clone, Debug)]
struct Inst {
    name: String,
    comp: String,
    sigma: BTreeMap<String, Expr>,
    avail: Option<Interval>,
    pc: Prop,
    loops: Vec<String>,
    span: Span,
    invokes: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Inv {
    name: String,
    inst: usize,
    times: BTreeMap<String, Time>,
    pc: Prop,
    loops: Vec<String>,
    span: Span,
}

#[derive(Clone, Default)]
struct Env {
    values: BTreeMap<String, Expr>,
    insts: BTreeMap<String, usize>,
    invs: BTreeMap<String, usize>,
    bundles: BTreeMap<String, Wire>,
    pc: Vec<Prop>,
    loops: Vec<String>,
}

impl Env {
    fn pc(&self) -> Prop {
        Prop::all(self.pc.iter().cloned())
    }
}

struct Checker<'p> {
    prog: &'p Program,
    sig: &'p Signature,
    out: Generated,
    seen: BTreeSet<(Category, Prop, Prop)>,
    used: BTreeSet<String>,
    insts: Vec<Inst>,
    invs: Vec<Inv>,
    /// loop symbol -> symbols created inside that loop
    scoped: BTreeMap<String, BTreeSet<String>>,
    /// Signature-level name -> symbol-space expression.
    base: BTreeMap<String, Expr>,
}

fn rename_index_vars(def: &PortDef) -> BTreeMap<String, Expr> {
    def.index_vars
        .iter()
        .enumerate()
        .filter(|(_, v)| *v != "_")
        .map(|(k, v)| (v.clone(), Expr::var(format!("@{k}"))))
        .collect()
}

fn wire_of(def: &PortDef, map: &BTreeMap<String, Expr>) -> Wire {
    let mut inner = map.clone();
    for v in &def.index_vars {
        inner.remove(v);
    }
    inner.extend(rename_index_vars(def));
    Wire {
        dims: def.dims.iter().map(|d| d.subst(map)).collect(),
        live: def.live.as_ref().map(|l| l.subst(&inner)),
        width: def.width.subst(map),
    }
}

/// Moves a child interval onto the parent timeline.
fn retime(iv: &Interval, times: &BTreeMap<String, Time>) -> Interval {
    let shift = |t: &Time| match times.get(&t.event) {
        Some(base) => Time::new(base.event.clone(), base.offset.clone() + t.offset.clone()),
        None => t.clone(),
    };
    Interval::new(shift(&iv.start), shift(&iv.end))
}

fn simplify(e: &Expr) -> Expr {
    e.normalize().unwrap_or_else(|_| e.clone())
}

fn cmp_prop(c: &Cmp, map: &BTreeMap<String, Expr>) -> Prop {
    Prop::Cmp(c.subst(map))
}

impl<'p> Checker<'p> {
    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 2;
        while self.used.contains(&name) {
            name = format!("{base}#{n}");
            n += 1;
        }
        self.used.insert(name.clone());
        name
    }

    fn note_symbol(&mut self, sym: &str, env: &Env) {
        for l in &env.loops {
            self.scoped
                .entry(l.clone())
                .or_default()
                .insert(sym.to_string());
        }
    }

    fn oblige(&mut self, cat: Category, pc: Prop, goal: Prop, span: Span, note: String, set: FactSet) {
        if goal == Prop::True || pc == Prop::False {
            return;
        }
        if !self.seen.insert((cat, pc.clone(), goal.clone())) {
            return;
        }
        self.out
            .obligations
            .push((Obligation::new(cat, pc, goal, span).with_note(note), set));
    }

    fn body_ob(&mut self, cat: Category, env: &Env, goal: Prop, span: Span, note: String) {
        self.oblige(cat, env.pc(), goal, span, note, FactSet::Body);
    }

    /// Non-negative subtraction and definedness of `e`.
    fn side(&mut self, e: &Expr, pc: &Prop, span: Span, set: FactSet) {
        let mut goals = Vec::new();
        e.walk(&mut |sub| match sub {
            Expr::Bin(BinOp::Sub, a, b) => goals.push((
                Category::NonnegSubtraction,
                Prop::ge((**a).clone(), (**b).clone()),
                format!("`{sub}` must not be negative"),
            )),
            Expr::Bin(BinOp::Div | BinOp::Mod, _, b) => goals.push((
                Category::DefinedExpression,
                Prop::ne((**b).clone(), Expr::Nat(0)),
                format!("divisor of `{sub}` must be non-zero"),
            )),
            Expr::Call(Func::Log2, args) => goals.push((
                Category::DefinedExpression,
                Prop::ge(args[0].clone(), Expr::Nat(1)),
                format!("argument of `{sub}` must be positive"),
            )),
            _ => {}
        });
        for (cat, goal, note) in goals {
            if goal.free_vars().is_empty() && goal.eval(&Default::default()) == Ok(true) {
                continue;
            }
            self.oblige(cat, pc.clone(), goal, span, note, set);
        }
    }

    fn side_interval(&mut self, iv: &Interval, pc: &Prop, span: Span, set: FactSet) {
        self.side(&iv.start.offset, pc, span, set);
        self.side(&iv.end.offset, pc, span, set);
    }

    fn delay_of(&self, event: &str) -> Expr {
        self.sig
            .event(event)
            .map(|e| e.delay.subst(&self.base))
            .unwrap_or(Expr::Nat(0))
    }

    fn signature(&mut self) {
        let sig = self.sig;
        for p in &sig.params {
            self.used.insert(p.name.clone());
            self.base.insert(p.name.clone(), Expr::var(&p.name));
        }
        for o in &sig.out_params {
            self.used.insert(o.clone());
            self.base.insert(o.clone(), Expr::var(o));
        }
        for (name, value) in &sig.lets {
            let v = value.subst(&self.base);
            self.base.insert(name.clone(), v);
        }
        let wheres: Vec<Prop> = sig
            .where_clauses
            .iter()
            .map(|c| cmp_prop(c, &self.base))
            .collect();
        let outs: Vec<Prop> = sig
            .out_constraints
            .iter()
            .map(|c| cmp_prop(c, &self.base))
            .collect();
        self.out.sig_facts = wheres.iter().chain(&outs).cloned().collect();
        self.out.body_facts = wheres;
        let span = sig.span;
        for (_, value) in &sig.lets {
            let v = value.subst(&self.base);
            self.side(&v, &Prop::True, span, FactSet::Signature);
        }
        for p in &sig.params {
            if let Some(d) = &p.default {
                let d = d.subst(&self.base);
                self.side(&d, &Prop::True, span, FactSet::Signature);
            }
        }
        for e in &sig.events {
            let d = e.delay.subst(&self.base);
            self.side(&d, &Prop::True, span, FactSet::Signature);
            self.oblige(
                Category::WellFormedInterval,
                Prop::True,
                Prop::ge(d.clone(), Expr::Nat(1)),
                span,
                format!("delay of event '{} must be positive", e.name),
                FactSet::Signature,
            );
        }
        for port in sig.inputs.iter().chain(&sig.outputs) {
            let w = wire_of(port, &self.base);
            let pc = Prop::all(
                w.dims
                    .iter()
                    .enumerate()
                    .map(|(k, d)| Prop::lt(Expr::var(format!("@{k}")), d.clone())),
            );
            for d in &w.dims {
                self.side(d, &Prop::True, port.span, FactSet::Signature);
            }
            self.side(&w.width, &Prop::True, port.span, FactSet::Signature);
            if let Some(live) = &w.live {
                self.side_interval(live, &pc, port.span, FactSet::Signature);
                self.oblige(
                    Category::WellFormedInterval,
                    pc,
                    Prop::lt(live.start.offset.clone(), live.end.offset.clone()),
                    port.span,
                    format!("interval of `{}` must be non-empty: {live}", port.name),
                    FactSet::Signature,
                );
            }
        }
    }

    fn body(&mut self, body: &[Command]) {
        let mut env = Env {
            values: self.base.clone(),
            ..Env::default()
        };
        // The body sees output parameters only through their assignments.
        for o in &self.sig.out_params {
            env.values.remove(o);
        }
        self.block(body, &mut env);
        self.finish_instances();
        self.out_param_completeness(body);
    }

    fn block(&mut self, cmds: &[Command], env: &mut Env) {
        let order = match topo_order(cmds) {
            Ok(o) => o,
            Err(e) => {
                self.out.errors.push((e.span, e.to_string()));
                (0..cmds.len()).collect()
            }
        };
        for i in order {
            self.command(&cmds[i], env);
        }
    }

    fn command(&mut self, cmd: &Command, env: &mut Env) {
        let span = cmd.span;
        match &cmd.kind {
            CommandKind::Let { name, value } => {
                let v = value.subst(&env.values);
                self.side(&v, &env.pc(), span, FactSet::Body);
                env.values.insert(name.clone(), v);
            }
            CommandKind::Assume(cs) => {
                let pc = env.pc();
                for c in cs {
                    let p = cmp_prop(c, &env.values);
                    let fact = Prop::implies(pc.clone(), p.clone());
                    self.out.body_facts.push(fact);
                    self.out.trusted.push((span, p));
                }
            }
            CommandKind::OutAssign { param, value } => {
                let v = value.subst(&env.values);
                let pc = env.pc();
                self.side(&v, &pc, span, FactSet::Body);
                self.out.body_facts.push(Prop::implies(
                    pc.clone(),
                    Prop::eq(Expr::var(param), v.clone()),
                ));
                for c in &self.sig.out_constraints {
                    let mut vars = BTreeSet::new();
                    c.collect_vars(&mut vars);
                    if !vars.contains(param) {
                        continue;
                    }
                    let goal = cmp_prop(c, &self.base);
                    self.oblige(
                        Category::OutparamConstraint,
                        pc.clone(),
                        goal,
                        span,
                        format!("`{param} <- {value}` must satisfy `{c}`"),
                        FactSet::Body,
                    );
                }
            }
            CommandKind::Bundle(def) => {
                let w = wire_of(def, &env.values);
                let mut pc = env.pc.clone();
                for (k, d) in w.dims.iter().enumerate() {
                    self.side(d, &env.pc(), span, FactSet::Body);
                    pc.push(Prop::lt(Expr::var(format!("@{k}")), d.clone()));
                }
                if let Some(live) = &w.live {
                    let pc = Prop::all(pc);
                    self.side_interval(live, &pc, span, FactSet::Body);
                    self.oblige(
                        Category::WellFormedInterval,
                        pc,
                        Prop::lt(live.start.offset.clone(), live.end.offset.clone()),
                        span,
                        format!("interval of bundle `{}` must be non-empty: {live}", def.name),
                        FactSet::Body,
                    );
                }
                env.bundles.insert(def.name.clone(), w);
            }
            CommandKind::For { var, lo, hi, body } => {
                let lo = lo.subst(&env.values);
                let hi = hi.subst(&env.values);
                self.side(&lo, &env.pc(), span, FactSet::Body);
                self.side(&hi, &env.pc(), span, FactSet::Body);
                let sym = self.fresh(var);
                self.note_symbol(&sym, env);
                let mut inner = env.clone();
                inner.values.insert(var.clone(), Expr::var(&sym));
                inner.pc.push(Prop::le(lo, Expr::var(&sym)));
                inner.pc.push(Prop::lt(Expr::var(&sym), hi));
                inner.loops.push(sym);
                self.block(body, &mut inner);
            }
            CommandKind::If {
                cond,
                then,
                otherwise,
            } => {
                let c = Prop::all(cond.iter().map(|c| cmp_prop(c, &env.values)));
                let pc = env.pc();
                let mut exprs = Vec::new();
                c.for_each_expr(&mut |e| exprs.push(e.clone()));
                for e in exprs {
                    self.side(&e, &pc, span, FactSet::Body);
                }
                let mut t = env.clone();
                t.pc.push(c.clone());
                self.block(then, &mut t);
                let mut f = env.clone();
                f.pc.push(c.negate());
                self.block(otherwise, &mut f);
            }
            CommandKind::Instance {
                name,
                comp,
                args,
                avail,
                ..
            } => self.instance(name, comp, args, avail.as_ref(), span, env),
            CommandKind::Invoke {
                name,
                inst,
                events,
                args,
            } => self.invoke(name, inst, events, args, span, env),
            CommandKind::Connect { dst, src } => {
                let (Some(d), Some(s)) = (self.access(dst, env, span), self.access(src, env, span))
                else {
                    return;
                };
                let what = format!(
                    "`{} = {}`",
                    crate::emit::print_port_ref(dst),
                    crate::emit::print_port_ref(src)
                );
                self.flow(d, s, env, span, &what);
            }
        }
    }

    fn instance(
        &mut self,
        name: &str,
        comp: &str,
        args: &[Expr],
        avail: Option<&Interval>,
        span: Span,
        env: &mut Env,
    ) {
        let Some(child) = self.prog.get(comp) else {
            return;
        };
        let child = &child.sig;
        let pc = env.pc();
        let prefix = self.fresh(name);
        let mut sigma = BTreeMap::new();
        for (k, p) in child.params.iter().enumerate() {
            let v = match args.get(k) {
                Some(a) => a.subst(&env.values),
                None => p
                    .default
                    .as_ref()
                    .map(|d| d.subst(&sigma))
                    .unwrap_or(Expr::Nat(0)),
            };
            self.side(&v, &pc, span, FactSet::Body);
            sigma.insert(p.name.clone(), v);
        }
        for (n, value) in &child.lets {
            let v = value.subst(&sigma);
            sigma.insert(n.clone(), v);
        }
        for o in &child.out_params {
            let sym = format!("{prefix}::{o}");
            self.note_symbol(&sym, env);
            sigma.insert(o.clone(), Expr::var(&sym));
            env.values.insert(format!("{name}::{o}"), Expr::var(&sym));
        }
        for w in &child.where_clauses {
            self.body_ob(
                Category::WhereClause,
                env,
                cmp_prop(w, &sigma),
                span,
                format!("`{name} := new {comp}[..]` requires `{w}`"),
            );
        }
        for c in &child.out_constraints {
            self.out
                .body_facts
                .push(Prop::implies(pc.clone(), cmp_prop(c, &sigma)));
        }
        let avail = avail.map(|a| a.subst(&env.values));
        if let Some(a) = &avail {
            self.side_interval(a, &pc, span, FactSet::Body);
            self.body_ob(
                Category::WellFormedInterval,
                env,
                Prop::lt(a.start.offset.clone(), a.end.offset.clone()),
                span,
                format!("availability {a} of `{name}` must be non-empty"),
            );
            let delay = self.delay_of(&a.start.event);
            self.body_ob(
                Category::DelayPipelining,
                env,
                Prop::le(a.end.offset.clone(), a.start.offset.clone() + delay.clone()),
                span,
                format!(
                    "instance `{name}` is available in {a} but event '{} has delay {}; \
                     event's delay must be greater than availability",
                    a.start.event,
                    simplify(&delay)
                ),
            );
        }
        let idx = self.insts.len();
        self.insts.push(Inst {
            name: name.into(),
            comp: comp.into(),
            sigma,
            avail,
            pc,
            loops: env.loops.clone(),
            span,
            invokes: Vec::new(),
        });
        env.insts.insert(name.into(), idx);
    }

    fn invoke(
        &mut self,
        name: &str,
        inst: &str,
        events: &[Time],
        args: &[PortRef],
        span: Span,
        env: &mut Env,
    ) {
        let Some(&ii) = env.insts.get(inst) else {
            return;
        };
        let Some(child) = self.prog.get(&self.insts[ii].comp) else {
            return;
        };
        let child = &child.sig;
        let pc = env.pc();
        let mut times = BTreeMap::new();
        for (ev, t) in child.events.iter().zip(events) {
            let t = t.subst(&env.values);
            self.side(&t.offset, &pc, span, FactSet::Body);
            times.insert(ev.name.clone(), t);
        }
        let sigma = self.insts[ii].sigma.clone();
        // Pipelining: the parent must not accept inputs faster than the child.
        for ev in &child.events {
            let Some(t) = times.get(&ev.name) else {
                continue;
            };
            let d_child = ev.delay.subst(&sigma);
            let d_parent = self.delay_of(&t.event);
            self.body_ob(
                Category::DelayPipelining,
                env,
                Prop::ge(d_parent.clone(), d_child.clone()),
                span,
                format!(
                    "`{}` accepts inputs every {} cycle(s) but '{} accepts inputs every {} cycle(s); \
                     cannot safely pipeline `{name}`",
                    child.name,
                    simplify(&d_child),
                    t.event,
                    simplify(&d_parent)
                ),
            );
        }
        for (port, arg) in child.timed_inputs().zip(args) {
            let mut w = wire_of(port, &sigma);
            w.live = w.live.map(|l| retime(&l, &times));
            let dst = self.whole(&w);
            let Some(src) = self.access(arg, env, span) else {
                continue;
            };
            let what = format!(
                "argument `{}` of `{name}` for `{}.{}`",
                crate::emit::print_port_ref(arg),
                child.name,
                port.name
            );
            self.flow(dst, src, env, span, &what);
        }
        let idx = self.invs.len();
        self.invs.push(Inv {
            name: name.into(),
            inst: ii,
            times,
            pc,
            loops: env.loops.clone(),
            span,
        });
        self.insts[ii].invokes.push(idx);
        env.invs.insert(name.into(), idx);
    }

    fn whole(&self, w: &Wire) -> Access {
        let mut map = BTreeMap::new();
        for k in 0..w.dims.len() {
            map.insert(format!("@{k}"), Expr::var(format!("#f{k}")));
        }
        Access {
            free: w.dims.iter().map(|d| (Expr::Nat(0), d.clone())).collect(),
            live: w.live.as_ref().map(|l| l.subst(&map)),
            width: Some(w.width.clone()),
        }
    }

    fn wire(&self, r: &PortRef, env: &Env) -> Option<Wire> {
        match r {
            PortRef::Const(_) => None,
            PortRef::Local { port, .. } => {
                if let Some(w) = env.bundles.get(port) {
                    return Some(w.clone());
                }
                let def = self.sig.input(port).or_else(|| self.sig.output(port))?;
                Some(wire_of(def, &self.base))
            }
            PortRef::InvocOut { invoc, port, .. } => {
                let inv = &self.invs[*env.invs.get(invoc)?];
                let inst = &self.insts[inv.inst];
                let child = self.prog.get(&inst.comp)?;
                let def = child.sig.output(port)?;
                let mut w = wire_of(def, &inst.sigma);
                w.live = w.live.map(|l| retime(&l, &inv.times));
                Some(w)
            }
        }
    }

    fn access(&mut self, r: &PortRef, env: &Env, span: Span) -> Option<Access> {
        if let PortRef::Const(_) = r {
            return Some(Access {
                free: Vec::new(),
                live: None,
                width: None,
            });
        }
        let w = self.wire(r, env)?;
        let mut map = BTreeMap::new();
        let mut free = Vec::new();
        let indices = r.indices();
        let name = crate::emit::print_port_ref(r);
        for (k, dim) in w.dims.iter().enumerate() {
            let slot = format!("@{k}");
            match indices.get(k).unwrap_or(&Index::Full) {
                Index::At(e) => {
                    let e = e.subst(&env.values);
                    self.side(&e, &env.pc(), span, FactSet::Body);
                    self.body_ob(
                        Category::BundleSize,
                        env,
                        Prop::lt(e.clone(), dim.clone()),
                        span,
                        format!("index {} of `{name}` out of bounds (size {})", simplify(&e), simplify(dim)),
                    );
                    map.insert(slot, e);
                }
                Index::Range(lo, hi) => {
                    let lo = lo.subst(&env.values);
                    let hi = hi.subst(&env.values);
                    self.side(&lo, &env.pc(), span, FactSet::Body);
                    self.side(&hi, &env.pc(), span, FactSet::Body);
                    self.body_ob(
                        Category::BundleSize,
                        env,
                        Prop::all([Prop::le(lo.clone(), hi.clone()), Prop::le(hi.clone(), dim.clone())]),
                        span,
                        format!("range {}..{} of `{name}` out of bounds (size {})", simplify(&lo), simplify(&hi), simplify(dim)),
                    );
                    let f = Expr::var(format!("#f{}", free.len()));
                    map.insert(slot, lo.clone() + f);
                    free.push((lo.clone(), hi - lo));
                }
                Index::Full => {
                    map.insert(slot, Expr::var(format!("#f{}", free.len())));
                    free.push((Expr::Nat(0), dim.clone()));
                }
            }
        }
        Some(Access {
            free,
            live: w.live.map(|l| l.subst(&map)),
            width: Some(w.width),
        })
    }

    /// `dst` is driven by `src`: shapes and widths agree and every element
    /// of `src` is available whenever `dst` requires it.
    fn flow(&mut self, dst: Access, src: Access, env: &Env, span: Span, what: &str) {
        let Some(src_width) = &src.width else {
            return;
        };
        if dst.free.len() != src.free.len() {
            self.body_ob(
                Category::BundleSize,
                env,
                Prop::False,
                span,
                format!(
                    "{what}: {} dimension(s) flow into {}",
                    src.free.len(),
                    dst.free.len()
                ),
            );
            return;
        }
        for ((_, ld), (_, ls)) in dst.free.iter().zip(&src.free) {
            if simplify(ld) != simplify(ls) {
                self.body_ob(
                    Category::BundleSize,
                    env,
                    Prop::eq(ld.clone(), ls.clone()),
                    span,
                    format!("{what}: size {} does not match {}", simplify(ls), simplify(ld)),
                );
            }
        }
        if let Some(dw) = &dst.width {
            if simplify(dw) != simplify(src_width) {
                self.body_ob(
                    Category::WidthMatch,
                    env,
                    Prop::eq(dw.clone(), src_width.clone()),
                    span,
                    format!("{what}: width {} does not match {}", simplify(src_width), simplify(dw)),
                );
            }
        }
        let (Some(need), Some(have)) = (dst.live, src.live) else {
            return;
        };
        let mut pc = env.pc.clone();
        let mut map = BTreeMap::new();
        for (k, (_, len)) in dst.free.iter().enumerate() {
            let sym = self.fresh("k");
            pc.push(Prop::lt(Expr::var(&sym), len.clone()));
            map.insert(format!("#f{k}"), Expr::var(sym));
        }
        let need = need.subst(&map);
        let have = have.subst(&map);
        let goal = if need.start.event != have.start.event {
            Prop::False
        } else {
            Prop::all([
                Prop::le(have.start.offset.clone(), need.start.offset.clone()),
                Prop::le(need.end.offset.clone(), have.end.offset.clone()),
            ])
        };
        let show = |iv: &Interval| {
            Interval::new(
                Time::new(iv.start.event.clone(), simplify(&iv.start.offset)),
                Time::new(iv.end.event.clone(), simplify(&iv.end.offset)),
            )
        };
        self.oblige(
            Category::IntervalAvailability,
            Prop::all(pc),
            goal,
            span,
            format!(
                "{what}: signal available in interval {} but required in {}",
                show(&have),
                show(&need)
            ),
            FactSet::Body,
        );
    }

    /// Symbols of `inv` that vary across iterations of loops deeper than
    /// the instance, primed.
    fn priming(&self, inst: &Inst, inv: &Inv) -> BTreeMap<String, Expr> {
        let mut map = BTreeMap::new();
        for l in &inv.loops[inst.loops.len().min(inv.loops.len())..] {
            map.insert(l.clone(), Expr::var(format!("{l}'")));
            for s in self.scoped.get(l).into_iter().flatten() {
                map.insert(s.clone(), Expr::var(format!("{s}'")));
            }
        }
        map
    }

    fn primed_facts(&self, rho: &BTreeMap<String, Expr>) -> Vec<Prop> {
        self.out
            .body_facts
            .iter()
            .filter(|f| f.free_vars().iter().any(|v| rho.contains_key(v)))
            .map(|f| f.subst(rho))
            .collect()
    }

    fn finish_instances(&mut self) {
        for ii in 0..self.insts.len() {
            let inst = self.insts[ii].clone();
            let Some(child) = self.prog.get(&inst.comp) else {
                continue;
            };
            let child = &child.sig;
            let invs: Vec<Inv> = inst.invokes.iter().map(|&i| self.invs[i].clone()).collect();
            if invs.is_empty() {
                continue;
            }
            let deeper = invs.iter().any(|v| v.loops.len() > inst.loops.len());
            let avail = match &inst.avail {
                Some(a) => Some(a.clone()),
                None => self.infer_avail(&inst, &invs, child, deeper),
            };
            if let Some(avail) = &avail {
                for inv in &invs {
                    for ev in &child.events {
                        let Some(t) = inv.times.get(&ev.name) else {
                            continue;
                        };
                        let d = ev.delay.subst(&inst.sigma);
                        let end = t.offset.clone() + d;
                        let goal = if t.event != avail.start.event {
                            Prop::False
                        } else {
                            Prop::all([
                                Prop::le(avail.start.offset.clone(), t.offset.clone()),
                                Prop::le(end.clone(), avail.end.offset.clone()),
                            ])
                        };
                        self.oblige(
                            Category::InstanceAvailability,
                            inv.pc.clone(),
                            goal,
                            inv.span,
                            format!(
                                "invocation `{}` uses `{}` in [{t}, '{}+{}] outside its availability {avail}",
                                inv.name,
                                inst.name,
                                t.event,
                                simplify(&end)
                            ),
                            FactSet::Body,
                        );
                    }
                }
            }
            self.conflicts(&inst, &invs, child);
        }
    }

    fn infer_avail(&mut self, inst: &Inst, invs: &[Inv], child: &Signature, deeper: bool) -> Option<Interval> {
        let ev = child.events.first()?;
        let d = simplify(&ev.delay.subst(&inst.sigma));
        if invs.len() == 1 && !deeper {
            let t = invs[0].times.get(&ev.name)?;
            return Some(Interval::new(t.clone(), t.plus(d)));
        }
        let mut lo: Option<u64> = None;
        let mut hi: Option<u64> = None;
        let mut event: Option<&str> = None;
        let mut ground = !deeper && d.as_nat().is_some();
        for inv in invs {
            let Some(t) = inv.times.get(&ev.name) else {
                ground = false;
                break;
            };
            let off = simplify(&t.offset).as_nat();
            match off {
                Some(o) if event.is_none_or(|e| e == t.event) => {
                    event = Some(&t.event);
                    lo = Some(lo.map_or(o, |l| l.min(o)));
                    hi = Some(hi.map_or(o, |h| h.max(o)));
                }
                _ => {
                    ground = false;
                    break;
                }
            }
        }
        if ground {
            let (event, lo, hi, d) = (event?.to_string(), lo?, hi?, d.as_nat()?);
            let a = Interval::new(Time::new(event.clone(), lo), Time::new(event.clone(), hi + d));
            let delay = self.delay_of(&event);
            self.oblige(
                Category::DelayPipelining,
                inst.pc.clone(),
                Prop::le(Expr::Nat(hi + d - lo), delay.clone()),
                inst.span,
                format!(
                    "instance `{}` is used in {a} ({} cycles) but event '{event} has delay {}",
                    inst.name,
                    hi + d - lo,
                    simplify(&delay)
                ),
                FactSet::Body,
            );
            return Some(a);
        }
        self.oblige(
            Category::InstanceAvailability,
            inst.pc.clone(),
            Prop::False,
            inst.span,
            format!(
                "cannot infer an availability interval for `{}`; annotate it with `in ['G, 'G+n]`",
                inst.name
            ),
            FactSet::Body,
        );
        None
    }

    fn conflicts(&mut self, inst: &Inst, invs: &[Inv], child: &Signature) {
        for (a_i, a) in invs.iter().enumerate() {
            for b in &invs[a_i..] {
                let same = a.name == b.name && a.span == b.span;
                let deeper_a = &a.loops[inst.loops.len().min(a.loops.len())..];
                if same && deeper_a.is_empty() {
                    continue;
                }
                let rho = self.priming(inst, b);
                let mut pc = alloc::vec![a.pc.clone(), b.pc.subst(&rho)];
                pc.extend(self.primed_facts(&rho));
                if same {
                    pc.push(Prop::any(
                        deeper_a
                            .iter()
                            .map(|l| Prop::ne(Expr::var(l), Expr::var(format!("{l}'")))),
                    ));
                }
                for ev in &child.events {
                    let (Some(ta), Some(tb)) = (a.times.get(&ev.name), b.times.get(&ev.name)) else {
                        continue;
                    };
                    let tb = tb.subst(&rho);
                    let d = ev.delay.subst(&inst.sigma);
                    let goal = if ta.event != tb.event {
                        Prop::False
                    } else {
                        Prop::any([
                            Prop::le(ta.offset.clone() + d.clone(), tb.offset.clone()),
                            Prop::le(tb.offset.clone() + d.clone(), ta.offset.clone()),
                        ])
                    };
                    let note = if same {
                        format!(
                            "iterations of `{}` conflict on `{}`: delay requires uses to be {} cycles apart",
                            a.name,
                            inst.name,
                            simplify(&d)
                        )
                    } else {
                        format!(
                            "`{}` at {} and `{}` at {} conflict on `{}`: delay requires uses to be {} cycles apart",
                            a.name,
                            Time::new(ta.event.clone(), simplify(&ta.offset)),
                            b.name,
                            Time::new(tb.event.clone(), simplify(&tb.offset)),
                            inst.name,
                            simplify(&d)
                        )
                    };
                    self.oblige(
                        Category::InstanceConflict,
                        Prop::all(pc.clone()),
                        goal,
                        b.span,
                        note,
                        FactSet::Body,
                    );
                }
            }
        }
    }

    fn out_param_completeness(&mut self, body: &[Command]) {
        let mut errors = Vec::new();
        let counts = count_assigns(body, false, &mut errors);
        for p in &self.sig.out_params {
            match counts.get(p).copied().unwrap_or(0) {
                1 => {}
                0 => errors.push((self.sig.span, format!("output parameter `{p}` is never assigned"))),
                n => errors.push((
                    self.sig.span,
                    format!("output parameter `{p}` is assigned {n} times on one path"),
                )),
            }
        }
        for (span, note) in errors {
            self.oblige(
                Category::OutparamConstraint,
                Prop::True,
                Prop::False,
                span,
                note,
                FactSet::Body,
            );
        }
    }
}

/// Assignments per output parameter along every path through `cmds`.
fn count_assigns(
    cmds: &[Command],
    in_loop: bool,
    errors: &mut Vec<(Span, String)>,
) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    for cmd in cmds {
        match &cmd.kind {
            CommandKind::OutAssign { param, .. } => {
                if in_loop {
                    errors.push((
                        cmd.span,
                        format!("output parameter `{param}` is assigned inside a loop"),
                    ));
                }
                *out.entry(param.clone()).or_default() += 1;
            }
            CommandKind::For { body, .. } => {
                count_assigns(body, true, errors);
            }
            CommandKind::If {
                then, otherwise, ..
            } => {
                let t = count_assigns(then, in_loop, errors);
                let f = count_assigns(otherwise, in_loop, errors);
                let keys: BTreeSet<&String> = t.keys().chain(f.keys()).collect();
                for k in keys {
                    let (a, b) = (t.get(k).copied().unwrap_or(0), f.get(k).copied().unwrap_or(0));
                    if a != b {
                        errors.push((
                            cmd.span,
                            format!("output parameter `{k}` is assigned on only some branches"),
                        ));
                    }
                    *out.entry(k.clone()).or_default() += a.max(b);
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::solver::ConcreteBackend;

    const ALU_EXTS: &str = "\
        ext comp Add[W]<'T:1>(left: ['T, 'T+1] W, right: ['T, 'T+1] W) -> (out: ['T, 'T+1] W);\n\
        ext comp Mux[W]<'T:1>(sel: ['T, 'T+1] W, a: ['T, 'T+1] W, b: ['T, 'T+1] W) -> (out: ['T, 'T+1] W);\n\
        ext comp Reg[W]<'T:1>(in: ['T, 'T+1] W) -> (out: ['T+1, 'T+2] W);\n";

    fn check(src: &str, comp: &str) -> CheckReport {
        let p = parse(src).unwrap();
        crate::resolve::resolve(&p).unwrap();
        check_component(&p, comp, &mut ConcreteBackend)
    }

    #[test]
    fn buggy_alu_availability() {
        let src = alloc::format!(
            "{ALU_EXTS}ext comp Mul[W]<'T:1>(left: ['T, 'T+1] W, right: ['T, 'T+1] W) -> (out: ['T+2, 'T+3] W);\n\
             comp ALU<'G:1>(l: ['G, 'G+1] 32, r: ['G, 'G+1] 32, op: ['G, 'G+1] 32) -> (out: ['G+2, 'G+3] 32) {{\n\
               A := new Add[32]; M := new Mul[32];\n\
               add := A<'G>(l, r); mul := M<'G>(l, r);\n\
               mux := new Mux[32]<'G>(op, add.out, mul.out);\n\
               out = mux.out; }}"
        );
        let r = check(&src, "ALU");
        let cats = r.failed_categories();
        assert!(cats.contains(&Category::IntervalAvailability), "{cats:?}");
        let note = &r.failures().next().unwrap().0.note;
        assert!(note.contains("['G+2, 'G+3]") && note.contains("['G, 'G+1]"), "{note}");
    }

    #[test]
    fn sq2_conflict_and_fix() {
        let mul = "ext comp Mul[W]<'T:2>(left: ['T, 'T+1] W, right: ['T, 'T+1] W) -> (out: ['T+2, 'T+3] W);\n";
        let bad = alloc::format!(
            "{mul}comp Sq2<'G:4>(a: ['G, 'G+1] 32, b: ['G, 'G+1] 32) -> (o0: ['G+2, 'G+3] 32, o1: ['G+2, 'G+3] 32) {{\n\
               M := new Mul[32]; ma := M<'G>(a, a); o0 = ma.out; mb := M<'G>(b, b); o1 = mb.out; }}"
        );
        let r = check(&bad, "Sq2");
        assert_eq!(
            r.failed_categories().into_iter().collect::<Vec<_>>(),
            [Category::InstanceConflict]
        );
    }

    #[test]
    fn out_param_unassigned() {
        let r = check("comp C<'G:1>() -> () with { some L; } {}", "C");
        assert!(r.failed_categories().contains(&Category::OutparamConstraint));
    }

    #[test]
    fn exclusive_branches_never_conflict() {
        let src = alloc::format!(
            "{ALU_EXTS}comp C[W]<'G:1>(a: ['G, 'G+1] 32) -> (o: ['G+1, 'G+2] 32) {{\n\
               R := new Reg[32];\n\
               if W < 4 {{ r := R<'G>(a); o = r.out; }} else {{ s := R<'G>(a); o = s.out; }} }}"
        );
        let g = generate(&parse(&src).unwrap(), "C").unwrap();
        let conflict = g
            .obligations
            .iter()
            .find(|(o, _)| o.category == Category::InstanceConflict)
            .unwrap();
        let pc = &conflict.0.path_condition;
        // W < 4 && !(W < 4) is unsatisfiable.
        for w in 0..10 {
            let b = [("W".to_string(), w)].into_iter().collect();
            assert!(!pc.eval(&b).unwrap());
        }
    }
}
