// SPDX-License-Identifier: Apache-2.0

//! Cycle-level simulation of parameter-free programs.
//!
//! Every component is run as a pipeline: the `k`-th set of inputs on an
//! event with delay `D` arrives at cycle `k * D`. Wires are marked valid
//! cycle by cycle from their producers and every consumer's window is
//! checked against them. An instance is held for its availability window
//! (declared, or spanning its invocations) in each iteration and must not
//! be held by two iterations or invocations at the same cycle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Binding, Expr};
use crate::ir::*;
use crate::solver::Category;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimError {
    /// Parameters, control flow or bundles remain.
    NotConcrete { component: String, what: String },
    Horizon { needed: u64, given: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::NotConcrete { component, what } => {
                write!(f, "`{component}` is not concrete: {what}")
            }
            SimError::Horizon { needed, given } => write!(
                f,
                "horizon {given} is too small; this program needs at least {needed} cycles"
            ),
        }
    }
}

impl core::error::Error for SimError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub category: Category,
    pub component: String,
    pub span: Span,
    pub message: String,
    /// First offending cycle window `[start, end)`, relative to the first
    /// iteration's event.
    pub window: Option<(u64, u64)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: in `{}`: {}: {}", self.span, self.component, self.category, self.message)?;
        if let Some((s, e)) = self.window {
            write!(f, " (cycles [{s}, {e}))")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimReport {
    pub horizon: u64,
    pub violations: Vec<Violation>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn failed_categories(&self) -> alloc::collections::BTreeSet<Category> {
        self.violations.iter().map(|v| v.category).collect()
    }

    pub fn for_component<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Violation> + 'a {
        self.violations.iter().filter(move |v| v.component == name)
    }
}

fn nat(e: &Expr, comp: &str) -> Result<u64, SimError> {
    e.eval(&Binding::new()).map_err(|_| SimError::NotConcrete {
        component: comp.into(),
        what: format!("expression `{e}`"),
    })
}

/// A ground interval: `[start, end)` on `event`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Window {
    event: String,
    start: u64,
    end: u64,
}

impl Window {
    fn of(iv: &Interval, comp: &str) -> Result<Window, SimError> {
        Ok(Window {
            event: iv.start.event.clone(),
            start: nat(&iv.start.offset, comp)?,
            end: nat(&iv.end.offset, comp)?,
        })
    }

    fn shifted(&self, event: &str, by: u64) -> Window {
        Window {
            event: event.into(),
            start: self.start + by,
            end: self.end + by,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "['{}+{}, '{}+{}]", self.event, self.start, self.event, self.end)
    }
}

/// Cycles in `[0, horizon)` for one event.
#[derive(Clone)]
struct Cycles {
    event: String,
    bits: Vec<bool>,
}

impl Cycles {
    fn empty(event: &str, horizon: u64) -> Cycles {
        Cycles {
            event: event.into(),
            bits: alloc::vec![false; horizon as usize],
        }
    }

    fn window(s: &Window, horizon: u64) -> Cycles {
        let mut c = Cycles::empty(&s.event, horizon);
        c.mark(s.start, s.end);
        c
    }

    fn mark(&mut self, start: u64, end: u64) {
        for t in start..end.min(self.bits.len() as u64) {
            self.bits[t as usize] = true;
        }
    }

    /// First maximal run of cycles set in `self` but not in `other`.
    fn uncovered_by(&self, other: &Cycles) -> Option<(u64, u64)> {
        let same = self.event == other.event;
        let missing = |t: usize| self.bits[t] && !(same && other.bits[t]);
        let start = (0..self.bits.len()).find(|&t| missing(t))?;
        let end = (start..self.bits.len()).find(|&t| !missing(t)).unwrap_or(self.bits.len());
        Some((start as u64, end as u64))
    }

    /// First maximal run of cycles set in both.
    fn overlap(&self, other: &Cycles) -> Option<(u64, u64)> {
        if self.event != other.event {
            return None;
        }
        let both = |t: usize| self.bits[t] && other.bits[t];
        let start = (0..self.bits.len()).find(|&t| both(t))?;
        let end = (start..self.bits.len()).find(|&t| !both(t)).unwrap_or(self.bits.len());
        Some((start as u64, end as u64))
    }
}

fn ensure_concrete(c: &Component) -> Result<(), SimError> {
    let name = &c.sig.name;
    let bad = |what: String| {
        Err(SimError::NotConcrete {
            component: name.clone(),
            what,
        })
    };
    if !c.sig.params.is_empty() || !c.sig.out_params.is_empty() {
        return bad("it has parameters".into());
    }
    for p in c.sig.inputs.iter().chain(&c.sig.outputs) {
        if p.is_bundle() {
            return bad(format!("port `{}` is a bundle", p.name));
        }
    }
    for cmd in c.body.iter().flatten() {
        let what = match &cmd.kind {
            CommandKind::Instance { .. } | CommandKind::Invoke { .. } | CommandKind::Connect { .. } => continue,
            CommandKind::Bundle(_) => "bundle",
            CommandKind::For { .. } => "for loop",
            CommandKind::If { .. } => "if",
            CommandKind::Let { .. } => "let",
            CommandKind::Assume(_) => "assume",
            CommandKind::OutAssign { .. } => "output-parameter assignment",
        };
        return bad(format!("{} contains a {what}", cmd.span));
    }
    Ok(())
}

/// Smallest horizon [`simulate`] accepts: the latest cycle any interval,
/// retimed to its invocation, can reach plus the largest delay.
pub fn required_horizon(prog: &Program) -> Result<u64, SimError> {
    let mut port_end = 0;
    let mut max_delay = 0;
    for c in &prog.components {
        ensure_concrete(c)?;
        let name = &c.sig.name;
        for e in &c.sig.events {
            max_delay = max_delay.max(nat(&e.delay, name)?);
        }
        for p in c.sig.inputs.iter().chain(&c.sig.outputs) {
            if let Some(l) = &p.live {
                port_end = port_end.max(nat(&l.start.offset, name)?).max(nat(&l.end.offset, name)?);
            }
        }
    }
    let mut max_end = port_end;
    for c in &prog.components {
        let name = &c.sig.name;
        for cmd in c.body.iter().flatten() {
            match &cmd.kind {
                CommandKind::Instance { avail: Some(a), .. } => {
                    max_end = max_end.max(nat(&a.start.offset, name)?).max(nat(&a.end.offset, name)?);
                }
                CommandKind::Invoke { events, .. } => {
                    for t in events {
                        max_end = max_end.max(nat(&t.offset, name)? + port_end);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(max_end + max_delay)
}

struct Sim<'a> {
    prog: &'a Program,
    comp: &'a Component,
    horizon: u64,
    out: Vec<Violation>,
}

/// One scheduled use of an instance in the first iteration.
struct Use {
    inv: String,
    event: String,
    start: u64,
    delay: u64,
    span: Span,
}

impl Sim<'_> {
    fn name(&self) -> String {
        self.comp.sig.name.clone()
    }

    fn report(&mut self, category: Category, span: Span, message: String, window: Option<(u64, u64)>) {
        self.out.push(Violation {
            category,
            component: self.name(),
            span,
            message,
            window,
        });
    }

    fn delay(&self, event: &str) -> u64 {
        self.comp
            .sig
            .event(event)
            .and_then(|e| e.delay.eval(&Binding::new()).ok())
            .unwrap_or(0)
    }

    fn run(&mut self) -> Result<(), SimError> {
        let sig = &self.comp.sig;
        let name = self.name();
        for e in &sig.events {
            if nat(&e.delay, &name)? == 0 {
                self.report(
                    Category::WellFormedInterval,
                    sig.span,
                    format!("event '{} has delay 0", e.name),
                    None,
                );
            }
        }
        // Producers: wire name -> (valid cycles, width).
        let mut wires: BTreeMap<String, (Window, u64)> = BTreeMap::new();
        for p in &sig.inputs {
            if let Some(l) = &p.live {
                let s = Window::of(l, &name)?;
                self.well_formed(&s, p.span, &format!("port `{}`", p.name));
                wires.insert(p.name.clone(), (s, nat(&p.width, &name)?));
            }
        }
        for p in &sig.outputs {
            if let Some(l) = &p.live {
                let s = Window::of(l, &name)?;
                self.well_formed(&s, p.span, &format!("port `{}`", p.name));
            }
        }
        let body = self.comp.body.as_deref().unwrap_or(&[]);
        let mut insts: BTreeMap<&str, (&str, Option<Window>, Span)> = BTreeMap::new();
        let mut uses: BTreeMap<&str, Vec<Use>> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for cmd in body {
            if let CommandKind::Instance { name: i, comp, avail, .. } = &cmd.kind {
                let a = match avail {
                    Some(a) => {
                        let s = Window::of(a, &name)?;
                        self.well_formed(&s, cmd.span, &format!("availability of `{i}`"));
                        Some(s)
                    }
                    None => None,
                };
                insts.insert(i, (comp, a, cmd.span));
                order.push(i);
            }
        }
        // Outputs of invocations are producers too; collect them first so
        // that source order does not matter.
        for cmd in body {
            let CommandKind::Invoke { name: inv, inst, events, .. } = &cmd.kind else {
                continue;
            };
            let Some(child) = insts.get(inst.as_str()).and_then(|(c, ..)| self.prog.get(c)) else {
                continue;
            };
            let times = self.times(&child.sig, events)?;
            for p in &child.sig.outputs {
                if let Some(l) = &p.live {
                    let s = self.retime(l, &times, &child.sig.name)?;
                    wires.insert(format!("{inv}.{}", p.name), (s, nat(&p.width, &child.sig.name)?));
                }
            }
        }
        for cmd in body {
            match &cmd.kind {
                CommandKind::Invoke {
                    name: inv,
                    inst,
                    events,
                    args,
                } => {
                    let Some(&(comp, ..)) = insts.get(inst.as_str()) else {
                        continue;
                    };
                    let Some(child) = self.prog.get(comp) else {
                        continue;
                    };
                    let times = self.times(&child.sig, events)?;
                    for e in &child.sig.events {
                        if let Some((event, start)) = times.get(&e.name) {
                            uses.entry(inst).or_default().push(Use {
                                inv: inv.clone(),
                                event: event.clone(),
                                start: *start,
                                delay: nat(&e.delay, comp)?,
                                span: cmd.span,
                            });
                        }
                    }
                    for (port, arg) in child.sig.timed_inputs().zip(args) {
                        let Some(l) = &port.live else { continue };
                        let need = self.retime(l, &times, comp)?;
                        let what = format!("argument `{}` of `{inv}` for `{comp}.{}`", emit_ref(arg), port.name);
                        self.flow(&need, nat(&port.width, comp)?, arg, &wires, cmd.span, &what);
                    }
                }
                CommandKind::Connect { dst, src } => {
                    let PortRef::Local { port, .. } = dst else { continue };
                    let Some(def) = sig.output(port) else { continue };
                    let Some(l) = &def.live else { continue };
                    let need = Window::of(l, &name)?;
                    let what = format!("`{port}`");
                    self.flow(&need, nat(&def.width, &name)?, src, &wires, cmd.span, &what);
                }
                _ => {}
            }
        }
        for i in order {
            let (_, avail, span) = insts[i].clone();
            let u = uses.remove(i).unwrap_or_default();
            self.instance(i, avail, span, &u);
        }
        Ok(())
    }

    fn well_formed(&mut self, s: &Window, span: Span, what: &str) {
        if s.start >= s.end {
            self.report(
                Category::WellFormedInterval,
                span,
                format!("{what} has empty interval {s}"),
                None,
            );
        }
    }

    fn times(&self, child: &Signature, events: &[Time]) -> Result<BTreeMap<String, (String, u64)>, SimError> {
        let name = self.name();
        child
            .events
            .iter()
            .zip(events)
            .map(|(e, t)| Ok((e.name.clone(), (t.event.clone(), nat(&t.offset, &name)?))))
            .collect()
    }

    fn retime(&self, iv: &Interval, times: &BTreeMap<String, (String, u64)>, comp: &str) -> Result<Window, SimError> {
        let s = Window::of(iv, comp)?;
        Ok(match times.get(&s.event) {
            Some((event, base)) => s.shifted(event, *base),
            None => s,
        })
    }

    fn flow(
        &mut self,
        need: &Window,
        width: u64,
        src: &PortRef,
        wires: &BTreeMap<String, (Window, u64)>,
        span: Span,
        what: &str,
    ) {
        let key = match src {
            PortRef::Const(_) => return,
            PortRef::Local { port, .. } => port.clone(),
            PortRef::InvocOut { invoc, port, .. } => format!("{invoc}.{port}"),
        };
        let Some((have, have_width)) = wires.get(&key) else {
            return;
        };
        if *have_width != width {
            self.report(
                Category::WidthMatch,
                span,
                format!("{what}: width {have_width} does not match {width}"),
                None,
            );
        }
        let required = Cycles::window(need, self.horizon);
        let valid = Cycles::window(have, self.horizon);
        if let Some(w) = required.uncovered_by(&valid) {
            self.report(
                Category::IntervalAvailability,
                span,
                format!("{what}: signal available in interval {have} but required in {need}"),
                Some(w),
            );
        }
    }

    fn instance(&mut self, inst: &str, avail: Option<Window>, span: Span, uses: &[Use]) {
        if uses.is_empty() && avail.is_none() {
            return;
        }
        let h = self.horizon;
        let busy: Vec<Cycles> = uses
            .iter()
            .map(|u| {
                Cycles::window(
                    &Window {
                        event: u.event.clone(),
                        start: u.start,
                        end: u.start + u.delay,
                    },
                    h,
                )
            })
            .collect();
        // Two uses in one iteration.
        for (a, ua) in uses.iter().enumerate() {
            for (b, ub) in uses.iter().enumerate().skip(a + 1) {
                let clash = if ua.event != ub.event {
                    Some((ua.start.min(ub.start), ua.start.max(ub.start) + 1))
                } else {
                    busy[a].overlap(&busy[b])
                };
                if let Some(w) = clash {
                    self.report(
                        Category::InstanceConflict,
                        ub.span,
                        format!(
                            "`{}` at '{}+{} and `{}` at '{}+{} both hold `{inst}`",
                            ua.inv, ua.event, ua.start, ub.inv, ub.event, ub.start
                        ),
                        Some(w),
                    );
                }
            }
        }
        let window = match avail {
            Some(a) => {
                let hold = Cycles::window(&a, h);
                for (u, cyc) in uses.iter().zip(&busy) {
                    let outside = if u.event != a.event {
                        Some((u.start, u.start + u.delay))
                    } else if u.start < a.start || u.start + u.delay > a.end {
                        Some(cyc.uncovered_by(&hold).unwrap_or((u.start, u.start)))
                    } else {
                        None
                    };
                    if let Some(w) = outside {
                        self.report(
                            Category::InstanceAvailability,
                            u.span,
                            format!("`{}` holds `{inst}` outside its availability {a}", u.inv),
                            Some(w),
                        );
                    }
                }
                Some(a)
            }
            None if uses.len() == 1 => {
                let u = &uses[0];
                Some(Window {
                    event: u.event.clone(),
                    start: u.start,
                    end: u.start + u.delay,
                })
            }
            None if uses.iter().all(|u| u.event == uses[0].event) => Some(Window {
                event: uses[0].event.clone(),
                start: uses.iter().map(|u| u.start).min().unwrap_or(0),
                end: uses.iter().map(|u| u.start + u.delay).max().unwrap_or(0),
            }),
            None => {
                self.report(
                    Category::InstanceAvailability,
                    span,
                    format!("`{inst}` is used on several events; annotate it with `in ['G, 'G+n]`"),
                    None,
                );
                None
            }
        };
        // Later iterations against the first.
        let mut held: Vec<(Option<&str>, Window, Span)> = uses
            .iter()
            .map(|u| {
                (
                    Some(u.inv.as_str()),
                    Window {
                        event: u.event.clone(),
                        start: u.start,
                        end: u.start + u.delay,
                    },
                    u.span,
                )
            })
            .collect();
        if let Some(w) = window {
            held.push((None, w, span));
        }
        for (inv, w, at) in held {
            let d = self.delay(&w.event);
            if d == 0 {
                continue;
            }
            let first = Cycles::window(&w, h);
            let mut k = 1;
            while k * d < h {
                let next = Cycles::window(&w.shifted(&w.event, k * d), h);
                if let Some(clash) = first.overlap(&next) {
                    let who = match inv {
                        Some(i) => format!("`{i}`"),
                        None => "the availability window".to_string(),
                    };
                    self.report(
                        Category::DelayPipelining,
                        at,
                        format!(
                            "{who} holds `{inst}` in {w} but event '{} starts a new iteration every {d} cycle(s)",
                            w.event
                        ),
                        Some(clash),
                    );
                    break;
                }
                k += 1;
            }
        }
    }
}

fn emit_ref(r: &PortRef) -> String {
    crate::emit::print_port_ref(r)
}

/// Simulates every component for `horizon` cycles. Bodiless components
/// only have their signatures checked.
pub fn simulate(prog: &Program, horizon: u64) -> Result<SimReport, SimError> {
    let needed = required_horizon(prog)?;
    if horizon == 0 || horizon < needed {
        return Err(SimError::Horizon {
            needed: needed.max(1),
            given: horizon,
        });
    }
    let mut out = Vec::new();
    for c in &prog.components {
        let mut sim = Sim {
            prog,
            comp: c,
            horizon,
            out: Vec::new(),
        };
        sim.run()?;
        out.extend(sim.out);
    }
    Ok(SimReport {
        horizon,
        violations: out,
    })
}
