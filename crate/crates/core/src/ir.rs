// SPDX-License-Identifier: Apache-2.0

//! Abstract syntax shared by every pass.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Cmp, Expr};

/// Source position (1-based). The default span marks synthesized nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A point in time: an event plus a natural offset.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time {
    pub event: String,
    pub offset: Expr,
}

impl Time {
    pub fn new(event: impl Into<String>, offset: impl Into<Expr>) -> Time {
        Time {
            event: event.into(),
            offset: offset.into(),
        }
    }

    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Time {
        Time {
            event: self.event.clone(),
            offset: self.offset.subst(map),
        }
    }

    /// Shifts this time by `delta` cycles.
    pub fn plus(&self, delta: Expr) -> Time {
        Time {
            event: self.event.clone(),
            offset: self.offset.clone() + delta,
        }
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.offset {
            Expr::Nat(0) => write!(f, "'{}", self.event),
            off => write!(f, "'{}+{}", self.event, off),
        }
    }
}

/// Half-open availability interval `[start, end)`, written `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start: Time,
    pub end: Time,
}

impl Interval {
    pub fn new(start: Time, end: Time) -> Interval {
        Interval { start, end }
    }

    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Interval {
        Interval {
            start: self.start.subst(map),
            end: self.end.subst(map),
        }
    }

    pub fn for_each_expr(&self, visit: &mut dyn FnMut(&Expr)) {
        visit(&self.start.offset);
        visit(&self.end.offset);
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// A port or bundle definition. Scalar ports have no dims.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortDef {
    pub name: String,
    pub dims: Vec<Expr>,
    /// Names bound by `for<...>`; `_` when the interval does not depend on
    /// that dimension.
    pub index_vars: Vec<String>,
    /// `None` for unannotated interface ports such as `clk: 1`.
    pub live: Option<Interval>,
    pub width: Expr,
    pub span: Span,
}

impl PortDef {
    pub fn is_bundle(&self) -> bool {
        !self.dims.is_empty()
    }

    pub fn for_each_expr(&self, visit: &mut dyn FnMut(&Expr)) {
        self.dims.iter().for_each(&mut *visit);
        if let Some(live) = &self.live {
            live.for_each_expr(visit);
        }
        visit(&self.width);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDef {
    pub name: String,
    pub delay: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    /// Evaluated with the earlier arguments of the same instantiation.
    pub default: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SigKind {
    Source,
    External,
    /// Produced on demand by the generator tool imported under `tool`.
    Generated { tool: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
    pub events: Vec<EventDef>,
    pub inputs: Vec<PortDef>,
    pub outputs: Vec<PortDef>,
    /// `let` bindings of the `with` block, in declaration order.
    pub lets: Vec<(String, Expr)>,
    pub out_params: Vec<String>,
    /// Constraints attached to output parameters via `some ... where`.
    pub out_constraints: Vec<Cmp>,
    pub where_clauses: Vec<Cmp>,
    pub kind: SigKind,
    pub span: Span,
}

impl Signature {
    pub fn event(&self, name: &str) -> Option<&EventDef> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn input(&self, name: &str) -> Option<&PortDef> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&PortDef> {
        self.outputs.iter().find(|p| p.name == name)
    }

    /// Inputs that take an argument at invocation (interval-annotated ones).
    pub fn timed_inputs(&self) -> impl Iterator<Item = &PortDef> {
        self.inputs.iter().filter(|p| p.live.is_some())
    }

    pub fn is_external(&self) -> bool {
        !matches!(self.kind, SigKind::Source)
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.name == name)
    }
}

/// One index position of a port access.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Index {
    At(Expr),
    /// `lo..hi`
    Range(Expr, Expr),
    /// `..`
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PortRef {
    /// A signature port or a local bundle.
    Local { port: String, indices: Vec<Index> },
    /// An output of an invocation: `inv.port`.
    InvocOut {
        invoc: String,
        port: String,
        indices: Vec<Index>,
    },
    /// A constant; always available and width-polymorphic.
    Const(u64),
}

impl PortRef {
    pub fn local(port: impl Into<String>) -> PortRef {
        PortRef::Local {
            port: port.into(),
            indices: Vec::new(),
        }
    }

    pub fn indices(&self) -> &[Index] {
        match self {
            PortRef::Local { indices, .. } | PortRef::InvocOut { indices, .. } => indices,
            PortRef::Const(_) => &[],
        }
    }

    pub fn for_each_expr(&self, visit: &mut dyn FnMut(&Expr)) {
        for idx in self.indices() {
            match idx {
                Index::At(e) => visit(e),
                Index::Range(lo, hi) => {
                    visit(lo);
                    visit(hi);
                }
                Index::Full => {}
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Command {
    pub kind: CommandKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommandKind {
    /// `name := new comp[args] in [avail]`
    Instance {
        name: String,
        comp: String,
        /// Explicit `tool.` qualifier on generated modules.
        tool: Option<String>,
        args: Vec<Expr>,
        avail: Option<Interval>,
    },
    /// `name := inst<events>(args)`
    Invoke {
        name: String,
        inst: String,
        events: Vec<Time>,
        args: Vec<PortRef>,
    },
    Connect {
        dst: PortRef,
        src: PortRef,
    },
    Bundle(PortDef),
    For {
        var: String,
        lo: Expr,
        hi: Expr,
        body: Vec<Command>,
    },
    /// Conditions are a conjunction.
    If {
        cond: Vec<Cmp>,
        then: Vec<Command>,
        otherwise: Vec<Command>,
    },
    Let {
        name: String,
        value: Expr,
    },
    Assume(Vec<Cmp>),
    OutAssign {
        param: String,
        value: Expr,
    },
}

impl Command {
    pub fn new(kind: CommandKind, span: Span) -> Command {
        Command { kind, span }
    }

    /// Every parameter expression that appears directly in this command
    /// (nested blocks excluded).
    pub fn for_each_expr(&self, visit: &mut dyn FnMut(&Expr)) {
        match &self.kind {
            CommandKind::Instance { args, avail, .. } => {
                args.iter().for_each(&mut *visit);
                if let Some(a) = avail {
                    a.for_each_expr(visit);
                }
            }
            CommandKind::Invoke { events, args, .. } => {
                events.iter().for_each(|t| visit(&t.offset));
                args.iter().for_each(|a| a.for_each_expr(visit));
            }
            CommandKind::Connect { dst, src } => {
                dst.for_each_expr(visit);
                src.for_each_expr(visit);
            }
            CommandKind::Bundle(def) => def.for_each_expr(visit),
            CommandKind::For { lo, hi, .. } => {
                visit(lo);
                visit(hi);
            }
            CommandKind::If { cond, .. } | CommandKind::Assume(cond) => {
                for c in cond {
                    visit(&c.lhs);
                    visit(&c.rhs);
                }
            }
            CommandKind::Let { value, .. } | CommandKind::OutAssign { value, .. } => visit(value),
        }
    }

    pub fn children(&self) -> impl Iterator<Item = &Command> {
        let (a, b): (&[Command], &[Command]) = match &self.kind {
            CommandKind::For { body, .. } => (body, &[]),
            CommandKind::If {
                then, otherwise, ..
            } => (then, otherwise),
            _ => (&[], &[]),
        };
        a.iter().chain(b.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub sig: Signature,
    /// `None` for external and generated components.
    pub body: Option<Vec<Command>>,
}

/// `import gen "path" as alias;`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Import {
    pub alias: String,
    pub path: String,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub imports: Vec<Import>,
    pub components: Vec<Component>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.sig.name == name)
    }

    pub fn import(&self, alias: &str) -> Option<&Import> {
        self.imports.iter().find(|i| i.alias == alias)
    }

    /// Concatenates programs read from several files.
    pub fn merge(mut self, other: Program) -> Program {
        self.imports.extend(other.imports);
        self.components.extend(other.components);
        self
    }
}
