// SPDX-License-Identifier: Apache-2.0

//! Proof obligations and their discharge.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Binding, EvalError, Prop};
use crate::ir::Span;

pub mod smt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    IntervalAvailability,
    WellFormedInterval,
    DelayPipelining,
    InstanceAvailability,
    InstanceConflict,
    WhereClause,
    WidthMatch,
    BundleSize,
    NonnegSubtraction,
    OutparamConstraint,
    /// Divisors are non-zero and `log2` arguments positive.
    DefinedExpression,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::IntervalAvailability,
        Category::WellFormedInterval,
        Category::DelayPipelining,
        Category::InstanceAvailability,
        Category::InstanceConflict,
        Category::WhereClause,
        Category::WidthMatch,
        Category::BundleSize,
        Category::NonnegSubtraction,
        Category::OutparamConstraint,
        Category::DefinedExpression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::IntervalAvailability => "interval-availability",
            Category::WellFormedInterval => "well-formed-interval",
            Category::DelayPipelining => "delay-pipelining",
            Category::InstanceAvailability => "instance-availability",
            Category::InstanceConflict => "instance-conflict",
            Category::WhereClause => "where-clause",
            Category::WidthMatch => "width-match",
            Category::BundleSize => "bundle-size",
            Category::NonnegSubtraction => "nonneg-subtraction",
            Category::OutparamConstraint => "outparam-constraint",
            Category::DefinedExpression => "defined-expression",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named proof goal: `path_condition => goal`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub category: Category,
    pub path_condition: Prop,
    pub goal: Prop,
    pub span: Span,
    pub note: String,
}

impl Obligation {
    pub fn new(category: Category, path_condition: Prop, goal: Prop, span: Span) -> Obligation {
        Obligation {
            category,
            path_condition,
            goal,
            span,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Obligation {
        self.note = note.into();
        self
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = self.path_condition.free_vars();
        self.goal.collect_vars(&mut out);
        out
    }

    /// The formula whose satisfiability refutes the obligation.
    pub fn negated_query(&self, assumptions: &[Prop]) -> Prop {
        Prop::all(
            assumptions
                .iter()
                .cloned()
                .chain([self.path_condition.clone(), self.goal.clone().negate()]),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proven,
    /// A binding under which the assumptions and path condition hold but
    /// the goal does not.
    Refuted(Binding),
    Unknown(String),
}

impl Verdict {
    pub fn is_proven(&self) -> bool {
        matches!(self, Verdict::Proven)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Proven => "proven",
            Verdict::Refuted(_) => "refuted",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

/// Evaluates a formula under a total binding.
pub fn eval_concrete(formula: &Prop, binding: &Binding) -> Result<bool, EvalError> {
    formula.eval(binding)
}

/// A decision procedure for `assumptions && pc && !goal`.
pub trait Backend {
    fn check(&mut self, assumptions: &[Prop], o: &Obligation) -> Verdict;

    fn name(&self) -> &str;
}

/// Decides obligations without free variables, and those whose variables
/// are all bounded above by ground conjuncts of the query (bundle indices,
/// typically) by enumeration.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConcreteBackend;

/// Largest number of assignments [`ConcreteBackend`] enumerates.
pub const ENUMERATION_LIMIT: u64 = 4096;

/// Exclusive upper bounds `v < n` found among the top-level conjuncts.
fn upper_bounds(p: &Prop, out: &mut BTreeMap<String, u64>) {
    use crate::expr::{CmpOp, Expr};
    match p {
        Prop::And(ps) => ps.iter().for_each(|q| upper_bounds(q, out)),
        Prop::Cmp(c) => {
            let (var, op, bound) = match (&c.lhs, &c.rhs) {
                (Expr::Var(v), b) => (v, c.op, b),
                (b, Expr::Var(v)) => (
                    v,
                    match c.op {
                        CmpOp::Gt => CmpOp::Lt,
                        CmpOp::Ge => CmpOp::Le,
                        CmpOp::Lt => CmpOp::Gt,
                        CmpOp::Le => CmpOp::Ge,
                        other => other,
                    },
                    b,
                ),
                _ => return,
            };
            let Ok(n) = bound.eval(&Binding::new()) else { return };
            let limit = match op {
                CmpOp::Lt => n,
                CmpOp::Le | CmpOp::Eq => n.saturating_add(1),
                _ => return,
            };
            let e = out.entry(var.clone()).or_insert(limit);
            *e = (*e).min(limit);
        }
        _ => {}
    }
}

impl Backend for ConcreteBackend {
    fn check(&mut self, assumptions: &[Prop], o: &Obligation) -> Verdict {
        let query = o.negated_query(assumptions);
        let vars = query.free_vars();
        let mut bounds = BTreeMap::new();
        upper_bounds(&query, &mut bounds);
        let space = vars
            .iter()
            .try_fold(1u64, |acc, v| bounds.get(v).and_then(|n| acc.checked_mul(*n)));
        let Some(space) = space.filter(|n| *n <= ENUMERATION_LIMIT) else {
            return Verdict::Unknown(
                "symbolic obligation needs an SMT solver (pass --solver <path>)".into(),
            );
        };
        let vars: Vec<String> = vars.into_iter().collect();
        for k in 0..space {
            let mut rest = k;
            let mut b = Binding::new();
            for v in &vars {
                let n = bounds[v];
                b.insert(v.clone(), rest % n);
                rest /= n;
            }
            match eval_concrete(&query, &b) {
                Ok(true) => return Verdict::Refuted(b),
                Ok(false) => {}
                Err(e) => return Verdict::Unknown(format!("evaluation failed: {e}")),
            }
        }
        Verdict::Proven
    }

    fn name(&self) -> &str {
        "concrete"
    }
}

/// Keeps the assumptions that share variables, transitively, with the
/// obligation.
pub fn slice_assumptions(assumptions: &[Prop], o: &Obligation) -> Vec<Prop> {
    let mut vars = o.free_vars();
    let facts: Vec<(BTreeSet<String>, &Prop)> =
        assumptions.iter().map(|a| (a.free_vars(), a)).collect();
    let mut keep = alloc::vec![false; facts.len()];
    loop {
        let mut changed = false;
        for (i, (fv, _)) in facts.iter().enumerate() {
            if !keep[i] && (fv.is_empty() || !fv.is_disjoint(&vars)) {
                keep[i] = true;
                vars.extend(fv.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    facts
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|((_, p), _)| p.clone())
        .collect()
}

/// Discharges one obligation. Ground queries are decided by evaluation;
/// a refutation from `backend` must replay under [`eval_concrete`] or it is
/// reported as unknown.
pub fn discharge(backend: &mut dyn Backend, o: &Obligation, assumptions: &[Prop]) -> Verdict {
    let assumptions = slice_assumptions(assumptions, o);
    let query = o.negated_query(&assumptions);
    if query.free_vars().is_empty() {
        return ConcreteBackend.check(&assumptions, o);
    }
    match backend.check(&assumptions, o) {
        Verdict::Refuted(model) => {
            let mut full = model.clone();
            for v in query.free_vars() {
                full.entry(v).or_insert(0);
            }
            match eval_concrete(&query, &full) {
                Ok(true) => Verdict::Refuted(full),
                Ok(false) => Verdict::Unknown(format!(
                    "{} model does not falsify the obligation under exact arithmetic",
                    backend.name()
                )),
                Err(e) => Verdict::Unknown(format!(
                    "{} model could not be replayed: {e}",
                    backend.name()
                )),
            }
        }
        v => v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use alloc::vec;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn ground_containment_refuted() {
        // [G+2, G+3) inside [G, G+1)
        let goal = Prop::all([
            Prop::le(Expr::Nat(0), Expr::Nat(2)),
            Prop::le(Expr::Nat(3), Expr::Nat(1)),
        ]);
        let o = Obligation::new(Category::IntervalAvailability, Prop::True, goal, Span::default());
        assert!(matches!(
            discharge(&mut ConcreteBackend, &o, &[]),
            Verdict::Refuted(_)
        ));
    }

    #[test]
    fn ground_delay_refuted() {
        let o = Obligation::new(
            Category::DelayPipelining,
            Prop::True,
            Prop::ge(Expr::Nat(1), Expr::Nat(2)),
            Span::default(),
        );
        assert!(matches!(
            discharge(&mut ConcreteBackend, &o, &[]),
            Verdict::Refuted(_)
        ));
    }

    #[test]
    fn bounded_indices_enumerated() {
        let pc = Prop::all([Prop::lt(v("i"), Expr::Nat(4)), Prop::lt(Expr::Nat(1), v("j")), Prop::le(v("j"), Expr::Nat(3))]);
        let ok = Obligation::new(Category::WellFormedInterval, pc.clone(), Prop::lt(v("i"), v("i") + v("j")), Span::default());
        assert_eq!(ConcreteBackend.check(&[], &ok), Verdict::Proven);
        let bad = Obligation::new(Category::BundleSize, pc, Prop::lt(v("i") + v("j"), Expr::Nat(6)), Span::default());
        match ConcreteBackend.check(&[], &bad) {
            Verdict::Refuted(m) => assert!(m["i"] + m["j"] >= 6 && m["j"] > 1),
            other => panic!("{other:?}"),
        }
        let empty = Obligation::new(Category::BundleSize, Prop::lt(v("i"), Expr::Nat(0)), Prop::False, Span::default());
        assert_eq!(ConcreteBackend.check(&[], &empty), Verdict::Proven);
        let huge = Obligation::new(Category::BundleSize, Prop::lt(v("i"), Expr::Nat(1 << 20)), Prop::lt(v("i"), Expr::Nat(5)), Span::default());
        assert!(matches!(ConcreteBackend.check(&[], &huge), Verdict::Unknown(_)));
    }

    #[test]
    fn symbolic_without_solver_is_unknown() {
        let o = Obligation::new(
            Category::IntervalAvailability,
            Prop::lt(v("i"), v("N")),
            Prop::le(v("i") + Expr::Nat(1), v("N")),
            Span::default(),
        );
        assert!(matches!(
            discharge(&mut ConcreteBackend, &o, &[]),
            Verdict::Unknown(_)
        ));
    }

    #[test]
    fn eval_concrete_examples() {
        let b: Binding = [("i".into(), 3), ("N".into(), 4)].into_iter().collect();
        assert!(eval_concrete(&Prop::le(v("i") + Expr::Nat(1), v("N")), &b).unwrap());
        let br = Expr::Call(crate::expr::Func::BitRev, vec![Expr::Nat(1), Expr::Nat(3)]);
        assert!(eval_concrete(&Prop::eq(br, Expr::Nat(4)), &Binding::new()).unwrap());
        let b: Binding = [("L".into(), 0), ("II".into(), 0)].into_iter().collect();
        let c = Prop::all([
            Prop::ge(v("L"), v("II")),
            Prop::cmp(v("II"), crate::expr::CmpOp::Gt, Expr::Nat(0)),
        ]);
        assert!(!eval_concrete(&c, &b).unwrap());
    }

    #[test]
    fn slicing_follows_shared_variables() {
        let o = Obligation::new(
            Category::WhereClause,
            Prop::True,
            Prop::ge(v("A"), Expr::Nat(1)),
            Span::default(),
        );
        let facts = [
            Prop::eq(v("A"), v("B")),
            Prop::ge(v("B"), Expr::Nat(2)),
            Prop::ge(v("Z"), Expr::Nat(9)),
        ];
        assert_eq!(slice_assumptions(&facts, &o).len(), 2);
    }

    struct Liar;

    impl Backend for Liar {
        fn check(&mut self, _: &[Prop], _: &Obligation) -> Verdict {
            Verdict::Refuted([("N".into(), 5)].into_iter().collect())
        }

        fn name(&self) -> &str {
            "liar"
        }
    }

    #[test]
    fn spurious_refutation_downgraded() {
        let o = Obligation::new(
            Category::WhereClause,
            Prop::True,
            Prop::ge(v("N") + Expr::Nat(1), v("N")),
            Span::default(),
        );
        assert!(matches!(discharge(&mut Liar, &o, &[]), Verdict::Unknown(_)));
    }
}
