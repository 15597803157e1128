// SPDX-License-Identifier: Apache-2.0

//! Parameter expressions over the naturals, plus the comparison and
//! proposition layer that where-clauses, branch conditions and proof
//! obligations are built from.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// A concrete assignment of naturals to parameter names.
pub type Binding = BTreeMap<String, u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 2,
        }
    }

    fn commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul)
    }

    /// Applies the operator to naturals. Subtraction below zero is an error,
    /// never wraparound.
    pub fn apply(self, lhs: u64, rhs: u64) -> Result<u64, EvalError> {
        match self {
            BinOp::Add => lhs.checked_add(rhs).ok_or(EvalError::Overflow),
            BinOp::Sub => lhs
                .checked_sub(rhs)
                .ok_or(EvalError::Underflow { lhs, rhs }),
            BinOp::Mul => lhs.checked_mul(rhs).ok_or(EvalError::Overflow),
            BinOp::Div => lhs.checked_div(rhs).ok_or(EvalError::DivByZero),
            BinOp::Mod => lhs.checked_rem(rhs).ok_or(EvalError::DivByZero),
        }
    }
}

/// Builtin parameter functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Pow2,
    Log2,
    BitRev,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Pow2 => "pow2",
            Func::Log2 => "log2",
            Func::BitRev => "bit_rev",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "pow2" => Some(Func::Pow2),
            "log2" => Some(Func::Log2),
            "bit_rev" => Some(Func::BitRev),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow2 | Func::Log2 => 1,
            Func::BitRev => 2,
        }
    }

    pub fn apply(self, args: &[u64]) -> Result<u64, EvalError> {
        if args.len() != self.arity() {
            return Err(EvalError::Arity {
                func: self,
                found: args.len(),
            });
        }
        match self {
            Func::Pow2 => pow2(args[0]),
            Func::Log2 => log2(args[0]),
            Func::BitRev => bit_rev(args[0], args[1]),
        }
    }
}

pub fn pow2(k: u64) -> Result<u64, EvalError> {
    if k >= 64 {
        Err(EvalError::Overflow)
    } else {
        Ok(1u64 << k)
    }
}

/// Ceiling log2; `log2(0)` is undefined.
pub fn log2(x: u64) -> Result<u64, EvalError> {
    match x {
        0 => Err(EvalError::Log2Zero),
        1 => Ok(0),
        _ => Ok(u64::from(64 - (x - 1).leading_zeros())),
    }
}

/// Reverses the low `width` bits of `value`.
pub fn bit_rev(value: u64, width: u64) -> Result<u64, EvalError> {
    if width > 64 {
        return Err(EvalError::Overflow);
    }
    let mut out = 0u64;
    for b in 0..width {
        if (value >> b) & 1 == 1 {
            out |= 1 << (width - 1 - b);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    Unbound(String),
    Underflow { lhs: u64, rhs: u64 },
    DivByZero,
    Log2Zero,
    Overflow,
    Arity { func: Func, found: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(name) => write!(f, "parameter `{name}` has no value"),
            EvalError::Underflow { lhs, rhs } => {
                write!(f, "subtraction {lhs}-{rhs} is negative")
            }
            EvalError::DivByZero => write!(f, "division by zero"),
            EvalError::Log2Zero => write!(f, "log2(0) is undefined"),
            EvalError::Overflow => write!(f, "arithmetic overflow"),
            EvalError::Arity { func, found } => write!(
                f,
                "`{}` takes {} argument(s), found {found}",
                func.name(),
                func.arity()
            ),
        }
    }
}

impl core::error::Error for EvalError {}

/// A symbolic natural-number expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Nat(u64),
    /// A parameter, let, loop index or qualified output parameter (`M::L`).
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Expr::Nat(n) => Some(*n),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Nat(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Expr::Nat(_) => true,
            Expr::Var(_) => false,
            Expr::Bin(_, l, r) => l.is_ground() && r.is_ground(),
            Expr::Call(_, args) => args.iter().all(Expr::is_ground),
        }
    }

    /// Replaces variables by expressions; unmapped variables are kept.
    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Nat(_) => self.clone(),
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.subst(map), r.subst(map)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.subst(map)).collect()),
        }
    }

    /// Big-step evaluation under a total binding.
    pub fn eval(&self, binding: &Binding) -> Result<u64, EvalError> {
        match self {
            Expr::Nat(n) => Ok(*n),
            Expr::Var(v) => binding
                .get(v)
                .copied()
                .ok_or_else(|| EvalError::Unbound(v.clone())),
            Expr::Bin(op, l, r) => op.apply(l.eval(binding)?, r.eval(binding)?),
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(binding))
                    .collect::<Result<Vec<_>, _>>()?;
                f.apply(&vals)
            }
        }
    }

    /// Constant-folds closed subtrees, drops additive and multiplicative
    /// identities and orders commutative operands canonically.
    pub fn normalize(&self) -> Result<Expr, EvalError> {
        match self {
            Expr::Nat(_) | Expr::Var(_) => Ok(self.clone()),
            Expr::Bin(op, l, r) => {
                let l = l.normalize()?;
                let r = r.normalize()?;
                Ok(match (op, l.as_nat(), r.as_nat()) {
                    (_, Some(a), Some(b)) => Expr::Nat(op.apply(a, b)?),
                    (BinOp::Add, Some(0), _) => r,
                    (BinOp::Add | BinOp::Sub, _, Some(0)) => l,
                    (BinOp::Mul, Some(0), _) | (BinOp::Mul, _, Some(0)) => Expr::Nat(0),
                    (BinOp::Mul, Some(1), _) => r,
                    (BinOp::Mul | BinOp::Div, _, Some(1)) => l,
                    (BinOp::Div | BinOp::Mod, _, Some(0)) => return Err(EvalError::DivByZero),
                    (BinOp::Mod, _, Some(1)) => Expr::Nat(0),
                    _ if op.commutative() && canonical_cmp(&l, &r) == Ordering::Greater => {
                        Expr::bin(*op, r, l)
                    }
                    _ => Expr::bin(*op, l, r),
                })
            }
            Expr::Call(f, args) => {
                let args = args
                    .iter()
                    .map(Expr::normalize)
                    .collect::<Result<Vec<_>, _>>()?;
                if args.len() != f.arity() {
                    return Err(EvalError::Arity {
                        func: *f,
                        found: args.len(),
                    });
                }
                let consts: Option<Vec<u64>> = args.iter().map(Expr::as_nat).collect();
                match consts {
                    Some(vals) => Ok(Expr::Nat(f.apply(&vals)?)),
                    None => Ok(Expr::Call(*f, args)),
                }
            }
        }
    }

    /// Visits every subexpression, parents before children.
    pub fn walk(&self, visit: &mut dyn FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Nat(_) | Expr::Var(_) => {}
            Expr::Bin(_, l, r) => {
                l.walk(visit);
                r.walk(visit);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        match self {
            Expr::Nat(n) => write!(f, "{n}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
            Expr::Bin(op, l, r) => {
                let prec = op.precedence();
                let paren = prec < min_prec;
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, prec)?;
                f.write_str(op.symbol())?;
                // Operators are left-associative: a right operand at the same
                // level needs parentheses to survive a reparse.
                r.fmt_prec(f, prec + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Variables sort first and constants last, so `N+1` stays `N+1`.
fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    fn rank(e: &Expr) -> u8 {
        match e {
            Expr::Var(_) => 0,
            Expr::Bin(..) => 1,
            Expr::Call(..) => 2,
            Expr::Nat(_) => 3,
        }
    }
    rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl From<u64> for Expr {
    fn from(n: u64) -> Expr {
        Expr::Nat(n)
    }
}

impl From<&str> for Expr {
    fn from(v: &str) -> Expr {
        Expr::Var(v.to_string())
    }
}

macro_rules! expr_op {
    ($trait:ident, $method:ident, $op:expr) => {
        impl core::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::bin($op, self, rhs)
            }
        }
    };
}

expr_op!(Add, add, BinOp::Add);
expr_op!(Sub, sub, BinOp::Sub);
expr_op!(Mul, mul, BinOp::Mul);
expr_op!(Div, div, BinOp::Div);
expr_op!(Rem, rem, BinOp::Mod);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, lhs: u64, rhs: u64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }
}

/// A single comparison between parameter expressions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cmp {
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Cmp {
    pub fn new(lhs: Expr, op: CmpOp, rhs: Expr) -> Cmp {
        Cmp { op, lhs, rhs }
    }

    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Cmp {
        Cmp::new(self.lhs.subst(map), self.op, self.rhs.subst(map))
    }

    pub fn eval(&self, binding: &Binding) -> Result<bool, EvalError> {
        Ok(self.op.holds(self.lhs.eval(binding)?, self.rhs.eval(binding)?))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        self.lhs.collect_vars(out);
        self.rhs.collect_vars(out);
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// Boolean formulas over comparisons.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prop {
    True,
    False,
    Cmp(Cmp),
    Not(Box<Prop>),
    And(Vec<Prop>),
    Or(Vec<Prop>),
    Implies(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn cmp(lhs: Expr, op: CmpOp, rhs: Expr) -> Prop {
        Prop::Cmp(Cmp::new(lhs, op, rhs))
    }

    pub fn le(lhs: Expr, rhs: Expr) -> Prop {
        Prop::cmp(lhs, CmpOp::Le, rhs)
    }

    pub fn lt(lhs: Expr, rhs: Expr) -> Prop {
        Prop::cmp(lhs, CmpOp::Lt, rhs)
    }

    pub fn ge(lhs: Expr, rhs: Expr) -> Prop {
        Prop::cmp(lhs, CmpOp::Ge, rhs)
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Prop {
        Prop::cmp(lhs, CmpOp::Eq, rhs)
    }

    pub fn ne(lhs: Expr, rhs: Expr) -> Prop {
        Prop::cmp(lhs, CmpOp::Ne, rhs)
    }

    /// Conjunction that drops `True` members and collapses on `False`.
    pub fn all(parts: impl IntoIterator<Item = Prop>) -> Prop {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Prop::True => {}
                Prop::False => return Prop::False,
                Prop::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Prop::True,
            1 => out.pop().unwrap(),
            _ => Prop::And(out),
        }
    }

    pub fn any(parts: impl IntoIterator<Item = Prop>) -> Prop {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Prop::False => {}
                Prop::True => return Prop::True,
                Prop::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Prop::False,
            1 => out.pop().unwrap(),
            _ => Prop::Or(out),
        }
    }

    pub fn implies(antecedent: Prop, consequent: Prop) -> Prop {
        match (&antecedent, &consequent) {
            (Prop::True, _) => consequent,
            (Prop::False, _) | (_, Prop::True) => Prop::True,
            _ => Prop::Implies(Box::new(antecedent), Box::new(consequent)),
        }
    }

    pub fn negate(self) -> Prop {
        match self {
            Prop::True => Prop::False,
            Prop::False => Prop::True,
            Prop::Not(inner) => *inner,
            other => Prop::Not(Box::new(other)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Cmp(c) => c.collect_vars(out),
            Prop::Not(p) => p.collect_vars(out),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.collect_vars(out)),
            Prop::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Prop {
        match self {
            Prop::True | Prop::False => self.clone(),
            Prop::Cmp(c) => Prop::Cmp(c.subst(map)),
            Prop::Not(p) => Prop::Not(Box::new(p.subst(map))),
            Prop::And(ps) => Prop::And(ps.iter().map(|p| p.subst(map)).collect()),
            Prop::Or(ps) => Prop::Or(ps.iter().map(|p| p.subst(map)).collect()),
            Prop::Implies(a, b) => Prop::Implies(Box::new(a.subst(map)), Box::new(b.subst(map))),
        }
    }

    /// Visits every expression occurring in the formula.
    pub fn for_each_expr(&self, visit: &mut dyn FnMut(&Expr)) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Cmp(c) => {
                visit(&c.lhs);
                visit(&c.rhs);
            }
            Prop::Not(p) => p.for_each_expr(visit),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.for_each_expr(visit)),
            Prop::Implies(a, b) => {
                a.for_each_expr(visit);
                b.for_each_expr(visit);
            }
        }
    }

    /// Concrete evaluation. Connectives short-circuit left to right, so a
    /// guard that is false shields an undefined consequent.
    pub fn eval(&self, binding: &Binding) -> Result<bool, EvalError> {
        match self {
            Prop::True => Ok(true),
            Prop::False => Ok(false),
            Prop::Cmp(c) => c.eval(binding),
            Prop::Not(p) => Ok(!p.eval(binding)?),
            Prop::And(ps) => {
                for p in ps {
                    if !p.eval(binding)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Prop::Or(ps) => {
                for p in ps {
                    if p.eval(binding)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Prop::Implies(a, b) => Ok(!a.eval(binding)? || b.eval(binding)?),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, ps: &[Prop], sep: &str| -> fmt::Result {
            if nested {
                f.write_str("(")?;
            }
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                p.fmt_prec(f, true)?;
            }
            if nested {
                f.write_str(")")?;
            }
            Ok(())
        };
        match self {
            Prop::True => f.write_str("true"),
            Prop::False => f.write_str("false"),
            Prop::Cmp(c) => write!(f, "{c}"),
            Prop::Not(p) => {
                f.write_str("!")?;
                p.fmt_prec(f, true)
            }
            Prop::And(ps) => join(f, ps, " && "),
            Prop::Or(ps) => join(f, ps, " || "),
            Prop::Implies(a, b) => {
                if nested {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, true)?;
                f.write_str(" => ")?;
                b.fmt_prec(f, true)?;
                if nested {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl From<Cmp> for Prop {
    fn from(c: Cmp) -> Prop {
        Prop::Cmp(c)
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn v(name: &str) -> Expr {
        Expr::var(name)
    }

    #[test]
    fn free_vars_include_qualified_names() {
        assert_eq!(
            (v("N") + Expr::Nat(1)).free_vars().into_iter().collect::<Vec<_>>(),
            ["N"]
        );
        let pow = Expr::Call(Func::Pow2, alloc::vec![v("Stages")]);
        assert_eq!(pow.free_vars().into_iter().collect::<Vec<_>>(), ["Stages"]);
        let ml = v("M::L") + Expr::Nat(0);
        assert_eq!(ml.free_vars().into_iter().collect::<Vec<_>>(), ["M::L"]);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!((Expr::Nat(2) + Expr::Nat(3)).normalize(), Ok(Expr::Nat(5)));
        assert_eq!((v("N") + Expr::Nat(0)).normalize(), Ok(v("N")));
        let pow = Expr::Call(Func::Pow2, alloc::vec![Expr::Nat(3)]);
        assert_eq!(pow.normalize(), Ok(Expr::Nat(8)));
        assert_eq!(
            (v("N") / Expr::Nat(0)).normalize(),
            Err(EvalError::DivByZero)
        );
        assert_eq!((Expr::Nat(1) + v("N")).normalize(), Ok(v("N") + Expr::Nat(1)));
    }

    #[test]
    fn builtins() {
        assert_eq!(bit_rev(1, 3), Ok(4));
        assert_eq!(bit_rev(6, 3), Ok(3));
        assert_eq!(log2(8), Ok(3));
        assert_eq!(log2(9), Ok(4));
        assert_eq!(log2(1), Ok(0));
        assert_eq!(log2(0), Err(EvalError::Log2Zero));
        assert_eq!(pow2(0), Ok(1));
    }

    #[test]
    fn subtraction_never_wraps() {
        let e = v("a") - v("b");
        let mut b = Binding::new();
        b.insert("a".into(), 2);
        b.insert("b".into(), 3);
        assert_eq!(e.eval(&b), Err(EvalError::Underflow { lhs: 2, rhs: 3 }));
    }

    #[test]
    fn display_keeps_right_operands_grouped() {
        let e = v("a") - (v("b") - v("c"));
        assert_eq!(e.to_string(), "a-(b-c)");
        let e = (v("i") * Expr::Nat(2)) + Expr::Nat(1);
        assert_eq!(e.to_string(), "i*2+1");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u64..6).prop_map(Expr::Nat),
            prop_oneof![Just("N"), Just("M"), Just("i")].prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Mod)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::bin(op, l, r)),
                inner.clone().prop_map(|a| Expr::Call(Func::Pow2, alloc::vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::BitRev, alloc::vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(e in arb_expr()) {
            if let Ok(once) = e.normalize() {
                prop_assert_eq!(once.normalize(), Ok(once.clone()));
            }
        }

        #[test]
        fn normalize_does_not_invent_vars(e in arb_expr()) {
            if let Ok(n) = e.normalize() {
                prop_assert!(n.free_vars().is_subset(&e.free_vars()));
            }
        }

        #[test]
        fn normalize_preserves_value(e in arb_expr(), n in 0u64..5, m in 0u64..5, i in 0u64..5) {
            let mut b = Binding::new();
            b.insert("N".into(), n);
            b.insert("M".into(), m);
            b.insert("i".into(), i);
            if let (Ok(norm), Ok(val)) = (e.normalize(), e.eval(&b)) {
                prop_assert_eq!(norm.eval(&b), Ok(val));
            }
        }
    }
}
