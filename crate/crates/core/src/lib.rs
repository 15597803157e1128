// SPDX-License-Identifier: Apache-2.0

//! Core of the pfil toolchain: a parametric, timeline-typed hardware
//! description language.
//!
//! Everything here is `no_std` with `alloc`. Process IO (the SMT solver,
//! generator tools, files) lives in the `pfil` crate and plugs in through
//! the [`solver::Backend`] and [`gen::Generator`] traits.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod expr;
pub mod gen;
pub mod ir;
pub mod bundle;
pub mod elaborate;
pub mod emit;
pub mod eval;
pub mod order;
pub mod parse;
pub mod resolve;
pub mod simulate;
pub mod solver;
pub mod typecheck;

pub use expr::{Binding, Cmp, CmpOp, EvalError, Expr, Prop};
pub use ir::{Component, Program, Span};
pub use parse::{parse, ParseError};
