// SPDX-License-Identifier: Apache-2.0

//! Host side of pfil: the SMT solver process, generator tools, source
//! files, reports and the command-line pipelines.

pub mod config;
pub mod driver;
pub mod report;
pub mod solver;
pub mod source;
pub mod tools;
