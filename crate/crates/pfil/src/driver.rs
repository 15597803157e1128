// SPDX-License-Identifier: Apache-2.0

//! The check, elaborate and simulate pipelines behind the command line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pfil_core::bundle::eliminate_program;
use pfil_core::elaborate::{elaborate, print_externals, Elaborated, Options};
use pfil_core::emit::print_program;
use pfil_core::eval::ElabError;
use pfil_core::gen::Generator;
use pfil_core::ir::Program;
use pfil_core::simulate::{simulate, SimReport};
use pfil_core::solver::{Category, Verdict};
use pfil_core::typecheck::{check_component, CheckReport};
use pfil_core::Binding;

use crate::solver::backend;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub solver: Option<PathBuf>,
    pub timeout_ms: u64,
    /// Components checked at once, each with its own solver.
    pub jobs: usize,
}

impl Default for CheckOptions {
    fn default() -> CheckOptions {
        CheckOptions {
            solver: None,
            timeout_ms: 10_000,
            jobs: 1,
        }
    }
}

#[derive(Debug)]
pub struct CheckOutcome {
    pub reports: Vec<CheckReport>,
    /// Why the SMT backend was not used, when one was requested.
    pub fallback: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(CheckReport::passed)
    }

    pub fn exit_code(&self) -> i32 {
        let hard = self.reports.iter().any(|r| {
            !r.errors.is_empty() || r.results.iter().any(|(_, v)| matches!(v, Verdict::Refuted(_)))
        });
        if hard {
            EXIT_REFUTED
        } else if self.passed() {
            EXIT_OK
        } else {
            EXIT_UNKNOWN
        }
    }

    pub fn report(&self, component: &str) -> Option<&CheckReport> {
        self.reports.iter().find(|r| r.component == component)
    }
}

/// Type checks every component of `prog`.
pub fn check(prog: &Program, opts: &CheckOptions) -> CheckOutcome {
    let names: Vec<&str> = prog.components.iter().map(|c| c.sig.name.as_str()).collect();
    let jobs = opts.jobs.clamp(1, names.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, CheckReport)>> = Mutex::new(Vec::new());
    let fallback: Mutex<Option<String>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| {
                let (mut b, why) = backend(opts.solver.as_deref(), opts.timeout_ms);
                if why.is_some() {
                    *fallback.lock().unwrap() = why;
                }
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(name) = names.get(i) else { break };
                    let r = check_component(prog, name, b.as_mut());
                    results.lock().unwrap().push((i, r));
                }
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    CheckOutcome {
        reports: results.into_iter().map(|(_, r)| r).collect(),
        fallback: fallback.into_inner().unwrap(),
    }
}

#[derive(Clone, Debug)]
pub struct ElabOptions {
    pub entry: String,
    pub params: Binding,
    pub depth_limit: usize,
    pub dedup: bool,
}

#[derive(Debug)]
pub enum DriverError {
    UnknownEntry(String),
    Elab(ElabError),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for DriverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverError::UnknownEntry(e) => write!(f, "no component named `{e}`"),
            DriverError::Elab(e) => write!(f, "{e}"),
            DriverError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for DriverError {}

impl DriverError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::UnknownEntry(_) | DriverError::Io(..) => EXIT_USAGE,
            DriverError::Elab(_) => EXIT_REFUTED,
        }
    }
}

/// An elaborated, bundle-free program.
#[derive(Debug)]
pub struct Artifacts {
    pub elaborated: Elaborated,
    /// Externals first, then components; no bundles.
    pub concrete: Program,
    pub lints: Vec<String>,
}

impl Artifacts {
    pub fn concrete_text(&self) -> String {
        print_program(&self.concrete)
    }

    pub fn externals_text(&self) -> String {
        print_externals(&self.elaborated)
    }

    pub fn manifest(&self) -> String {
        self.elaborated.manifest()
    }

    /// Writes `<entry>.concrete.pfil`, `externals.pfil` and `manifest.txt`.
    pub fn write(&self, dir: &Path, entry: &str) -> Result<Vec<PathBuf>, DriverError> {
        fs::create_dir_all(dir).map_err(|e| DriverError::Io(dir.into(), e))?;
        let files = [
            (format!("{entry}.concrete.pfil"), self.concrete_text()),
            ("externals.pfil".to_string(), self.externals_text()),
            ("manifest.txt".to_string(), self.manifest()),
        ];
        let mut out = Vec::new();
        for (name, text) in files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| DriverError::Io(p.clone(), e))?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Elaborates `opts.entry` and eliminates bundles.
pub fn build(prog: &Program, opts: &ElabOptions, gen: &mut dyn Generator) -> Result<Artifacts, DriverError> {
    if prog.get(&opts.entry).is_none() {
        return Err(DriverError::UnknownEntry(opts.entry.clone()));
    }
    let elaborated = elaborate(
        prog,
        &opts.entry,
        &opts.params,
        gen,
        Options {
            depth_limit: opts.depth_limit,
            dedup: opts.dedup,
        },
    )
    .map_err(DriverError::Elab)?;
    let (concrete, lints) = eliminate_program(&elaborated.program()).map_err(DriverError::Elab)?;
    Ok(Artifacts {
        elaborated,
        concrete,
        lints,
    })
}

/// Categories the simulator can report.
pub const SIM_CATEGORIES: [Category; 6] = [
    Category::IntervalAvailability,
    Category::WellFormedInterval,
    Category::DelayPipelining,
    Category::InstanceAvailability,
    Category::InstanceConflict,
    Category::WidthMatch,
];

/// `category: pass|FAIL` lines followed by each violation.
pub fn sim_summary(r: &SimReport) -> String {
    let failed = r.failed_categories();
    let mut out = String::new();
    for c in SIM_CATEGORIES {
        let v = if failed.contains(&c) { "FAIL" } else { "pass" };
        out.push_str(&format!("{c}: {v}\n"));
    }
    for v in &r.violations {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn simulate_program(prog: &Program, horizon: Option<u64>) -> Result<SimReport, pfil_core::simulate::SimError> {
    let h = match horizon {
        Some(h) => h,
        None => pfil_core::simulate::required_horizon(prog)?.max(1),
    };
    simulate(prog, h)
}
