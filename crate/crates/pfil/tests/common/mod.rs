// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::fmt::Write;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use pfil_core::solver::{Category, ConcreteBackend};
use pfil_core::typecheck::check_program;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn program(name: &str) -> PathBuf {
    root().join("programs").join(name)
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn z3() -> Option<PathBuf> {
    let p = PathBuf::from("/usr/local/bin/z3");
    p.exists().then_some(p)
}

/// A directory holding the mock tools under the names the configs use.
pub fn tool_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, target) in [
        ("flopoco", "mock_fpcore"),
        ("mock_fpcore", "mock_fpcore"),
        ("xls-gen", "mock_xls"),
    ] {
        std::os::unix::fs::symlink(fixtures().join(target), dir.path().join(name)).unwrap();
    }
    dir
}

pub fn pfil(args: &[&str], cwd: &Path) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_pfil"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PATH")
        .env("PATH", "/usr/bin:/bin")
        .output()
        .unwrap()
}

// Random parameter-free programs: one event, a small library of external
// components and a top-level component wiring them together.

#[derive(Clone, Debug)]
pub struct Ext {
    pub delay: u64,
    pub in_len: u64,
    pub latency: u64,
    pub width: u64,
}

#[derive(Clone, Debug)]
pub struct Inst {
    pub ext: usize,
    pub avail: Option<(u64, u64)>,
}

#[derive(Clone, Debug)]
pub struct Invoke {
    pub inst: usize,
    pub time: u64,
    /// Source indices; resolved modulo the sources visible at this point.
    pub args: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct TopPort {
    pub start: u64,
    pub len: u64,
    pub width: u64,
}

#[derive(Clone, Debug)]
pub struct RandomProgram {
    pub exts: Vec<Ext>,
    pub delay: u64,
    pub inputs: Vec<TopPort>,
    pub outputs: Vec<(TopPort, usize)>,
    pub insts: Vec<Inst>,
    pub invokes: Vec<Invoke>,
    /// 0: as drawn; 1: retimed so that it checks; 2: retimed, then one
    /// mutation applied.
    pub mode: u8,
    pub mutation: (u8, usize),
}

fn width() -> impl Strategy<Value = u64> {
    prop_oneof![4 => Just(8u64), 1 => Just(16u64)]
}

fn ext() -> impl Strategy<Value = Ext> {
    (1u64..=4, 0u64..=3, width()).prop_flat_map(|(delay, latency, width)| {
        (1..=delay).prop_map(move |in_len| Ext {
            delay,
            in_len,
            latency,
            width,
        })
    })
}

fn port(delay: u64) -> impl Strategy<Value = TopPort> {
    (0u64..=3, 1..=delay, width()).prop_map(|(start, len, width)| TopPort { start, len, width })
}

pub fn random_program() -> impl Strategy<Value = RandomProgram> {
    (prop::collection::vec(ext(), 1..=3), 1u64..=4).prop_flat_map(|(exts, delay)| {
        let n = exts.len();
        let inst = (0..n, prop::option::weighted(0.3, (0u64..=3, 1u64..=6)))
            .prop_map(|(ext, a)| Inst {
                ext,
                avail: a.map(|(s, len)| (s, s + len)),
            });
        (
            Just(exts),
            Just(delay),
            prop::collection::vec(port(delay), 1..=3),
            prop::collection::vec(inst, 1..=6),
        )
            .prop_flat_map(|(exts, delay, inputs, insts)| {
                let m = insts.len();
                let invoke = (0..m, 0u64..=6, any::<[usize; 2]>()).prop_map(|(inst, time, args)| Invoke {
                    inst,
                    time,
                    args,
                });
                (
                    Just(exts),
                    Just(delay),
                    Just(inputs),
                    prop::collection::vec((port(delay), any::<usize>()), 1..=2),
                    Just(insts),
                    prop::collection::vec(invoke, 0..=10),
                    (0u8..3, (0u8..5, any::<usize>())),
                )
            })
            .prop_map(|(exts, delay, inputs, outputs, insts, invokes, (mode, mutation))| RandomProgram {
                exts,
                delay,
                inputs,
                outputs,
                insts,
                invokes,
                mode,
                mutation,
            })
    })
}

fn interval(ev: &str, start: u64, end: u64) -> String {
    format!("['{ev}+{start}, '{ev}+{end}]")
}

impl RandomProgram {
    /// Retimes the program so that every check holds: one use per
    /// instance, both arguments from one source, invoked when it starts.
    fn aligned(&self) -> RandomProgram {
        let mut p = self.clone();
        for e in &mut p.exts {
            e.width = 8;
            e.in_len = 1;
        }
        p.delay = p.exts.iter().map(|e| e.delay).chain([p.delay]).max().unwrap();
        for port in p.inputs.iter_mut() {
            port.width = 8;
        }
        for i in &mut p.insts {
            i.avail = None;
        }
        let mut windows: Vec<u64> = p.inputs.iter().map(|x| x.start).collect();
        let mut used = vec![false; p.insts.len()];
        let mut kept = Vec::new();
        for v in &self.invokes {
            if std::mem::replace(&mut used[v.inst], true) {
                continue;
            }
            let src = v.args[0] % windows.len();
            let t = windows[src];
            let ext = &self.exts[self.insts[v.inst].ext];
            if self.insts[v.inst].avail.is_some() {
                p.insts[v.inst].avail = Some((t, t + ext.delay));
            }
            windows.push(t + ext.latency);
            kept.push(Invoke {
                inst: v.inst,
                time: t,
                args: [src, src],
            });
        }
        p.invokes = kept;
        for (port, src) in p.outputs.iter_mut() {
            *src %= windows.len();
            *port = TopPort {
                start: windows[*src],
                len: 1,
                width: 8,
            };
        }
        p
    }

    fn mutated(&self) -> RandomProgram {
        let mut p = self.aligned();
        let (kind, at) = self.mutation;
        let (n, outs, exts) = (p.invokes.len(), p.outputs.len(), p.exts.len());
        match kind {
            0 if n > 0 => p.invokes[at % n].time += 1,
            1 => p.outputs[at % outs].0.start += 1,
            2 if p.delay > 1 => p.delay -= 1,
            3 => p.exts[at % exts].width = 16,
            _ if n > 0 => {
                let v = p.invokes[at % n].clone();
                p.invokes.push(Invoke {
                    time: v.time + (at as u64 % 3),
                    ..v
                });
            }
            _ => p.outputs[0].0.start += 1,
        }
        p
    }

    /// The program as it is rendered.
    pub fn shaped(&self) -> RandomProgram {
        match self.mode {
            0 => self.clone(),
            1 => self.aligned(),
            _ => self.mutated(),
        }
    }

    pub fn text(&self) -> String {
        self.shaped().render()
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for (k, e) in self.exts.iter().enumerate() {
            let iv = interval("T", 0, e.in_len);
            let _ = writeln!(
                s,
                "ext comp E{k}<'T:{}>(a: {iv} {w}, b: {iv} {w}) -> (o: {} {w});",
                e.delay,
                interval("T", e.latency, e.latency + 1),
                w = e.width
            );
        }
        let ins: Vec<String> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(k, p)| format!("x{k}: {} {}", interval("G", p.start, p.start + p.len), p.width))
            .collect();
        let outs: Vec<String> = self
            .outputs
            .iter()
            .enumerate()
            .map(|(k, (p, _))| format!("y{k}: {} {}", interval("G", p.start, p.start + p.len), p.width))
            .collect();
        let _ = writeln!(s, "comp Top<'G:{}>({}) -> ({}) {{", self.delay, ins.join(", "), outs.join(", "));
        for (k, i) in self.insts.iter().enumerate() {
            let avail = match i.avail {
                Some((a, b)) => format!(" in {}", interval("G", a, b)),
                None => String::new(),
            };
            let _ = writeln!(s, "  I{k} := new E{}{avail};", i.ext);
        }
        let mut sources: Vec<String> = (0..self.inputs.len()).map(|k| format!("x{k}")).collect();
        for (k, v) in self.invokes.iter().enumerate() {
            let a = &sources[v.args[0] % sources.len()];
            let b = &sources[v.args[1] % sources.len()];
            let _ = writeln!(s, "  v{k} := I{}<'G+{}>({a}, {b});", v.inst, v.time);
            sources.push(format!("v{k}.o"));
        }
        for (k, (_, src)) in self.outputs.iter().enumerate() {
            let _ = writeln!(s, "  y{k} = {};", sources[src % sources.len()]);
        }
        s.push_str("}\n");
        s
    }
}

/// Failed categories according to the type checker and to the simulator,
/// restricted to what the simulator models.
pub fn verdicts(text: &str) -> (Vec<Category>, Vec<Category>) {
    let prog = pfil_core::parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let mut checker = std::collections::BTreeSet::new();
    for r in check_program(&prog, &mut ConcreteBackend) {
        assert!(r.errors.is_empty(), "{:?}\n{text}", r.errors);
        assert!(
            r.failures().all(|(_, v)| matches!(v, pfil_core::solver::Verdict::Refuted(_))),
            "undecided obligation in a concrete program\n{text}"
        );
        checker.extend(r.failed_categories());
    }
    let sim = pfil::driver::simulate_program(&prog, None).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let sim: Vec<Category> = sim.failed_categories().into_iter().collect();
    (checker.into_iter().collect(), sim)
}

/// The first `n` programs of a fixed deterministic stream.
pub fn program_stream(n: usize) -> Vec<RandomProgram> {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strat = random_program();
    (0..n).map(|_| strat.new_tree(&mut runner).unwrap().current()).collect()
}
