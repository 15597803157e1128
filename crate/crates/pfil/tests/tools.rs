// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use pfil::tools::{RunnerOptions, ToolRunner};
use pfil_core::gen::GenError;
use pfil_core::ir::Import;
use pfil_core::{Binding, Span};

fn import(alias: &str, path: &Path) -> Import {
    Import {
        alias: alias.into(),
        path: path.display().to_string(),
        span: Span::default(),
    }
}

fn params(pairs: &[(&str, u64)]) -> Binding {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

struct Setup {
    _tools: tempfile::TempDir,
    work: tempfile::TempDir,
    tool_dirs: Vec<PathBuf>,
}

impl Setup {
    fn new() -> Setup {
        let tools = common::tool_dir();
        let tool_dirs = vec![tools.path().to_path_buf()];
        Setup {
            _tools: tools,
            work: tempfile::tempdir().unwrap(),
            tool_dirs,
        }
    }

    fn opts(&self) -> RunnerOptions {
        let mut o = RunnerOptions::in_dir(&self.work.path().join("out"));
        o.tool_dirs = self.tool_dirs.clone();
        o
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.work.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn flopoco() -> PathBuf {
    common::root().join("tools/flopoco.toml")
}

#[test]
fn fpexp_generated_and_cached() {
    let s = Setup::new();
    let imp = import("flopoco", &flopoco());
    let p = params(&[("E", 16), ("M", 4)]);
    let runner = ToolRunner::new(s.opts());
    let first = runner.run(&imp, "FPExp", &p).unwrap();
    assert_eq!(first.module_name, "FPE16_4");
    assert_eq!(first.out_bindings.get("L"), Some(&3));
    assert!(!first.cached);
    let v = std::fs::read_to_string(&first.verilog_path).unwrap();
    assert!(v.contains("module FPE16_4"), "{v}");

    let again = runner.run(&imp, "FPExp", &p).unwrap();
    assert!(again.cached);
    assert_eq!(runner.runs(), 1);

    // A fresh runner over the same cache directory replays the entry.
    let replay = ToolRunner::new(s.opts());
    let hit = replay.run(&imp, "FPExp", &p).unwrap();
    assert_eq!(replay.runs(), 0);
    assert!(hit.cached);
    assert_eq!(hit.module_name, first.module_name);
    assert_eq!(hit.out_bindings, first.out_bindings);
    assert_eq!(hit.stdout, first.stdout);
    assert_eq!(std::fs::read_to_string(&hit.verilog_path).unwrap(), v);
}

#[test]
fn disabled_cache_reruns() {
    let s = Setup::new();
    let imp = import("flopoco", &flopoco());
    let p = params(&[("E", 8), ("M", 23)]);
    for _ in 0..2 {
        let mut o = s.opts();
        o.cache_dir = None;
        let r = ToolRunner::new(o);
        assert_eq!(r.run(&imp, "FPExp", &p).unwrap().out_bindings["L"], 4);
        assert_eq!(r.runs(), 1);
    }
}

#[test]
fn distinct_parameters_distinct_entries() {
    let s = Setup::new();
    let imp = import("flopoco", &flopoco());
    let r = ToolRunner::new(s.opts());
    let a = r.run(&imp, "FPExp", &params(&[("E", 16), ("M", 4)])).unwrap();
    let b = r.run(&imp, "FPExp", &params(&[("E", 4), ("M", 16)])).unwrap();
    assert_ne!(a.module_name, b.module_name);
    assert_eq!(r.runs(), 2);
}

#[test]
fn concurrent_requests_run_once() {
    let s = Setup::new();
    let imp = import("flopoco", &flopoco());
    let p = params(&[("E", 11), ("M", 52)]);
    let mut o = s.opts();
    o.jobs = 4;
    let runner = Arc::new(ToolRunner::new(o));
    let results: Vec<_> = std::thread::scope(|sc| {
        let hs: Vec<_> = (0..8)
            .map(|_| {
                let (r, imp, p) = (runner.clone(), imp.clone(), p.clone());
                sc.spawn(move || r.run(&imp, "FPExp", &p).unwrap())
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(runner.runs(), 1);
    assert_eq!(results.iter().filter(|r| !r.cached).count(), 1);
    assert!(results.iter().all(|r| r.module_name == "FPE11_52" && r.out_bindings["L"] == 5));
}

#[test]
fn parallel_distinct_requests() {
    let s = Setup::new();
    let cfg = s.config(
        "mul.toml",
        "path = \"mock_fpcore\"\n[modules.Mul]\nop = \"Mult\"\nparameters = [\"W\"]\ncli = \"Mult ${W}\"\nname = \"Mult_${W}\"\noutputs.L = \"depth\"\n",
    );
    let imp = import("mul", &cfg);
    let mut o = s.opts();
    o.jobs = 3;
    let runner = ToolRunner::new(o);
    let widths = [8u64, 16, 24, 32, 48, 64];
    let got: Vec<u64> = std::thread::scope(|sc| {
        let hs: Vec<_> = widths
            .iter()
            .map(|w| {
                let (r, imp) = (&runner, &imp);
                sc.spawn(move || r.run(imp, "Mul", &params(&[("W", *w)])).unwrap().out_bindings["L"])
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let expect: Vec<u64> = widths.iter().map(|w| w.div_ceil(16) + 1).collect();
    assert_eq!(got, expect);
    assert_eq!(runner.runs(), widths.len());
}

fn fpexp_config(s: &Setup, name: &str, body: &str) -> Import {
    import("t", &s.config(name, &format!("path = \"mock_fpcore\"\n[modules.FPExp]\nparameters = [\"E\", \"M\"]\n{body}")))
}

#[test]
fn tool_failure_reported() {
    let s = Setup::new();
    let imp = fpexp_config(&s, "bad.toml", "op = \"X\"\ncli = \"Bogus ${M} ${E}\"\nname = \"X\"\noutputs.L = \"depth\"\n");
    let r = ToolRunner::new(s.opts());
    match r.run(&imp, "FPExp", &params(&[("E", 8), ("M", 8)])) {
        Err(GenError::ToolFailed { stderr, .. }) => assert!(stderr.contains("Bogus"), "{stderr}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_scrape_line() {
    let s = Setup::new();
    let imp = fpexp_config(
        &s,
        "scrape.toml",
        "op = \"FPExp\"\ncli = \"FPExp ${M} ${E}\"\nname = \"FPE${E}_${M}\"\noutputs.L = \"latency\"\n",
    );
    let r = ToolRunner::new(s.opts());
    assert_eq!(
        r.run(&imp, "FPExp", &params(&[("E", 8), ("M", 8)])).unwrap_err(),
        GenError::ScrapeMissing { key: "latency".into() }
    );
}

#[test]
fn missing_verilog() {
    let s = Setup::new();
    let imp = fpexp_config(
        &s,
        "name.toml",
        "op = \"FPExp\"\ncli = \"FPExp ${M} ${E}\"\nname = \"Exp${E}\"\noutputs.L = \"depth\"\n",
    );
    let r = ToolRunner::new(s.opts());
    assert!(matches!(
        r.run(&imp, "FPExp", &params(&[("E", 8), ("M", 8)])),
        Err(GenError::MissingVerilog(_))
    ));
    // Failures are not cached.
    assert!(!s.work.path().join("out/.gen-cache").exists()
        || std::fs::read_dir(s.work.path().join("out/.gen-cache")).unwrap().next().is_none());
}

#[test]
fn missing_executable() {
    let s = Setup::new();
    let cfg = s.config(
        "none.toml",
        "path = \"no-such-generator\"\n[modules.M]\nparameters = []\ncli = \"x\"\nname = \"M\"\n",
    );
    let r = ToolRunner::new(s.opts());
    assert!(matches!(r.run(&import("n", &cfg), "M", &Binding::new()), Err(GenError::Io(_))));
}

#[test]
fn relative_tool_path_resolves_against_config() {
    let s = Setup::new();
    let bin = s.work.path().join("bin");
    std::fs::create_dir(&bin).unwrap();
    std::os::unix::fs::symlink(common::fixtures().join("mock_xls"), bin.join("xls")).unwrap();
    let cfg = s.config(
        "xls.toml",
        "path = \"bin/xls\"\n[modules.Butterfly]\nparameters = [\"E\", \"M\"]\ncli = \"Butterfly ${E} ${M} 3\"\nname = \"Butterfly_${E}_${M}\"\noutputs.L = \"latency\"\n",
    );
    let mut o = s.opts();
    o.tool_dirs.clear();
    let r = ToolRunner::new(o);
    let got = r.run(&import("xls", &cfg), "Butterfly", &params(&[("E", 8), ("M", 23)])).unwrap();
    assert_eq!(got.out_bindings["L"], 3);
    assert_eq!(got.module_name, "Butterfly_8_23");
}

#[test]
fn missing_parameter() {
    let s = Setup::new();
    let r = ToolRunner::new(s.opts());
    assert_eq!(
        r.run(&import("flopoco", &flopoco()), "FPExp", &params(&[("E", 8)])).unwrap_err(),
        GenError::MissingParam("M".into())
    );
}

// The mocks themselves.

fn mock(args: &[&str], dir: &Path) -> (String, bool) {
    let out = Command::new(common::fixtures().join("mock_fpcore"))
        .args(args)
        .env("GEN_WORKDIR", dir)
        .output()
        .unwrap();
    (String::from_utf8(out.stdout).unwrap(), out.status.success())
}

fn depth(stdout: &str) -> u64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("depth = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn mock_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (x, ok) = mock(&["FPAdd", "23", "8", "300"], a.path());
    let (y, _) = mock(&["FPAdd", "23", "8", "300"], b.path());
    assert!(ok);
    assert_eq!(x, y);
    assert_eq!(
        std::fs::read(a.path().join("FPA8_23.v")).unwrap(),
        std::fs::read(b.path().join("FPA8_23.v")).unwrap()
    );
}

#[test]
fn mock_depth_grows_with_frequency() {
    let d = tempfile::tempdir().unwrap();
    for op in ["FPExp", "FPAdd", "FPMult", "FPSub"] {
        let depths: Vec<u64> = [0, 100, 200, 400, 800]
            .iter()
            .map(|f| depth(&mock(&[op, "23", "8", &f.to_string()], d.path()).0))
            .collect();
        assert!(depths.windows(2).all(|w| w[0] <= w[1]), "{op}: {depths:?}");
        assert!(depths[4] > depths[0]);
    }
}

#[test]
fn mock_rejects_bad_requests() {
    let d = tempfile::tempdir().unwrap();
    assert!(!mock(&["FPLog", "4", "16"], d.path()).1);
    assert!(!mock(&["FPExp", "x", "16"], d.path()).1);
    assert!(!mock(&["Mult"], d.path()).1);
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 0);
}
