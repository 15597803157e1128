// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;

use common::{pfil, program, z3};

fn code(o: &std::process::Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let Some(z3) = z3() else { return };
    let dir = tempfile::tempdir().unwrap();
    let z = z3.to_str().unwrap();
    let bad = pfil(&["check", s(&program("alu_buggy.pfil")), "--solver", z], dir.path());
    assert_eq!(code(&bad), 1, "{}", stderr(&bad));
    assert!(stderr(&bad).contains("error[delay-pipelining]"), "{}", stderr(&bad));
    let ok = pfil(&["check", s(&program("shift.pfil")), "--solver", z], dir.path());
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(stderr(&ok).contains("Shift: ok"));
}

#[test]
fn parametric_without_solver_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["check", s(&program("shift.pfil"))], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("could not decide"));
    assert!(stderr(&o).contains("--solver"), "{}", stderr(&o));
}

#[test]
fn concrete_program_needs_no_solver() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["check", s(&program("alu_fixed.pfil"))], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = pfil(&["check", s(&program("sq2_conflict.pfil"))], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn broken_solver_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["check", s(&program("foo.pfil")), "--solver", "/nonexistent/z3"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning: cannot start solver"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let shift = program("shift.pfil");
    let o = pfil(&["elaborate", s(&shift), "--entry", "Nope", "--unchecked"], d);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no component named `Nope`"));
    assert_eq!(code(&pfil(&["check", "/nonexistent.pfil"], d)), 3);
    assert_eq!(code(&pfil(&["frobnicate"], d)), 3);
    assert_eq!(code(&pfil(&["elaborate", s(&shift), "--entry", "Shift", "--param", "N"], d)), 3);
    assert_eq!(code(&pfil(&["--help"], d)), 0);
}

#[test]
fn missing_parameter_is_elaboration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["elaborate", s(&program("shift.pfil")), "--entry", "Shift", "--unchecked"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = pfil(
        &["elaborate", s(&program("shift.pfil")), "--entry", "Shift", "--param", "N=0", "--unchecked"],
        dir.path(),
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn elaborate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(
        &["elaborate", s(&program("shift.pfil")), "--entry", "Shift", "--param", "N=4", "--unchecked"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/Shift.concrete.pfil")).unwrap();
    assert_eq!(text.matches(":= new Reg_32").count(), 4, "{text}");
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("entry Shift_4"), "{manifest}");
    assert!(dir.path().join("out/externals.pfil").is_file());

    let sim = pfil(&["simulate", "out/Shift.concrete.pfil"], dir.path());
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stdout));
    let out = String::from_utf8_lossy(&sim.stdout);
    assert!(out.contains("interval-availability: pass"));
}

#[test]
fn checked_and_unchecked_agree() {
    let Some(z3) = z3() else { return };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["elaborate", "", "--entry", "IterFFT", "--param", "N=8", "--param", "B=2"];
    let fft = program("fft.pfil");
    let mut checked = args.to_vec();
    checked[1] = s(&fft);
    checked.extend(["--solver", z3.to_str().unwrap()]);
    let mut unchecked = args.to_vec();
    unchecked[1] = s(&fft);
    unchecked.push("--unchecked");
    assert_eq!(code(&pfil(&checked, a.path())), 0);
    assert_eq!(code(&pfil(&unchecked, b.path())), 0);
    for f in ["IterFFT.concrete.pfil", "externals.pfil", "manifest.txt"] {
        assert_eq!(
            std::fs::read_to_string(a.path().join("out").join(f)).unwrap(),
            std::fs::read_to_string(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn failed_check_blocks_elaboration() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["elaborate", s(&program("sq2_conflict.pfil")), "--entry", "Sq2"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out").exists());
}

fn concrete(file: &str, entry: &str, dir: &Path) -> String {
    let out = dir.join(file);
    let o = pfil(
        &["elaborate", s(&program(file)), "--entry", entry, "--unchecked", "--out", s(&out)],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join(format!("{entry}.concrete.pfil")).display().to_string()
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = pfil(&["simulate", &concrete("sq2_delay1.pfil", "Sq2", d)], d);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("delay-pipelining: FAIL") && out.contains("instance-conflict: pass"), "{out}");
    let fixed = concrete("sq2_fixed.pfil", "Sq2", d);
    assert_eq!(code(&pfil(&["simulate", &fixed], d)), 0);
    let h0 = pfil(&["simulate", &fixed, "--horizon", "0"], d);
    assert_eq!(code(&h0), 3);
    assert!(stderr(&h0).contains("too small"), "{}", stderr(&h0));
    let para = pfil(&["simulate", s(&program("shift.pfil"))], d);
    assert_eq!(code(&para), 3);
    assert!(stderr(&para).contains("not concrete"));
}

#[test]
fn json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let o = pfil(&["check", s(&program("sq2_conflict.pfil")), "--report", s(&report)], dir.path());
    assert_eq!(code(&o), 1);
    let text = std::fs::read_to_string(&report).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!records.is_empty());
    let refuted: Vec<_> = records.iter().filter(|r| r["verdict"] == "refuted").collect();
    assert!(refuted.iter().any(|r| r["category"] == "instance-conflict"));
    assert!(records.iter().all(|r| r["component"].is_string() && r["location"].is_string()));
}

#[test]
fn cycle_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfil(&["check", s(&program("cycle.pfil"))], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cyclic output-parameter dependency: A -> B -> A"), "{}", stderr(&o));
}
