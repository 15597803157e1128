// SPDX-License-Identifier: Apache-2.0

//! SMT solver child process speaking SMT-LIB 2 over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use pfil_core::solver::smt::{is_complete, SmtBackend, SmtError, SmtIo};
use pfil_core::solver::{Backend, ConcreteBackend};

/// Extra time allowed on top of the solver's own timeout before the
/// process is considered hung.
const GRACE: Duration = Duration::from_secs(5);

pub struct SolverProcess {
    path: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    lines: Option<Receiver<String>>,
}

/// Arguments that put a known solver into interactive SMT-LIB mode.
pub fn default_args(path: &Path) -> Vec<String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if stem.contains("cvc5") || stem.contains("cvc4") {
        vec!["--lang=smt2".into(), "--incremental".into(), "--produce-models".into()]
    } else {
        vec!["-in".into(), "-smt2".into()]
    }
}

impl SolverProcess {
    pub fn spawn(path: &Path, timeout_ms: u64) -> Result<SolverProcess, SmtError> {
        let mut p = SolverProcess {
            path: path.to_path_buf(),
            args: default_args(path),
            timeout: Duration::from_millis(timeout_ms) + GRACE,
            child: None,
            stdin: None,
            lines: None,
        };
        p.start()?;
        Ok(p)
    }

    fn start(&mut self) -> Result<(), SmtError> {
        let mut child = Command::new(&self.path)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError(format!("cannot start solver `{}`: {e}", self.path.display())))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.stdin = child.stdin.take();
        self.child = Some(child);
        self.lines = Some(rx);
        Ok(())
    }

    fn kill(&mut self) {
        self.stdin = None;
        self.lines = None;
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl SmtIo for SolverProcess {
    fn send(&mut self, line: &str) -> Result<(), SmtError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| SmtError("solver is not running".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| SmtError(format!("write to solver failed: {e}")))
    }

    fn read(&mut self) -> Result<String, SmtError> {
        let rx = self
            .lines
            .as_ref()
            .ok_or_else(|| SmtError("solver is not running".into()))?;
        let mut text = String::new();
        loop {
            match rx.recv_timeout(self.timeout) {
                Ok(line) => {
                    text.push_str(&line);
                    text.push('\n');
                    if is_complete(&text) {
                        return Ok(text);
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(SmtError(format!(
                        "solver did not answer within {} ms",
                        self.timeout.as_millis()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(SmtError("solver exited".into()));
                }
            }
        }
    }

    fn restart(&mut self) -> Result<(), SmtError> {
        self.kill();
        self.start()
    }
}

impl Drop for SolverProcess {
    fn drop(&mut self) {
        if let Some(stdin) = self.stdin.as_mut() {
            let _ = writeln!(stdin, "(exit)");
        }
        self.kill();
    }
}

/// An SMT backend when `solver` is given and starts, the concrete
/// evaluator otherwise. The second value explains a fallback.
pub fn backend(solver: Option<&Path>, timeout_ms: u64) -> (Box<dyn Backend>, Option<String>) {
    let Some(path) = solver else {
        return (Box::new(ConcreteBackend), None);
    };
    match SolverProcess::spawn(path, timeout_ms) {
        Ok(p) => (Box::new(SmtBackend::new(p, timeout_ms)), None),
        Err(e) => (Box::new(ConcreteBackend), Some(e.0)),
    }
}
