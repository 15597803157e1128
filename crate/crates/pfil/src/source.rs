// SPDX-License-Identifier: Apache-2.0

//! Loading source files into one program.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pfil_core::ir::{Program, Span};
use pfil_core::parse::parse;
use pfil_core::resolve::resolve;

/// Which file each component came from.
#[derive(Clone, Debug, Default)]
pub struct SourceMap {
    pub files: BTreeMap<String, PathBuf>,
}

impl SourceMap {
    /// `file:line:col` for a span inside `component`.
    pub fn locate(&self, component: &str, span: Span) -> String {
        match self.files.get(component) {
            Some(f) => format!("{}:{span}", f.display()),
            None => span.to_string(),
        }
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io(PathBuf, std::io::Error),
    Parse(PathBuf, pfil_core::ParseError),
    Resolve(Vec<String>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            LoadError::Parse(p, e) => write!(f, "{}:{e}", p.display()),
            LoadError::Resolve(errs) => f.write_str(&errs.join("\n")),
        }
    }
}

impl std::error::Error for LoadError {}

/// Parses one file. Generator import paths are made relative to the
/// file's directory.
pub fn parse_file(path: &Path) -> Result<Program, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.into(), e))?;
    let mut prog = parse(&text).map_err(|e| LoadError::Parse(path.into(), e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    for imp in &mut prog.imports {
        let p = Path::new(&imp.path);
        if p.is_relative() {
            imp.path = dir.join(p).display().to_string();
        }
    }
    Ok(prog)
}

/// Parses and resolves `files` as one program.
pub fn load(files: &[PathBuf]) -> Result<(Program, SourceMap), LoadError> {
    let mut prog = Program::default();
    let mut map = SourceMap::default();
    for f in files {
        let p = parse_file(f)?;
        for c in &p.components {
            map.files.insert(c.sig.name.clone(), f.clone());
        }
        prog = prog.merge(p);
    }
    resolve(&prog).map_err(|errs| {
        LoadError::Resolve(
            errs.iter()
                .map(|e| match map.files.get(&e.component) {
                    Some(f) => format!("{}:{e}", f.display()),
                    None => e.to_string(),
                })
                .collect(),
        )
    })?;
    Ok((prog, map))
}
