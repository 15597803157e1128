// SPDX-License-Identifier: Apache-2.0

//! Generator tools: configuration model, templates, output scraping and
//! concrete signatures for generated modules.
//!
//! Running a tool needs a process and a filesystem, so it lives behind the
//! [`Generator`] trait; the std crate provides the implementation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::eval::{check_out_constraints, concrete_signature, ElabError};
use crate::expr::Binding;
use crate::ir::{Import, SigKind, Signature};

/// One tool: an executable and the modules it can produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToolConfig {
    pub path: String,
    pub modules: BTreeMap<String, ModuleSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleSpec {
    /// Tool-side operation name, informational.
    pub op: Option<String>,
    pub parameters: Vec<String>,
    /// Argument template, split on whitespace after interpolation.
    pub cli: String,
    /// Template for the generated Verilog module name.
    pub name: String,
    /// Output parameter -> key scraped from the tool's stdout.
    pub outputs: BTreeMap<String, String>,
    /// Template for the produced Verilog file, relative to the scratch
    /// directory. `${name}` is the module name.
    pub file: String,
}

pub const DEFAULT_FILE: &str = "${name}.v";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenError {
    /// A `${P}` naming something that is not a parameter.
    UndeclaredParam { module: String, param: String },
    UnterminatedTemplate(String),
    UnknownModule { tool: String, module: String },
    /// Config and type signature disagree.
    Mismatch { module: String, message: String },
    MissingParam(String),
    ScrapeMissing { key: String },
    ScrapeValue { key: String, text: String },
    ToolFailed { status: String, stderr: String },
    MissingVerilog(String),
    Io(String),
    Config(String),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::UndeclaredParam { module, param } => {
                write!(f, "module `{module}`: template uses undeclared parameter `{param}`")
            }
            GenError::UnterminatedTemplate(t) => write!(f, "unterminated `${{` in template `{t}`"),
            GenError::UnknownModule { tool, module } => {
                write!(f, "tool `{tool}` has no module `{module}`")
            }
            GenError::Mismatch { module, message } => write!(f, "module `{module}`: {message}"),
            GenError::MissingParam(p) => write!(f, "no value for parameter `{p}`"),
            GenError::ScrapeMissing { key } => {
                write!(f, "tool output has no line `{key} = <n>`")
            }
            GenError::ScrapeValue { key, text } => {
                write!(f, "tool output for `{key}` is not a natural number: `{text}`")
            }
            GenError::ToolFailed { status, stderr } => {
                write!(f, "tool exited with {status}")?;
                if !stderr.trim().is_empty() {
                    write!(f, ": {}", stderr.trim())?;
                }
                Ok(())
            }
            GenError::MissingVerilog(p) => write!(f, "tool did not produce `{p}`"),
            GenError::Io(m) | GenError::Config(m) => f.write_str(m),
        }
    }
}

impl core::error::Error for GenError {}

/// Names referenced as `${P}` in `template`.
pub fn template_params(template: &str) -> Result<Vec<String>, GenError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| GenError::UnterminatedTemplate(template.into()))?;
        out.push(after[..end].to_string());
        rest = &after[end + 1..];
    }
    Ok(out)
}

/// Replaces each `${P}` with `values[P]`.
pub fn interpolate(template: &str, values: &BTreeMap<String, String>) -> Result<String, GenError> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| GenError::UnterminatedTemplate(template.into()))?;
        let key = &after[..end];
        let v = values
            .get(key)
            .ok_or_else(|| GenError::MissingParam(key.into()))?;
        out.push_str(v);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn strings(b: &Binding) -> BTreeMap<String, String> {
    b.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

impl ModuleSpec {
    /// Every template names a declared parameter (`file` may also use
    /// `${name}`).
    pub fn validate(&self, module: &str) -> Result<(), GenError> {
        let check = |t: &str, extra: &[&str]| -> Result<(), GenError> {
            for p in template_params(t)? {
                if !self.parameters.contains(&p) && !extra.contains(&p.as_str()) {
                    return Err(GenError::UndeclaredParam {
                        module: module.into(),
                        param: p,
                    });
                }
            }
            Ok(())
        };
        check(&self.cli, &[])?;
        check(&self.name, &[])?;
        check(&self.file, &["name"])?;
        let mut seen = alloc::collections::BTreeSet::new();
        for p in &self.parameters {
            if !seen.insert(p) {
                return Err(GenError::Mismatch {
                    module: module.into(),
                    message: format!("parameter `{p}` listed twice"),
                });
            }
        }
        Ok(())
    }

    /// The config agrees with the module's type signature.
    pub fn validate_against(&self, module: &str, sig: &Signature) -> Result<(), GenError> {
        let mismatch = |message: String| GenError::Mismatch {
            module: module.into(),
            message,
        };
        let sig_params: Vec<&str> = sig.params.iter().map(|p| p.name.as_str()).collect();
        let cfg: Vec<&str> = self.parameters.iter().map(String::as_str).collect();
        if sig_params != cfg {
            return Err(mismatch(format!(
                "config parameters [{}] differ from signature parameters [{}]",
                cfg.join(", "),
                sig_params.join(", ")
            )));
        }
        let outs: Vec<&str> = self.outputs.keys().map(String::as_str).collect();
        let mut sig_outs: Vec<&str> = sig.out_params.iter().map(String::as_str).collect();
        sig_outs.sort_unstable();
        if outs != sig_outs {
            return Err(mismatch(format!(
                "config outputs [{}] differ from signature output parameters [{}]",
                outs.join(", "),
                sig_outs.join(", ")
            )));
        }
        Ok(())
    }

    /// Command-line arguments for one parameter binding.
    pub fn argv(&self, params: &Binding) -> Result<Vec<String>, GenError> {
        let line = interpolate(&self.cli, &strings(params))?;
        Ok(line.split_whitespace().map(String::from).collect())
    }

    pub fn module_name(&self, params: &Binding) -> Result<String, GenError> {
        interpolate(&self.name, &strings(params))
    }

    pub fn file_name(&self, params: &Binding, module_name: &str) -> Result<String, GenError> {
        let mut vals = strings(params);
        vals.insert("name".into(), module_name.into());
        interpolate(&self.file, &vals)
    }

    /// Output-parameter values from the tool's stdout.
    pub fn scrape_outputs(&self, stdout: &str) -> Result<Binding, GenError> {
        self.outputs
            .iter()
            .map(|(param, key)| Ok((param.clone(), scrape(stdout, key)?)))
            .collect()
    }
}

impl ToolConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.path.trim().is_empty() {
            return Err(GenError::Config("`path` is empty".into()));
        }
        for (name, m) in &self.modules {
            m.validate(name)?;
        }
        Ok(())
    }

    pub fn module(&self, tool: &str, name: &str) -> Result<&ModuleSpec, GenError> {
        self.modules.get(name).ok_or_else(|| GenError::UnknownModule {
            tool: tool.into(),
            module: name.into(),
        })
    }
}

/// Value of the last line of the form `key = <digits>` (surrounding
/// whitespace allowed).
pub fn scrape(stdout: &str, key: &str) -> Result<u64, GenError> {
    let mut found = None;
    for line in stdout.lines() {
        let Some((lhs, rhs)) = line.split_once('=') else {
            continue;
        };
        if lhs.trim() != key {
            continue;
        }
        let rhs = rhs.trim();
        if rhs.is_empty() || !rhs.bytes().all(|b| b.is_ascii_digit()) {
            return Err(GenError::ScrapeValue {
                key: key.into(),
                text: rhs.into(),
            });
        }
        found = Some(rhs.parse::<u64>().map_err(|_| GenError::ScrapeValue {
            key: key.into(),
            text: rhs.into(),
        })?);
    }
    found.ok_or_else(|| GenError::ScrapeMissing { key: key.into() })
}

/// What one tool run produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenResult {
    pub verilog_path: String,
    pub module_name: String,
    pub out_bindings: Binding,
    pub stdout: String,
    pub stderr: String,
    pub cache_key: CacheKey,
    /// Replayed from the cache without running the tool.
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub tool: String,
    pub module: String,
    pub params: Vec<(String, u64)>,
}

/// Runs generator tools during elaboration.
pub trait Generator {
    /// Produces `module` of the tool imported as `import` for `params`
    /// (the module's input parameters by name).
    fn generate(&mut self, import: &Import, module: &str, params: &Binding) -> Result<GenResult, GenError>;
}

/// A generator that refuses every request.
pub struct NoTools;

impl Generator for NoTools {
    fn generate(&mut self, import: &Import, module: &str, _: &Binding) -> Result<GenResult, GenError> {
        Err(GenError::Config(format!(
            "no generator available for `{}.{module}`",
            import.alias
        )))
    }
}

/// The external declaration for one generated instance.
///
/// Parameters, `let`s and output parameters are replaced by their values
/// and the name by the tool's module name.
pub fn concretize_signature(
    sig: &Signature,
    params: &Binding,
    outs: &Binding,
    module_name: &str,
) -> Result<Signature, ElabError> {
    let mut full = crate::eval::bind_params(
        sig,
        &sig.params
            .iter()
            .map(|p| params.get(&p.name).copied().unwrap_or(0))
            .collect::<Vec<_>>(),
    )?;
    full.extend(outs.iter().map(|(k, v)| (k.clone(), *v)));
    check_out_constraints(sig, &full)?;
    let mut c = concrete_signature(sig, &full, module_name)?;
    c.kind = SigKind::External;
    Ok(c)
}
