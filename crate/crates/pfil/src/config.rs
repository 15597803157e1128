// SPDX-License-Identifier: Apache-2.0

//! Generator tool configuration files.
//!
//! ```toml
//! path = "flopoco"
//! [modules.FPExp]
//! op = "FPExp"
//! parameters = ["E", "M"]
//! cli = "FPExp ${M} ${E}"
//! name = "FPE${E}_${M}"
//! outputs.L = "depth"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use pfil_core::gen::{GenError, ModuleSpec, ToolConfig, DEFAULT_FILE};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTool {
    path: String,
    #[serde(default)]
    modules: BTreeMap<String, RawModule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    op: Option<String>,
    parameters: Vec<String>,
    cli: String,
    name: String,
    #[serde(default)]
    outputs: BTreeMap<String, String>,
    file: Option<String>,
}

pub fn parse_config(text: &str) -> Result<ToolConfig, GenError> {
    let raw: RawTool = toml::from_str(text).map_err(|e| {
        let mut msg = e.to_string();
        if msg.contains("duplicate key") {
            msg.push_str(
                "\nhint: a module table takes one `name` (the generated module name); \
                 put the tool-side operation in `op`",
            );
        }
        GenError::Config(msg.trim_end().to_string())
    })?;
    let cfg = ToolConfig {
        path: raw.path,
        modules: raw
            .modules
            .into_iter()
            .map(|(k, m)| {
                (
                    k,
                    ModuleSpec {
                        op: m.op,
                        parameters: m.parameters,
                        cli: m.cli,
                        name: m.name,
                        outputs: m.outputs,
                        file: m.file.unwrap_or_else(|| DEFAULT_FILE.to_string()),
                    },
                )
            })
            .collect(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ToolConfig, GenError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GenError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        GenError::Config(m) => GenError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOPOCO: &str = r#"
path = "flopoco"
# Module definition
[modules.FPExp]
op = "FPExp"
parameters = ["E", "M"]
cli = "FPExp ${M} ${E}"
name = "FPE${E}_${M}"
# Extract output
outputs.L = "depth"
"#;

    #[test]
    fn fpexp_table() {
        let c = parse_config(FLOPOCO).unwrap();
        assert_eq!(c.path, "flopoco");
        let m = &c.modules["FPExp"];
        assert_eq!(m.parameters, ["E", "M"]);
        assert_eq!(m.outputs["L"], "depth");
        assert_eq!(m.op.as_deref(), Some("FPExp"));
        assert_eq!(m.file, "${name}.v");
    }

    #[test]
    fn undeclared_parameter_rejected() {
        let bad = FLOPOCO.replace("FPExp ${M} ${E}", "FPExp ${Q}");
        assert!(matches!(parse_config(&bad), Err(GenError::UndeclaredParam { param, .. }) if param == "Q"));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let extra = FLOPOCO.replace("op = ", "colour = \"red\"\nop = ");
        let e = parse_config(&extra).unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
        let missing = FLOPOCO.replace("cli = \"FPExp ${M} ${E}\"\n", "");
        let e = parse_config(&missing).unwrap_err().to_string();
        assert!(e.contains("cli"), "{e}");
    }

    #[test]
    fn duplicate_name_gets_hint() {
        let dup = FLOPOCO.replace("op = \"FPExp\"", "name = \"FPExp\"");
        let e = parse_config(&dup).unwrap_err().to_string();
        assert!(e.contains("hint"), "{e}");
    }

    #[test]
    fn two_modules() {
        let two = format!(
            "{FLOPOCO}\n[modules.FPAdd]\nparameters = [\"E\", \"M\", \"F\"]\n\
             cli = \"FPAdd ${{M}} ${{E}} ${{F}}\"\nname = \"FPA${{E}}_${{M}}_${{F}}\"\noutputs.L = \"depth\"\n"
        );
        let c = parse_config(&two).unwrap();
        assert_eq!(c.modules.keys().collect::<Vec<_>>(), ["FPAdd", "FPExp"]);
    }
}
