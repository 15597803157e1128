// SPDX-License-Identifier: Apache-2.0

//! Runs generator tools for elaboration.
//!
//! Each request runs the tool in its own scratch directory (also exported
//! as `GEN_WORKDIR`), scrapes output parameters from stdout and copies the
//! produced Verilog into the output directory. Results are cached on disk
//! by a hash of the tool, module, parameters and configuration text, and
//! concurrent requests for one key run the tool once.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pfil_core::expr::Binding;
use pfil_core::gen::{CacheKey, GenError, GenResult, Generator, ToolConfig};
use pfil_core::ir::Import;

use crate::config::parse_config;

pub struct RunnerOptions {
    /// Where produced Verilog files are copied.
    pub out_dir: PathBuf,
    /// Persistent cache; `None` disables it.
    pub cache_dir: Option<PathBuf>,
    /// Parent of the per-request scratch directories.
    pub scratch_dir: PathBuf,
    /// Maximum number of tool processes at once.
    pub jobs: usize,
    /// Searched before `PATH` for bare tool names.
    pub tool_dirs: Vec<PathBuf>,
}

impl RunnerOptions {
    /// Cache and scratch space under `out_dir`.
    pub fn in_dir(out_dir: &Path) -> RunnerOptions {
        RunnerOptions {
            out_dir: out_dir.join("verilog"),
            cache_dir: Some(out_dir.join(".gen-cache")),
            scratch_dir: out_dir.join(".gen-scratch"),
            jobs: 1,
            tool_dirs: Vec::new(),
        }
    }
}

struct Loaded {
    config: ToolConfig,
    text: String,
    dir: PathBuf,
}

type Slot = Arc<OnceLock<Result<GenResult, GenError>>>;

pub struct ToolRunner {
    opts: RunnerOptions,
    configs: Mutex<HashMap<PathBuf, Arc<Loaded>>>,
    inflight: Mutex<HashMap<String, Slot>>,
    permits: Mutex<usize>,
    freed: Condvar,
    runs: AtomicUsize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    module_name: String,
    out_bindings: BTreeMap<String, u64>,
    stdout: String,
    stderr: String,
    verilog_file: String,
}

fn io_err(what: &Path, e: std::io::Error) -> GenError {
    GenError::Io(format!("{}: {e}", what.display()))
}

impl ToolRunner {
    pub fn new(opts: RunnerOptions) -> ToolRunner {
        let permits = opts.jobs.max(1);
        ToolRunner {
            opts,
            configs: Mutex::new(HashMap::new()),
            inflight: Mutex::new(HashMap::new()),
            permits: Mutex::new(permits),
            freed: Condvar::new(),
            runs: AtomicUsize::new(0),
        }
    }

    /// Number of tool processes started so far.
    pub fn runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }

    fn config(&self, path: &Path) -> Result<Arc<Loaded>, GenError> {
        let mut map = self.configs.lock().unwrap();
        if let Some(c) = map.get(path) {
            return Ok(c.clone());
        }
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let config = parse_config(&text).map_err(|e| match e {
            GenError::Config(m) => GenError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Arc::new(Loaded { config, text, dir });
        map.insert(path.to_path_buf(), loaded.clone());
        Ok(loaded)
    }

    /// Produces `module` from the tool configured at `import.path`.
    pub fn run(&self, import: &Import, module: &str, params: &Binding) -> Result<GenResult, GenError> {
        let loaded = self.config(Path::new(&import.path))?;
        let spec = loaded.config.module(&import.alias, module)?;
        let mut tuple = Vec::new();
        for p in &spec.parameters {
            let v = params.get(p).ok_or_else(|| GenError::MissingParam(p.clone()))?;
            tuple.push((p.clone(), *v));
        }
        let exe = self.executable(&loaded);
        let hash = {
            let mut h = Sha256::new();
            for part in [exe.to_string_lossy().as_ref(), module, &loaded.text] {
                h.update(part.as_bytes());
                h.update([0]);
            }
            for (k, v) in &tuple {
                h.update(format!("{k}={v}\0").as_bytes());
            }
            h.finalize().iter().map(|b| format!("{b:02x}")).collect::<String>()
        };
        let key = CacheKey {
            tool: import.alias.clone(),
            module: module.into(),
            params: tuple,
        };
        let slot = self
            .inflight
            .lock()
            .unwrap()
            .entry(hash.clone())
            .or_default()
            .clone();
        let mut first = false;
        let res = slot.get_or_init(|| {
            first = true;
            self.produce(&loaded, &exe, module, params, &hash, key)
        });
        let mut res = res.clone()?;
        if !first {
            res.cached = true;
        }
        Ok(res)
    }

    fn executable(&self, loaded: &Loaded) -> PathBuf {
        let p = Path::new(&loaded.config.path);
        // Tools run inside a scratch directory, so relative paths are made
        // absolute here.
        let absolute = |c: PathBuf| c.canonicalize().unwrap_or(c);
        if p.components().count() > 1 && p.is_relative() {
            return absolute(loaded.dir.join(p));
        }
        if p.is_relative() {
            if let Some(found) = self.opts.tool_dirs.iter().map(|d| d.join(p)).find(|c| c.is_file()) {
                return absolute(found);
            }
        }
        p.to_path_buf()
    }

    fn produce(
        &self,
        loaded: &Loaded,
        exe: &Path,
        module: &str,
        params: &Binding,
        hash: &str,
        key: CacheKey,
    ) -> Result<GenResult, GenError> {
        let spec = loaded.config.module(&key.tool, module)?;
        fs::create_dir_all(&self.opts.out_dir).map_err(|e| io_err(&self.opts.out_dir, e))?;
        if let Some(hit) = self.from_cache(hash, &key)? {
            return Ok(hit);
        }
        let scratch = self.opts.scratch_dir.join(hash);
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| io_err(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| io_err(&scratch, e))?;
        let scratch = scratch.canonicalize().map_err(|e| io_err(&scratch, e))?;
        let argv = spec.argv(params)?;
        let output = {
            self.acquire();
            self.runs.fetch_add(1, Ordering::SeqCst);
            let out = Command::new(exe)
                .args(&argv)
                .current_dir(&scratch)
                .env("GEN_WORKDIR", &scratch)
                .output();
            self.release();
            out.map_err(|e| GenError::Io(format!("cannot run `{}`: {e}", exe.display())))?
        };
        let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
        let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
        if !output.status.success() {
            return Err(GenError::ToolFailed {
                status: output.status.to_string(),
                stderr,
            });
        }
        let out_bindings = spec.scrape_outputs(&stdout)?;
        let module_name = spec.module_name(params)?;
        let file = spec.file_name(params, &module_name)?;
        let produced = scratch.join(&file);
        if !produced.is_file() {
            return Err(GenError::MissingVerilog(produced.display().to_string()));
        }
        let verilog_file = Path::new(&file)
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{module_name}.v"));
        let dest = self.opts.out_dir.join(&verilog_file);
        fs::copy(&produced, &dest).map_err(|e| io_err(&dest, e))?;
        let entry = CacheEntry {
            module_name,
            out_bindings: out_bindings.clone().into_iter().collect(),
            stdout,
            stderr,
            verilog_file,
        };
        if let Some(dir) = &self.opts.cache_dir {
            self.store(dir, hash, &entry, &produced)?;
        }
        let _ = fs::remove_dir_all(&scratch);
        Ok(self.result(entry, key, false))
    }

    fn result(&self, e: CacheEntry, key: CacheKey, cached: bool) -> GenResult {
        GenResult {
            verilog_path: self.opts.out_dir.join(&e.verilog_file).display().to_string(),
            module_name: e.module_name,
            out_bindings: e.out_bindings.into_iter().collect(),
            stdout: e.stdout,
            stderr: e.stderr,
            cache_key: key,
            cached,
        }
    }

    fn from_cache(&self, hash: &str, key: &CacheKey) -> Result<Option<GenResult>, GenError> {
        let Some(dir) = &self.opts.cache_dir else {
            return Ok(None);
        };
        let meta = dir.join(format!("{hash}.json"));
        let verilog = dir.join(format!("{hash}.v"));
        let (Ok(text), true) = (fs::read_to_string(&meta), verilog.is_file()) else {
            return Ok(None);
        };
        let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) else {
            return Ok(None);
        };
        let dest = self.opts.out_dir.join(&entry.verilog_file);
        fs::copy(&verilog, &dest).map_err(|e| io_err(&dest, e))?;
        Ok(Some(self.result(entry, key.clone(), true)))
    }

    fn store(&self, dir: &Path, hash: &str, entry: &CacheEntry, verilog: &Path) -> Result<(), GenError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let v = dir.join(format!("{hash}.v"));
        fs::copy(verilog, &v).map_err(|e| io_err(&v, e))?;
        let meta = dir.join(format!("{hash}.json"));
        let text = serde_json::to_string_pretty(entry).map_err(|e| GenError::Io(e.to_string()))?;
        // Written last so that a present entry always has its Verilog.
        fs::write(&meta, text).map_err(|e| io_err(&meta, e))
    }

    fn acquire(&self) {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.freed.notify_one();
    }
}

impl Generator for ToolRunner {
    fn generate(&mut self, import: &Import, module: &str, params: &Binding) -> Result<GenResult, GenError> {
        self.run(import, module, params)
    }
}

impl Generator for &ToolRunner {
    fn generate(&mut self, import: &Import, module: &str, params: &Binding) -> Result<GenResult, GenError> {
        self.run(import, module, params)
    }
}
