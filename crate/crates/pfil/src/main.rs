// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfil::driver::{self, CheckOptions, ElabOptions, EXIT_OK, EXIT_USAGE};
use pfil::report;
use pfil::source::{load, parse_file, SourceMap};
use pfil::tools::{RunnerOptions, ToolRunner};
use pfil_core::Binding;

#[derive(Parser)]
#[command(name = "pfil", version, about = "Check, elaborate and simulate pfil hardware designs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type check every component for all parameter values.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Produce a parameter-free program from an entry component.
    Elaborate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        entry: String,
        /// Entry parameter, `NAME=VALUE`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, u64)>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip type checking.
        #[arg(long)]
        unchecked: bool,
        #[arg(long, default_value_t = 1)]
        gen_jobs: usize,
        #[arg(long)]
        no_gen_cache: bool,
        /// Directory searched before `PATH` for generator tools; repeatable.
        #[arg(long = "tool-dir")]
        tool_dirs: Vec<PathBuf>,
        #[arg(long, default_value_t = 64)]
        depth_limit: usize,
        /// Give every instantiation its own definition.
        #[arg(long)]
        no_dedup: bool,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Cycle-simulate a parameter-free program.
    Simulate {
        file: PathBuf,
        /// Cycles to simulate; defaults to the smallest sufficient horizon.
        #[arg(long)]
        horizon: Option<u64>,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// SMT solver executable; without it only ground obligations and those
    /// over bounded indices are decided.
    #[arg(long)]
    solver: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Write one JSON record per obligation to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Components checked in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_param(s: &str) -> Result<(String, u64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v = v.trim().parse().map_err(|_| format!("`{v}` is not a natural number"))?;
    Ok((k.trim().to_string(), v))
}

fn run_check(prog: &pfil_core::Program, map: &SourceMap, args: &CheckArgs) -> i32 {
    let opts = CheckOptions {
        solver: args.solver.clone(),
        timeout_ms: args.timeout_ms,
        jobs: args.jobs,
    };
    let outcome = driver::check(prog, &opts);
    if let Some(why) = &outcome.fallback {
        eprintln!("warning: {why}; deciding parameter-free obligations only");
    }
    eprint!("{}", report::human(&outcome.reports, map));
    eprint!("{}", report::summary(&outcome.reports));
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, report::jsonl(&outcome.reports, map)) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    outcome.exit_code()
}

fn run(cli: Cli) -> i32 {
    match cli.cmd {
        Cmd::Check { files, check } => match load(&files) {
            Ok((prog, map)) => run_check(&prog, &map, &check),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Cmd::Elaborate {
            files,
            entry,
            params,
            out,
            unchecked,
            gen_jobs,
            no_gen_cache,
            tool_dirs,
            depth_limit,
            no_dedup,
            check,
        } => {
            let (prog, map) = match load(&files) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            if prog.get(&entry).is_none() {
                eprintln!("error: no component named `{entry}`");
                return EXIT_USAGE;
            }
            if !unchecked {
                let code = run_check(&prog, &map, &check);
                if code != EXIT_OK {
                    return code;
                }
            }
            let mut ropts = RunnerOptions::in_dir(&out);
            ropts.jobs = gen_jobs;
            ropts.tool_dirs = tool_dirs;
            if no_gen_cache {
                ropts.cache_dir = None;
            }
            let mut runner = ToolRunner::new(ropts);
            let opts = ElabOptions {
                entry: entry.clone(),
                params: params.into_iter().collect::<Binding>(),
                depth_limit,
                dedup: !no_dedup,
            };
            let artifacts = match driver::build(&prog, &opts, &mut runner) {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            };
            for l in &artifacts.lints {
                eprintln!("warning: {l}");
            }
            match artifacts.write(&out, &entry) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Cmd::Simulate { file, horizon } => {
            let prog = match parse_file(&file) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            match driver::simulate_program(&prog, horizon) {
                Ok(r) => {
                    print!("{}", driver::sim_summary(&r));
                    if r.passed() {
                        EXIT_OK
                    } else {
                        driver::EXIT_REFUTED
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    ExitCode::from(run(cli) as u8)
}
