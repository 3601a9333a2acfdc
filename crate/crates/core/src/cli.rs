//! Command-line front end shared by the `proxskip` binary and tests.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | other runtime error |
//! | 2    | usage error |
//! | 3    | missing input file |
//! | 4    | invalid configuration or override |
//! | 5    | output not writable |
//! | 6    | every repetition diverged |
//! | 7    | verification failed |
//! | 8    | plot input malformed or empty |
//! | 130  | interrupted; partial results were written |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::harness::{self, ExperimentConfig, ExperimentResult, RunOptions, SweepAxis, WORKERS_ENV};
use crate::plot::{plot_files, XAxis};
use crate::trace::Metric;
use crate::verify::{run_suite, VerifyOptions};

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const MISSING_FILE: i32 = 3;
    pub const INVALID_CONFIG: i32 = 4;
    pub const UNWRITABLE: i32 = 5;
    pub const DIVERGED: i32 = 6;
    pub const VERIFY_FAILED: i32 = 7;
    pub const BAD_INPUT: i32 = 8;
    pub const INTERRUPTED: i32 = 130;
}

#[derive(Debug, Parser)]
#[command(name = "proxskip", version, about = "Decentralized ProxSkip experiments")]
pub struct Cli {
    /// Worker threads for repetitions.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its CSV and JSON echo.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path override, e.g. `hyper.p=0.2`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment per value of an axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of n, p, varsigma2, sigma2, iota.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite on randomized instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start the primal form at a nonzero control variate (negative control).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Draw result CSVs as an SVG line chart.
    Plot {
        #[arg(long = "in", value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        /// iters or comms.
        #[arg(long, default_value = "iters")]
        x: String,
        /// Metric column, e.g. rel_error.
        #[arg(long, default_value = "rel_error")]
        y: String,
        #[arg(long)]
        out: PathBuf,
        /// Linear instead of logarithmic y axis.
        #[arg(long)]
        linear_y: bool,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingFile(_) => exit::MISSING_FILE,
        Error::Config(_) | Error::InvalidArgument(_) | Error::ContractViolation(_) => exit::INVALID_CONFIG,
        Error::Unwritable { .. } => exit::UNWRITABLE,
        Error::Divergence { .. } => exit::DIVERGED,
        Error::Schema(_) | Error::Csv(_) | Error::Parse { .. } => exit::BAD_INPUT,
        _ => exit::FAILURE,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Messages go to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let opts = RunOptions { workers: cli.workers.filter(|&w| w > 0).unwrap_or_else(harness::default_workers) };
    let result = match cli.command {
        Command::Run { config, set, out: dir } => cmd_run(&config, &set, &dir, &opts, out),
        Command::Sweep { config, axis, values, set, out: dir } => cmd_sweep(&config, &axis, &values, &set, &dir, &opts, out),
        Command::Verify { seed, inject_fault } => Ok(cmd_verify(seed, inject_fault, out)),
        Command::Plot { inputs, x, y, out: file, linear_y } => cmd_plot(&inputs, &x, &y, &file, !linear_y, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load(config: &Path, set: &[String]) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(config, set)
}

fn finish(result: &ExperimentResult, dir: &Path, out: &mut dyn Write) -> Result<i32, Error> {
    if result.run_count == 0 {
        return Err(Error::Divergence { t: result.diverged.iter().map(|d| d.t).min().unwrap_or(0) });
    }
    let files = harness::write_result(result, dir)?;
    let _ = writeln!(out, "{}", files.csv.display());
    let _ = writeln!(out, "{}", files.json.display());
    if !result.diverged.is_empty() {
        let _ = writeln!(
            out,
            "warning: {} of {} repetitions diverged and were excluded",
            result.diverged.len(),
            result.seeds.len()
        );
    }
    Ok(if result.truncated { exit::INTERRUPTED } else { exit::OK })
}

fn cmd_run(config: &Path, set: &[String], dir: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = load(config, set)?;
    let result = harness::run_experiment_with(&cfg, opts)?;
    finish(&result, dir, out)
}

fn cmd_sweep(
    config: &Path,
    axis: &str,
    values: &[f64],
    set: &[String],
    dir: &Path,
    opts: &RunOptions,
    out: &mut dyn Write,
) -> Result<i32, Error> {
    let cfg = load(config, set)?;
    let axis: SweepAxis = axis.parse()?;
    let results = harness::sweep(&cfg, axis, values, opts)?;
    let mut code = exit::OK;
    for r in &results {
        code = code.max(finish(r, dir, out)?);
    }
    Ok(code)
}

fn cmd_verify(seed: u64, inject_fault: bool, out: &mut dyn Write) -> i32 {
    let results = run_suite(&VerifyOptions { seed, inject_fault });
    let _ = writeln!(out, "verify (seed {seed})");
    for r in &results {
        let _ = writeln!(out, "{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        let _ = writeln!(out, "all {} properties passed", results.len());
        exit::OK
    } else {
        let _ = writeln!(out, "failed: {}", failed.join(", "));
        exit::VERIFY_FAILED
    }
}

fn cmd_plot(inputs: &[PathBuf], x: &str, y: &str, file: &Path, log_y: bool, out: &mut dyn Write) -> Result<i32, Error> {
    let x: XAxis = x.parse()?;
    let metric: Metric = y.parse()?;
    let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    plot_files(&paths, x, metric, log_y, file)?;
    let _ = writeln!(out, "{}", file.display());
    Ok(exit::OK)
}

/// Entry point for the binary: logging, Ctrl-C handling, process arguments.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    if let Err(e) = crate::interrupt::install_ctrlc_handler() {
        log::warn!("{e}");
    }
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}
