//! `betajacobi` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure or a failed
//! `--verify` check.

mod commands;
mod opts;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use opts::Opts;

#[derive(Debug, Parser)]
#[command(name = "betajacobi", version, about = "Tridiagonal Jacobi ensembles: sampling, limits and fluctuations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one bidiagonal factor and the spectrum of its Gram matrix.
    Sample(Opts),
    /// Eigenvalues of one sampled matrix, optionally cross-checked.
    Eig(Opts),
    /// Limiting measures, Chebyshev coefficients and variance functionals.
    Spectrum(Opts),
    /// Limiting covariance of power traces.
    Cov(Opts),
    /// Fluctuations of linear statistics.
    Fluct(Opts),
    /// Law-of-large-numbers distances.
    Lln(Opts),
    /// Exact mean traces and their `1/n` correction.
    Expect(Opts),
    /// Moments of `tr A` when `p = q = 1`.
    Extremal(Opts),
    /// Poincaré bounds and the Gaussian coupling gap.
    Concentration(Opts),
    /// Fast deterministic self-checks.
    VerifyAll(Opts),
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(betajacobi::Error),
    /// A `--verify` style check ran and failed.
    Check(String),
}

impl From<betajacobi::Error> for CliError {
    fn from(e: betajacobi::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(betajacobi::Error::Io(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Check(_) => 2,
        }
    }

    fn record(&self) -> Value {
        let (kind, message) = match self {
            CliError::Validation(m) => ("validation", m.clone()),
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Check(m) => ("check_failed", m.clone()),
        };
        json!({ "kind": kind, "message": message })
    }
}

/// What a subcommand hands back: the result body, the node counts used,
/// and whether its own checks passed.
pub struct Outcome {
    pub result: Value,
    pub nodes: Value,
    pub passed: bool,
}

impl Outcome {
    pub fn ok(result: Value, nodes: Value) -> Self {
        Self { result, nodes, passed: true }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, opts) = match cli.command {
        Command::Sample(o) => ("sample", o),
        Command::Eig(o) => ("eig", o),
        Command::Spectrum(o) => ("spectrum", o),
        Command::Cov(o) => ("cov", o),
        Command::Fluct(o) => ("fluct", o),
        Command::Lln(o) => ("lln", o),
        Command::Expect(o) => ("expect", o),
        Command::Extremal(o) => ("extremal", o),
        Command::Concentration(o) => ("concentration", o),
        Command::VerifyAll(o) => ("verify-all", o),
    };
    let mut opts = match opts.resolve() {
        Ok(o) => o,
        Err(e) => return fail(name, None, e),
    };
    commands::fill_defaults(name, &mut opts);
    let start = Instant::now();
    let outcome = match commands::run(name, &opts) {
        Ok(o) => o,
        Err(e) => return fail(name, Some(&opts), e),
    };
    let envelope = json!({
        "schema": 1,
        "command": name,
        "version": betajacobi::VERSION,
        "config": config_json(&opts),
        "seed": opts.seed(),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "nodes": outcome.nodes,
        "passed": outcome.passed,
        "result": outcome.result,
    });
    if let Err(e) = emit(&opts, &envelope) {
        return fail(name, Some(&opts), e);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

/// The resolved flags without unset entries.
fn config_json(opts: &Opts) -> Value {
    let mut v = serde_json::to_value(opts).expect("flags serialize");
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

fn emit(opts: &Opts, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    match &opts.out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| CliError::Core(e.into())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::Core(e.into()))
        }
    }
}

fn fail(name: &str, opts: Option<&Opts>, e: CliError) -> ExitCode {
    let code = e.exit_code();
    let record = json!({
        "schema": 1,
        "command": name,
        "version": betajacobi::VERSION,
        "config": opts.map(config_json),
        "exit_code": code,
        "error": e.record(),
    });
    eprintln!("{record}");
    ExitCode::from(code)
}
