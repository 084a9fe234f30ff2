//! Command-line front end: `run` executes a JSON manifest, `validate`
//! checks one without executing, `demo` runs a bundled example.
//!
//! Exit codes: 0 all checks pass, 1 a verdict failed, 2 invalid input,
//! 3 internal error.

mod demos;
mod manifest;
mod report;
mod tasks;

use clap::{Parser, Subcommand};
use manifest::{Manifest, Policy, SCHEMA_VERSION};
use report::Report;
use std::process::ExitCode;
use std::time::Instant;
use tasks::TaskError;

#[derive(Parser)]
#[command(name = "kronweb", version, about = "Jordan-Kronecker pencils, Nijenhuis operators, Veronese webs and their Poisson realizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a manifest and write its report
    Run {
        /// Path to a JSON manifest
        manifest: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and validate a manifest without executing it
    Validate {
        /// Path to a JSON manifest
        manifest: String,
    },
    /// Run a bundled example pipeline
    Demo {
        /// One of: hirota, extension, up-construct, pencil
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(clap::Args)]
struct Overrides {
    /// Sampling seed (overrides the manifest)
    #[arg(long)]
    seed: Option<u64>,
    /// Numeric tolerance (overrides the manifest)
    #[arg(long)]
    tol: Option<f64>,
    /// Sample count (overrides the manifest)
    #[arg(long)]
    samples: Option<usize>,
    /// Report output path (overrides the manifest; default: stdout)
    #[arg(long)]
    out: Option<String>,
}

impl Overrides {
    fn apply(&self, mut policy: Policy) -> Policy {
        if let Some(s) = self.seed {
            policy.seed = s;
        }
        if let Some(t) = self.tol {
            policy.tol = t;
        }
        if let Some(n) = self.samples {
            policy.samples = n;
        }
        policy
    }
}

const EXIT_VERDICT: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { manifest, overrides } => {
            let m = match load_manifest(&manifest) {
                Ok(m) => m,
                Err(msg) => return fail(EXIT_VALIDATION, &msg),
            };
            let policy = overrides.apply(m.policy.clone());
            let started = Instant::now();
            let report = match tasks::run_task(m.task, &m.payload, &policy) {
                Ok(r) => r,
                Err(e) => return fail_task(e),
            };
            let out = overrides.out.clone().or(m.out);
            emit(&report, out.as_deref(), started)
        }
        Command::Validate { manifest } => match load_manifest(&manifest) {
            Ok(m) => {
                println!("ok: task `{}`", m.task.name());
                ExitCode::SUCCESS
            }
            Err(msg) => fail(EXIT_VALIDATION, &msg),
        },
        Command::Demo { name, overrides } => {
            let policy = overrides.apply(Policy::default());
            let started = Instant::now();
            let report = match demos::run_demo(&name, &policy) {
                Ok(r) => r,
                Err(e) => return fail_task(e),
            };
            emit(&report, overrides.out.as_deref(), started)
        }
    }
}

fn load_manifest(path: &str) -> Result<Manifest, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read `{}`: {}", path, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| format!("manifest `{}`: {}", path, e))?;
    if m.schema != SCHEMA_VERSION {
        return Err(format!(
            "manifest `{}`: schema {} is not supported (expected {})",
            path, m.schema, SCHEMA_VERSION
        ));
    }
    Ok(m)
}

fn emit(report: &Report, out: Option<&str>, started: Instant) -> ExitCode {
    let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                return fail(EXIT_INTERNAL, &format!("cannot write `{}`: {}", path, e));
            }
        }
        None => println!("{}", json),
    }
    println!("{} [{:.2}s]", report.summary(), started.elapsed().as_secs_f64());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(code)
}

fn fail_task(e: TaskError) -> ExitCode {
    match e {
        TaskError::Validation(v) => fail(EXIT_VALIDATION, &v.0),
        TaskError::Internal(i) => fail(EXIT_INTERNAL, &i.0),
    }
}
