//! `qms`: runs one analysis on a scenario file and writes a JSON report
//! plus CSV witness tables.
//!
//! Exit codes: 0 on a completed run (including divergent or unsolvable
//! outcomes), 1 on input errors, 2 when a declared quasi-metric constant
//! or a solver hypothesis is refuted.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Context, Failure, Outcome};
use output::Envelope;

#[derive(Parser)]
#[command(name = "qms", version, about = "Superlinear integral equations on finite quasi-metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-metric constant, diameter and optional Harnack checks.
    CheckKernel(Common),
    /// Picard or certified solve of u = K(u^q dsigma) + f.
    Solve(Common),
    /// Bracket for the gauge norm of f.
    Znorm(Common),
    /// Solvability constants, structural conditions and verdict.
    Criteria(Common),
    /// Capacities of sets and balls, and the capacity condition.
    Capacity(Common),
    /// Boundary value problem on (0, 1) through both kernel paths.
    Dirichlet1d(Common),
    /// Equivalent-condition battery for the interval problem.
    Battery(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "QMS_THREADS")]
    threads: Option<usize>,
}

type Runner = fn(&Context) -> Result<Outcome, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, run): (&str, &Common, Runner) = match &cli.command {
        Command::CheckKernel(a) => ("check-kernel", a, commands::check_kernel),
        Command::Solve(a) => ("solve", a, commands::solve),
        Command::Znorm(a) => ("znorm", a, commands::znorm_cmd),
        Command::Criteria(a) => ("criteria", a, commands::criteria),
        Command::Capacity(a) => ("capacity", a, commands::capacity_cmd),
        Command::Dirichlet1d(a) => ("dirichlet1d", a, commands::dirichlet1d),
        Command::Battery(a) => ("battery", a, commands::battery),
    };

    if let Some(t) = args.threads {
        if t == 0 {
            eprintln!("qms: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("qms: cannot build thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let bytes = match std::fs::read(&args.scenario) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("qms: cannot read {}: {e}", args.scenario.display());
            return ExitCode::from(1);
        }
    };
    let sha = hex::encode(Sha256::digest(&bytes));
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(_) => {
            eprintln!("qms: {} is not UTF-8", args.scenario.display());
            return ExitCode::from(1);
        }
    };
    let scenario = match scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("qms: {}: {e}", args.scenario.display());
            return ExitCode::from(1);
        }
    };

    let ctx = Context {
        scenario: &scenario,
        seed: args.seed,
    };
    let (result, tables, code) = match run(&ctx) {
        Ok(o) => (o.result, o.tables, 0),
        Err(Failure::Input(msg)) => {
            eprintln!("qms: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Refuted(e)) => {
            eprintln!("qms: {e}");
            (json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } }), Vec::new(), 2)
        }
    };
    let envelope = Envelope {
        schema: output::REPORT_SCHEMA,
        command: name,
        version: qms_core::VERSION,
        scenario_sha256: &sha,
        scenario_name: scenario.name.as_deref(),
        seed: args.seed,
        result,
    };
    if let Err(e) = output::write_all(&args.out, &envelope, &tables) {
        eprintln!("qms: cannot write to {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}

fn error_kind(e: &qms_core::Error) -> &'static str {
    match e {
        qms_core::Error::QuasiMetricViolation { .. } => "quasiMetricViolation",
        qms_core::Error::HypothesisNotMet { .. } => "hypothesisNotMet",
        _ => "other",
    }
}
