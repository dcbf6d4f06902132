//! Command-line front end for the collapse-and-revival simulator.
//!
//! `dicke-cr simulate` runs one scenario (a named preset or a config file)
//! and writes per-channel data files, snapshot grids, a summary, and a
//! re-runnable manifest. `dicke-cr compare` does the same for a multi-method
//! scenario and adds a pairwise comparison report.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical or
//! truncation failures, 1 for I/O problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dicke_cr::scenario::{self, Scenario};
use dicke_cr::Error;

#[derive(Parser)]
#[command(name = "dicke-cr", version, about = "Collapse-and-revival dynamics in the non-resonant Dicke model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its data files.
    Simulate(JobArgs),
    /// Run a multi-method scenario and also write a comparison report.
    Compare(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Named preset (fig1 ... fig10b).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Path to a `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $DICKE_CR_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat warnings (truncation tail, perturbative validity) as errors.
    #[arg(long)]
    strict: bool,
    /// Run the selected methods on separate threads.
    #[arg(long)]
    parallel: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (job, with_report) = match cli.command {
        Command::Simulate(job) => (job, false),
        Command::Compare(job) => (job, true),
    };
    match run_job(&job, with_report) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run_job(job: &JobArgs, with_report: bool) -> Result<PathBuf, Error> {
    let scenario = load_scenario(job)?;
    if with_report && scenario.methods.len() < 2 {
        return Err(Error::Config("compare needs at least two methods in the scenario".into()));
    }
    let out_dir = output_dir(job);
    let run = scenario::run_scenario(&scenario, job.parallel)?;
    let warnings = run.all_warnings();
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    if job.strict {
        if let Some(first) = warnings.first() {
            return Err(Error::Numerical(format!("strict mode: {first}")));
        }
    }
    scenario::write_outputs(&out_dir, &scenario, &run)?;
    if with_report {
        scenario::write_compare_report(&out_dir, &scenario, &run)?;
    }
    Ok(out_dir)
}

fn load_scenario(job: &JobArgs) -> Result<Scenario, Error> {
    match (&job.preset, &job.config) {
        (Some(name), None) => Scenario::preset(name),
        (None, Some(path)) => Scenario::from_config_str(&std::fs::read_to_string(path)?),
        _ => Err(Error::Config("exactly one of --preset and --config must be given".into())),
    }
}

fn output_dir(job: &JobArgs) -> PathBuf {
    job.out
        .clone()
        .or_else(|| std::env::var_os("DICKE_CR_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidParams(_)
        | Error::InvalidSpin(_)
        | Error::Resonance(_)
        | Error::DimensionOverflow { .. }
        | Error::DimensionMismatch(_) => 2,
        Error::CutoffTooSmall(_)
        | Error::ValidityViolation(_)
        | Error::Numerical(_)
        | Error::ToleranceUnreachable(_) => 3,
        Error::Io(_) => 1,
    }
}
