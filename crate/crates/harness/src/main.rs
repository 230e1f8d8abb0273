use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lagrange_coupling::harness::{emit_report, render, run_study, Format, HarnessError, Study, StudyConfig};

#[derive(Parser)]
#[command(name = "coupling-harness", version, about = "Runs coupling studies from a TOML config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refinement study of the broken H¹ and multiplier errors.
    Converge(Args),
    /// δ/h stability sweep, with stabilized reruns when enabled.
    Sweep(Args),
    /// PCG iterations and condition estimates as the subdomain count grows.
    Precond(Args),
    /// Junction balance and closed-form check on the fracture star.
    Fracture(Args),
    /// Reduced solve against the monolithic reference and algebraic probes.
    Oracle(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Table,
    Structured,
}

#[derive(clap::Args)]
struct Args {
    /// Study configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report file; the report goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
    /// Overrides the seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(study: Study, args: &Args) -> Result<bool, HarnessError> {
    let mut cfg = StudyConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_study(study, &cfg)?;
    let format = match args.format {
        OutputFormat::Table => Format::Table,
        OutputFormat::Structured => Format::Structured,
    };
    match &args.out {
        Some(dir) => {
            let path = emit_report(&report, format, dir)?;
            let failed = report.records.iter().filter(|r| !r.passed()).count();
            eprintln!(
                "{}: {} runs, {failed} failed, report written to {}",
                study.name(),
                report.records.len(),
                path.display()
            );
        }
        None => print!("{}", render(&report, format)?),
    }
    for r in report.records.iter().filter(|r| !r.passed()) {
        eprintln!("failed: {}: {}", r.label, r.message);
    }
    for (name, ok) in &report.checks {
        if !ok {
            eprintln!("failed check: {name}");
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = match &cli.command {
        Command::Converge(a) => (Study::Converge, a),
        Command::Sweep(a) => (Study::Sweep, a),
        Command::Precond(a) => (Study::Precond, a),
        Command::Fracture(a) => (Study::Fracture, a),
        Command::Oracle(a) => (Study::Oracle, a),
    };
    match run(study, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
