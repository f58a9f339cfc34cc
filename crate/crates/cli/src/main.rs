use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vrm_cli::runner;
use vrm_cli::{CliError, ExperimentId, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "vrm", version, about = "Reproducible vicinal risk minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, or `all`, and write its reports.
    Run {
        /// Experiment id; overrides the config's `experiment`.
        #[arg(value_enum)]
        id: Option<ExperimentId>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, conflicts_with = "id")]
        experiment: Option<ExperimentId>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $VRM_OUT_DIR/<experiment>, else runs/<experiment>].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads [default: available cores].
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Command::Run { id, config, experiment, seed, out, trials, workers } = cli.command;
    let mut cfg = RunConfig::load(&config)?;
    cfg.apply(&Overrides { experiment: id.or(experiment), seed, out, trials, workers });
    let summary = runner::run(&cfg)?;
    println!("config sha256 {}", summary.config_hash);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    for f in &summary.failed_findings {
        println!("finding: {f} did not hold");
    }
    if !summary.failed_assertions.is_empty() {
        return Err(CliError::Assertion(summary.failed_assertions.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("error report serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
