use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use betaedge::lab::{load_experiment, read_summary, render_summary, run, Status};

/// Edge statistics laboratory for tridiagonal beta ensembles.
#[derive(Parser)]
#[command(name = "edge-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its artifact directory.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output` in the file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate an experiment file without running it.
    Validate { config: PathBuf },
    /// Print the summary of an artifact directory.
    Report { dir: PathBuf },
}

fn exit_for(status: Status) -> ExitCode {
    match status {
        Status::Pass => ExitCode::SUCCESS,
        Status::Fail => ExitCode::from(1),
        Status::Inconclusive => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out.as_deref()).map(|(dir, report)| {
            print!("{}", render_summary(&report));
            println!("artifacts: {}", dir.display());
            exit_for(report.status)
        }),
        Command::Validate { config } => load_experiment(&config).map(|(exp, _)| {
            println!("ok: {} (seed {})", exp.kind.name(), exp.seed);
            ExitCode::SUCCESS
        }),
        Command::Report { dir } => read_summary(&dir).map(|report| {
            print!("{}", render_summary(&report));
            exit_for(report.status)
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
