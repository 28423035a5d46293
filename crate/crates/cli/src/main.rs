//! `gossipfield run --spec experiment.json --out results/`
//! `gossipfield compare results-a/ results-b/ --tolerance 1e-9`

mod compare;
mod experiment;
mod failure;
mod manifest;
mod output;
mod run;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "gossipfield", version, about = "Gossip opinion dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of an experiment file and write the results.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; defaults to the spec's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        verbose: bool,
    },
    /// Compare the outputs of two runs. Exits 1 when any value differs by
    /// more than the tolerance.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
}

fn report_failure(f: &failure::Failure) {
    eprintln!("{}", serde_json::to_string(f).unwrap_or_else(|_| f.to_string()));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, out, verbose } => {
            let level = if verbose { "info" } else { "warn" };
            env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
                .init();
            match run::run(&spec, out.as_deref(), run::configure_threads()) {
                Ok(_) => ExitCode::SUCCESS,
                Err(f) => {
                    report_failure(&f);
                    ExitCode::FAILURE
                }
            }
        }
        Command::Compare { a, b, tolerance } => match compare::compare(&a, &b, tolerance) {
            Ok(report) => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
                if report.differences.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(f) => {
                report_failure(&f);
                ExitCode::from(2)
            }
        },
    }
}
