//! `qeb`: error bars for quantum state tomography from the command line.

mod analyze;
mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use qeb_core::QebError;

use crate::args::{
    AnalyzeArgs, BootstrapArgs, ConfidenceArgs, FitArgs, MleArgs, QebArgs, SimulateArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "qeb",
    version,
    about = "Quantum error bars for tomography data"
)]
struct Cli {
    /// Worker threads for the parallel walkers (defaults to all cores).
    #[arg(long, global = true, env = "QEB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample, histogram, fit and report error bars for a dataset.
    Analyze(Box<AnalyzeArgs>),
    /// Simulate Pauli-setting measurements of a state.
    Simulate(SimulateArgs),
    /// Maximum likelihood estimate of a dataset.
    Mle(MleArgs),
    /// Fit the skewed-Gaussian model to a saved histogram.
    Fit(FitArgs),
    /// Peak position, width and skew from model parameters.
    Qeb(QebArgs),
    /// Confidence threshold from a saved fit or histogram.
    Confidence(ConfidenceArgs),
    /// Parametric bootstrap around the maximum likelihood estimate.
    Bootstrap(BootstrapArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Analyze(a) => analyze::run(*a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Mle(a) => commands::mle(a),
        Command::Fit(a) => commands::fit(a),
        Command::Qeb(a) => commands::qeb(a),
        Command::Confidence(a) => commands::confidence(a),
        Command::Bootstrap(a) => commands::bootstrap(a),
    }
}

/// One-line JSON error document on stderr.
fn report_error(kind: &str, message: &str) {
    let doc = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", e.render().to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<QebError>())
                .map_or("error", QebError::kind);
            report_error(kind, &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
