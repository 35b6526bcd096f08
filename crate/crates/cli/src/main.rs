//! `scorefill` command line: synthesis, fitting, prediction, baselines, active
//! evaluation and analyses over model × dataset × metric score tensors.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use scorefill::Execution;

use crate::commands::{ActiveArgs, AnalyzeCommand, BaselineArgs, Context, FitArgs, PredictArgs, SynthArgs};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "scorefill", version, about, long_about = None)]
struct Cli {
    /// Worker threads for chains, seeds and refits [default: all cores]. 1 runs
    /// everything sequentially; results do not depend on this value
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic score tensor from one of the models
    Synth(SynthArgs),
    /// Fit a model by NUTS and write a run directory
    Fit(FitArgs),
    /// Recompute posterior predictions from a run directory
    Predict(PredictArgs),
    /// Global-mean or mean-of-means predictions
    Baseline(BaselineArgs),
    /// Simulate active evaluation under selection strategies
    Active(ActiveArgs),
    /// Spectrum, dimension sweep, profile effects, informativeness
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

fn execution(threads: Option<usize>) -> CliResult<Execution> {
    match threads {
        Some(0) => Err(CliError::flag("--threads", "must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::flag("--threads", e.to_string()))?;
            let _ = n;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context {
        file: FileConfig::load(cli.config.as_deref())?,
        exec: execution(cli.threads)?,
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Fit(a) => commands::fit_cmd(a, &ctx),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Baseline(a) => commands::baseline(a, &ctx),
        Command::Active(a) => commands::active(a, &ctx),
        Command::Analyze(a) => commands::analyze(a, &ctx),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!(
                "error: kind=usage message={}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message={}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
