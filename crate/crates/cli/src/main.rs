use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use timing_lab::{resolve, run, Command};

#[derive(Parser)]
#[command(name = "timing-lab", version, about = "Interval-timing reinforcement-learning laboratory")]
struct Cli {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set train.total_env_frames=0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an agent; writes checkpoints and metrics.
    Train,
    /// Evaluate a checkpoint on training and held-out intervals.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Sample actions instead of taking the greedy one.
        #[arg(long)]
        stochastic: bool,
    },
    /// Figure tables and plots from evaluation records.
    Analyze {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Fit the Bayesian observer to a `t_s,t_p` CSV.
    FitPsych {
        #[arg(long)]
        trials: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
    },
    /// Gradient checks and V-trace oracle suite.
    Check,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match cli.command {
        Cmd::Train => Command::Train,
        Cmd::Eval {
            checkpoint,
            trials,
            stochastic,
        } => Command::Eval {
            checkpoint,
            trials,
            stochastic,
        },
        Cmd::Analyze { records } => Command::Analyze { records },
        Cmd::FitPsych { trials, restarts } => Command::FitPsych { trials, restarts },
        Cmd::Check => Command::Check,
    };
    let result = resolve(cli.config.as_deref(), &cli.overrides).and_then(|cfg| run(&command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
