//! `poolflip`: tournaments, sweeps, training, evaluation and export.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use poolflip::harness::PRESET_NAMES;
use poolflip::heuristics::SPEC_GRAMMAR;

use commands::{eval::EvalArgs, export::ExportArgs, sweep::SweepArgs, tournament::TournamentArgs, train::TrainArgs};

#[derive(Debug, Parser)]
#[command(name = "poolflip", version, about = "PoolFlip stealthy-takeover game lab")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Named experiment preset.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// JSON config file or a previous run's manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "POOLFLIP_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory (default `poolflip-out`).
    #[arg(long, global = true, env = "POOLFLIP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Override one experiment field, e.g. `--set train.total_epochs=50`.
    #[arg(long = "set", global = true, value_name = "PATH=JSON")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Heuristic defender x attacker tournament.
    Tournament(TournamentArgs),
    /// Tournament over braced parameter grids such as `pac:phase={2,4,8}`.
    Sweep(SweepArgs),
    /// Train a specialist, an IBR policy or a Flip-PSRO policy.
    Train(TrainArgs),
    /// Evaluate checkpoints against the pool and the unseen roster.
    Eval(EvalArgs),
    /// Export an episode trace or a tournament matrix.
    Export(ExportArgs),
}

fn after_help() -> String {
    let grammar = SPEC_GRAMMAR.split(" | ").map(|t| format!("  {t}")).collect::<Vec<_>>().join("\n");
    format!(
        "Presets:\n  {}\n\nAgent specs (delay defaults to random; omitted parameters take defaults):\n{grammar}\n\n\
         Exit codes: 0 success, 1 runtime error, 2 configuration error.",
        PRESET_NAMES.join(", ")
    )
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(after_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Tournament(a) => commands::tournament::run(&cli.global, a),
        Command::Sweep(a) => commands::sweep::run(&cli.global, a),
        Command::Train(a) => commands::train::run(&cli.global, a),
        Command::Eval(a) => commands::eval::run(&cli.global, a),
        Command::Export(a) => commands::export::run(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
