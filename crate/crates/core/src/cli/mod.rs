//! Command-line entry points.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nfgt::engine::Precision;

/// Exit status of each failure class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const MISSING_FILE: u8 = 3;
    pub const SCHEMA: u8 = 4;
    pub const TASK_MISMATCH: u8 = 5;
    pub const CHECK_FAILED: u8 = 6;
    pub const NUMERIC: u8 = 7;
}

#[derive(Parser, Debug)]
#[command(
    name = "nfgt",
    version,
    about = "Equivariant transformer for normal-form games"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a game and write it as JSON.
    Sample(SampleArgs),
    /// Decode an equilibrium for a game with a trained NE checkpoint.
    Solve(SolveArgs),
    /// Train a model from a JSON config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on game files.
    Eval(EvalArgs),
    /// Fit a rating baseline on a masked two-player game.
    Baseline(BaselineArgs),
    /// Run the equivariance and gradient property suites.
    Check(CheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Invariant,
    Disc,
    Named,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Named game: coordination, anti_coordination, matching_pennies, anti_cycle.
    #[arg(long)]
    name: Option<String>,
    /// Number of players.
    #[arg(long = "N", default_value_t = 2)]
    n: usize,
    /// Actions per player.
    #[arg(long = "T", default_value_t = 4)]
    t: usize,
    /// Latent dimension of DISC games.
    #[arg(long = "Z", default_value_t = 1)]
    z: usize,
    #[arg(long, default_value_t = 1.0)]
    p_observe: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics.csv, model.nfgt and run.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Game files or directories of `.json` game files.
    #[arg(long, num_args = 1.., required = true)]
    games: Vec<PathBuf>,
    #[arg(long)]
    task: nfgt::model::Task,
    /// Also write the result as a one-row metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Elo,
    Melo,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    game: PathBuf,
    /// Seed of the observation mask; the game's own mask is used when omitted.
    #[arg(long)]
    mask_seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    p_observe: f64,
    /// Cycle planes of mElo.
    #[arg(long, default_value_t = nfgt::baselines::DEFAULT_MELO_COMPONENTS)]
    components: usize,
    /// Initialization seed of mElo cycle vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the fitted ratings as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Floating-point width: 32 or 64.
    #[arg(long, default_value = "64", value_parser = parse_precision)]
    precision: Precision,
    /// Random (game, isomorphism) pairs per model.
    #[arg(long, default_value_t = 500)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    Precision::try_from(s.parse::<u32>().map_err(|e| e.to_string())?)
}

/// Failure of a property suite, reported with its own exit status.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CheckFailed(String);

/// Exit status for an error, by the first recognized cause in its chain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<CheckFailed>() {
            return exit::CHECK_FAILED;
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    exit::MISSING_FILE
                }
                _ => exit::OTHER,
            };
        }
        if cause.is::<serde_json::Error>() {
            return exit::SCHEMA;
        }
        if let Some(e) = cause.downcast_ref::<nfgt::Error>() {
            use nfgt::Error as E;
            return match e {
                E::TaskMismatch { .. } => exit::TASK_MISMATCH,
                E::NonFinite { .. } | E::NonFiniteLoss { .. } => exit::NUMERIC,
                E::Io(_) => exit::MISSING_FILE,
                _ => exit::SCHEMA,
            };
        }
    }
    exit::OTHER
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    let result = match cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Solve(a) => commands::solve(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
