//! `spyrank` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "spyrank", version, about = "Deception detection from long multi-player game videos")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by every subcommand. Structural settings live in the
/// config file.
#[derive(Debug, Clone, Args)]
struct GlobalOpts {
    /// Experiment config file (JSON); built-in defaults when omitted
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed, overrides the config and synthetic spec
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of outer cross-validation folds
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Clip length in seconds
    #[arg(long, global = true, value_name = "SECONDS")]
    clip_len: Option<f64>,
    /// Interval between clip starts in seconds
    #[arg(long, global = true, value_name = "SECONDS")]
    clip_interval: Option<f64>,
    /// Frame cap for a frame-level channel, repeatable
    #[arg(long, global = true, value_name = "CHANNEL=COUNT", value_parser = parse_frames)]
    frames_per_clip: Vec<(String, usize)>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "SPYRANK_JOBS")]
    jobs: Option<usize>,
    /// Progress messages on stderr (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted spy effects
    Synth(SynthArgs),
    /// Check a dataset manifest and its feature files
    Validate(DatasetArgs),
    /// Fit encoders on every game and write per-family feature tables
    Encode(EncodeArgs),
    /// Fit the full pipeline on every game and write a model bundle
    Train(OutArgs),
    /// Run game-disjoint cross-validation and write the report
    Evaluate(OutArgs),
    /// Run leave-one-family-out ablation under cross-validation
    Ablate(OutArgs),
    /// Render the tables of a saved report
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// Generator spec file (JSON); flags override its fields
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Number of games
    #[arg(long)]
    games: Option<usize>,
    /// Spy mean shift in noise standard deviations
    #[arg(long)]
    effect: Option<f64>,
    /// Dimensions receiving the effect, as channel[i] or a channel name
    #[arg(long, value_delimiter = ',', default_value = "fau[0],emotion[0],eye_head[0]")]
    effect_on: Vec<String>,
    /// Overwrite an existing dataset
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Dataset manifest, or the directory holding manifest.json
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Output directory, created if absent
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[command(flatten)]
    target: OutArgs,
    /// Use the encoders of a trained bundle instead of fitting new ones
    #[arg(long, value_name = "FILE")]
    bundle: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report file written by `evaluate` or `ablate`
    file: PathBuf,
    /// Ensemble rows to show
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn parse_frames(s: &str) -> Result<(String, usize), String> {
    let (name, count) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CHANNEL=COUNT, got {s:?}"))?;
    let count: usize = count.trim().parse().map_err(|e| format!("bad count in {s:?}: {e}"))?;
    if name.trim().is_empty() {
        return Err(format!("empty channel name in {s:?}"));
    }
    Ok((name.trim().to_string(), count))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => commands::synth(g, a),
        Command::Validate(a) => commands::validate(g, a),
        Command::Encode(a) => commands::encode(g, a),
        Command::Train(a) => commands::train(g, a),
        Command::Evaluate(a) => commands::evaluate(g, a),
        Command::Ablate(a) => commands::ablate(g, a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn frames_flag() {
        assert_eq!(parse_frames("eye_head=300").unwrap(), ("eye_head".into(), 300));
        assert!(parse_frames("eye_head").is_err());
        assert!(parse_frames("=3").is_err());
        assert!(parse_frames("fau=x").is_err());
    }
}
