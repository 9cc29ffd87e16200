//! `whisperkit` — reproducible whispered-speech ASR experiments from the
//! command line.
//!
//! Subcommands cover the full pipeline: `synth-dataset` builds a synthetic
//! corpus, `features` extracts and caches feature files, `train` fits the
//! desk-scale acoustic model with CTC + AdamW, `decode` produces hypotheses
//! (greedy or beam), `score` computes WER/CER reports, `analyze` measures
//! whisper-vs-normal acoustics, and `manifest-summarize` tabulates a corpus.
//!
//! Exit codes: 0 success, 1 partial data failures, 2 usage/config errors.
//! All randomness flows from explicit `--seed` flags; repeated runs with the
//! same inputs and seed produce byte-identical outputs. `WHISPERKIT_LOG`
//! controls log verbosity.

mod commands;
mod config;
mod output;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// An error that should exit with code 2 (bad flags or config) rather
/// than 1 (data trouble mid-run).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl UsageError {
    pub fn msg(text: impl Into<String>) -> anyhow::Error {
        anyhow::Error::new(UsageError(text.into()))
    }

    pub fn from_anyhow(e: anyhow::Error) -> anyhow::Error {
        anyhow::Error::new(UsageError(format!("{e:#}")))
    }
}

#[derive(Parser)]
#[command(name = "whisperkit", version, about = "Whispered-speech ASR experimentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecodeMethod {
    Greedy,
    Beam,
}

impl std::fmt::Display for DecodeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecodeMethod::Greedy => "greedy",
            DecodeMethod::Beam => "beam",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitFilter {
    Train,
    Test,
    All,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Dataset manifest (.jsonl or .tsv)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional TOML config file (flags > file > defaults)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master RNG seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory for feature files and the index
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint output path
    #[arg(long)]
    pub out: PathBuf,
    /// Training-log path (default: checkpoint path + .log.jsonl)
    #[arg(long)]
    pub log_out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Hypotheses JSONL output path
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = DecodeMethod::Beam)]
    pub method: DecodeMethod,
    #[arg(long, default_value_t = 16)]
    pub beam_width: usize,
    /// Which split of the manifest to decode
    #[arg(long, value_enum, default_value_t = SplitFilter::All)]
    pub split: SplitFilter,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Hypotheses JSONL from `decode`
    #[arg(long)]
    pub hyps: PathBuf,
    /// Output directory for report.json / report.csv / aggregate.csv /
    /// alignment.txt
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitFilter::All)]
    pub split: SplitFilter,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory for analysis.csv and contrast.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Optional CSV output path (stdout table is always printed)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory (wavs/, manifest.jsonl, dataset_meta.json)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    /// Optional TOML config (hashed into output metadata)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature files for every manifest row (idempotent)
    Features(FeaturesArgs),
    /// Train the acoustic model with CTC + AdamW
    Train(TrainArgs),
    /// Decode a manifest with a trained checkpoint
    Decode(DecodeArgs),
    /// Score hypotheses against manifest transcripts (WER/CER)
    Score(ScoreArgs),
    /// Acoustic whisper-vs-normal analysis
    Analyze(AnalyzeArgs),
    /// Tabulate a manifest per (style, dialect, split)
    ManifestSummarize(SummarizeArgs),
    /// Build the synthetic 3-token evaluation corpus
    SynthDataset(SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("WHISPERKIT_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Features(args) => commands::features::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Decode(args) => commands::decode::run(args),
        Command::Score(args) => commands::score::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
        Command::ManifestSummarize(args) => commands::summarize::run(args),
        Command::SynthDataset(args) => commands::synth_dataset::run(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
