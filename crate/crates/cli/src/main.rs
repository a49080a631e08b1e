//! `slr`: dataset preparation, feature extraction, head training,
//! evaluation, prediction, benchmarking, and frame streaming.

mod commands;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "slr", version, about = "Static sign-language gesture classifier on a frozen MobileNetV2 backbone")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a folder-per-class dataset into a train/val manifest.
    Prepare(PrepareArgs),
    /// Run the frozen backbone over a manifest and cache the features.
    Extract(ExtractArgs),
    /// Train the classification head on cached features.
    Train(TrainArgs),
    /// Score a checkpoint on one partition of a manifest.
    Eval(EvalArgs),
    /// Classify a single image.
    Predict(PredictArgs),
    /// Time the per-frame path over a set of frames.
    Bench(BenchArgs),
    /// Classify frames one by one and print a line per frame.
    Stream(StreamArgs),
    /// Write a randomly initialized backbone bundle.
    InitWeights(InitWeightsArgs),
    /// Compare backbone features against a fixture bundle.
    VerifyFixture(VerifyFixtureArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Dataset root holding one directory per class.
    #[arg(long)]
    root: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    out: PathBuf,
    /// Class summary to write; defaults to `<out>.classes.tsv`.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each class assigned to training.
    #[arg(long, default_value_t = slr_core::datapipe::DEFAULT_TRAIN_RATIO)]
    ratio: f64,
}

#[derive(Args)]
struct ModelArgs {
    /// Backbone bundle (`.slrw`).
    #[arg(long)]
    weights: PathBuf,
    /// Trained head checkpoint (`.slrw`).
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Dataset root the manifest paths are relative to.
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Feature bundle to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Number of augmented passes over the training partition to cache
    /// alongside the plain features.
    #[arg(long, default_value_t = 0)]
    augment_epochs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature bundle written by `extract`.
    #[arg(long)]
    features: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch history; defaults to `<out>.history.tsv`.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f32,
    /// Epochs without a new best validation loss tolerated before stopping.
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = slr_core::head::DEFAULT_HIDDEN)]
    hidden_units: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// `train`, `val`, or `all`.
    #[arg(long, default_value = "val")]
    partition: String,
    /// Confusion matrix CSV to write.
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// `key = value` report to write.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct FrameSourceArgs {
    /// Directory of image frames, read in lexicographic order.
    #[arg(long, group = "source")]
    frames: Option<PathBuf>,
    /// Read length-prefixed raw RGB frames from standard input.
    #[arg(long, group = "source")]
    stdin: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: FrameSourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = slr_core::metrics::DEFAULT_WARMUP)]
    warmup: usize,
    /// Per-frame durations, one per line in milliseconds.
    #[arg(long)]
    raw: PathBuf,
    /// `key = value` summary to write.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    source: FrameSourceArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct InitWeightsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    width: f32,
}

#[derive(Args)]
struct VerifyFixtureArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    fixture: PathBuf,
    /// Largest acceptable absolute feature difference.
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Bench(a) => commands::bench(a),
        Command::Stream(a) => commands::stream(a),
        Command::InitWeights(a) => commands::init_weights(a),
        Command::VerifyFixture(a) => commands::verify_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
