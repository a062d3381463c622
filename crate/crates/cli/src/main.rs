//! `gazeprobe` command-line interface.
//!
//! Exit status: 0 on success, 1 when the input or arguments are invalid,
//! 2 when the environment fails (unreadable or unwritable files).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeprobe_core::FeatureGroup;

mod commands;

#[derive(Parser)]
#[command(name = "gazeprobe", version, about = "Sentence complexity, eye-tracking metrics and embedding probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the nine complexity features for every sentence of a CoNLL-U file.
    Profile(ProfileArgs),
    /// Turn fixations or per-sentence metrics into a 0-100 scaled dataset.
    GazeAggregate(GazeArgs),
    /// Shuffle word order within each sentence.
    Scramble(ScrambleArgs),
    /// Fit one linear SVR per metric on complexity features.
    TrainSvr(TrainSvrArgs),
    /// Fit a multi-task linear head from embeddings to all four metrics.
    TrainHead(TrainHeadArgs),
    /// Compare how well two embedding sets encode the complexity features.
    Probe(ProbeArgs),
    /// Cross-validated explained variance and R² per metric and fold.
    Evaluate(EvaluateArgs),
    /// Scores against randomly re-paired targets.
    Baseline(BaselineArgs),
    /// Run an experiment config and write its report bundle.
    Run(RunArgs),
    /// Write a synthetic input set for trying the other commands.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    conllu: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value = "xx")]
    lang: String,
    /// Zipf value below which a word counts as low frequency.
    #[arg(long, default_value_t = 4.0)]
    threshold: f64,
    /// Drop sentences with fewer non-punctuation tokens.
    #[arg(long, default_value_t = 0)]
    min_tokens: usize,
    /// Leave punctuation characters out of the average word length.
    #[arg(long)]
    no_punct_chars: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GazeArgs {
    /// Raw fixation CSV (needs --conllu for sentence bounds).
    #[arg(long, conflicts_with = "metrics", required_unless_present = "metrics")]
    fixations: Option<PathBuf>,
    #[arg(long, requires = "fixations")]
    conllu: Option<PathBuf>,
    /// Per-sentence metric CSV, already averaged over participants.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Where to write the min/max scaler as JSON.
    #[arg(long)]
    scaler: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Conllu,
    Text,
}

#[derive(Args)]
struct ScrambleArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to conllu for `.conllu` files and text otherwise.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "xx")]
    lang: String,
    /// Keep sentence-final punctuation in place.
    #[arg(long)]
    pin_final_punct: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SvrOptions {
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct HeadOptions {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 40)]
    eval_every: usize,
    /// Evaluations without improvement before stopping; 0 disables.
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct TrainSvrArgs {
    /// Profile CSV written by `profile`.
    #[arg(long)]
    profiles: PathBuf,
    /// Scaled metric CSV written by `gaze-aggregate`.
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_group)]
    group: FeatureGroup,
    #[command(flatten)]
    svr: SvrOptions,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Per-epoch objective log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TrainHeadArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    #[command(flatten)]
    head: HeadOptions,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Evaluation log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    pretrained: PathBuf,
    #[arg(long)]
    finetuned: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long, default_value = "xx")]
    lang: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 800)]
    train_size: usize,
    #[arg(long, default_value_t = 200)]
    test_size: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train nine independent single-output probes.
    #[arg(long)]
    single_task: bool,
    #[arg(short, long)]
    output: PathBuf,
}

/// Inputs shared by `evaluate` and `baseline`: either complexity features
/// (SVR) or embeddings (multi-task head).
#[derive(Args)]
struct ModelInputs {
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    profiles: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value = "all", value_parser = parse_group)]
    group: FeatureGroup,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "xx")]
    lang: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: ModelInputs,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write feature-metric Spearman correlations (needs --profiles).
    #[arg(long, requires = "profiles")]
    correlations: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    inputs: ModelInputs,
    /// Number of random pairings.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    sentences: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_group(s: &str) -> Result<FeatureGroup, String> {
    s.parse().map_err(|e: gazeprobe_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
