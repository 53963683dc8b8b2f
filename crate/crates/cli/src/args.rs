use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use polyhe_ckks::params::PRESET_NAMES;
use polyhe_core::approx::{ActivationKind, DEFAULT_GRID_POINTS};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "polyhe", version, about = "Polynomial activations and hybrid CKKS inference")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random choice (keys, encryption noise, fixtures).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads for infer and bench (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command")]
pub enum Command {
    /// Fit a polynomial to an activation: weighted least squares, Powell, max error.
    Fit(FitArgs),
    /// Check a fit against the exact weighted minimax LP.
    Verify(VerifyArgs),
    /// Fold batch-norm into FC1.
    Fold(FoldArgs),
    /// Run encrypted (or plaintext) inference over a feature file.
    Infer(InferArgs),
    /// Per-stage latency table on a synthetic 512-512 fixture.
    Bench(BenchArgs),
    /// Print and validate a CKKS parameter preset.
    Params(ParamsArgs),
    /// Write a synthetic unfolded model and matching features.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value = "softplus", value_parser = parse_activation)]
    pub activation: ActivationKind,

    #[arg(long, default_value_t = 4)]
    pub degree: usize,

    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-7.0, 7.0])]
    pub domain: Vec<f64>,

    /// `paper`, `uniform`, or `lo:hi:w,...,default`.
    #[arg(long, default_value = "paper", allow_hyphen_values = true)]
    pub weights: String,

    /// Sample grid size.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Output of `fit`, or a bare activation JSON.
    #[arg(long)]
    pub fit: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FoldArgs {
    /// Model file with a batch_norm block.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Compare both paths on N random inputs.
    #[arg(long, value_name = "N")]
    pub check: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    /// Folded model file.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub features: PathBuf,

    #[arg(long, value_parser = PRESET_NAMES, required_unless_present = "plaintext_oracle")]
    pub preset: Option<String>,

    /// Skip encryption and report the plaintext pipeline only.
    #[arg(long)]
    pub plaintext_oracle: bool,

    /// Use only the first T samples.
    #[arg(long, value_name = "T")]
    pub limit: Option<usize>,

    /// Fail on the first precision error; `false` flags the sample instead.
    #[arg(long, action = ArgAction::Set, default_value_t = true, value_name = "BOOL")]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_parser = PRESET_NAMES)]
    pub preset: String,

    #[arg(long, default_value_t = 10)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ParamsArgs {
    #[arg(long, value_parser = PRESET_NAMES)]
    pub preset: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Unfolded model path.
    #[arg(long)]
    pub out_model: PathBuf,

    /// Feature CSV path.
    #[arg(long)]
    pub out_features: PathBuf,

    #[arg(long, default_value_t = 512)]
    pub feature_dim: usize,

    #[arg(long, default_value_t = 512)]
    pub hidden_dim: usize,

    #[arg(long, default_value_t = 10)]
    pub classes: usize,

    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    s.parse().map_err(|e: polyhe_core::CoreError| e.to_string())
}
