use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use alphalaw::records::PriorMode;

#[derive(Debug, Parser)]
#[command(
    name = "alphalaw",
    version,
    about = "Simulate, estimate and stress-test tempered belief revision q' ∝ (q·b)^α",
    args_override_self = true
)]
pub struct Cli {
    /// Base seed; every random step derives its stream from it
    #[arg(
        long,
        global = true,
        help_heading = "Global options",
        default_value_t = 0
    )]
    pub seed: u64,

    /// Output directory for tables and the manifest
    #[arg(
        long,
        global = true,
        help_heading = "Global options",
        default_value = "out"
    )]
    pub out: PathBuf,

    /// Worker threads (default: all cores); never changes the output
    #[arg(long, global = true, help_heading = "Global options")]
    pub jobs: Option<usize>,

    /// TOML file supplying defaults for flags not given on the command line
    #[arg(long, global = true, help_heading = "Global options")]
    pub config: Option<PathBuf>,

    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, help_heading = "Global options", action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the update from one prior and report contraction diagnostics
    Simulate(SimulateArgs),
    /// Fit the revision exponent over a record file
    Estimate(EstimateArgs),
    /// Fit one exponent per record
    PerProblem(PerProblemArgs),
    /// Refit after re-encoding evidence at several strengths
    SweepEvidence(SweepEvidenceArgs),
    /// Refit after randomly flipping the endorsed candidate
    AblateNoise(AblateNoiseArgs),
    /// Compare per-problem exponents across candidate counts
    AblateK(AblateKArgs),
    /// Trend of per-problem exponents across revision steps
    Multistep(MultistepArgs),
    /// Conditioning of the two-exponent model under different priors
    Identifiability(IdentifiabilityArgs),
    /// Compare confidence signals as predictors of correctness
    Calibrate(CalibrateArgs),
    /// Drop fallback records and heavily contaminated models
    Filter(FilterArgs),
    /// Generate synthetic records with a known exponent
    Synth(SynthArgs),
    /// Elicit records from a chat model or the built-in mock
    Collect(CollectArgs),
    /// Counts and per-group fits for a record file
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::PerProblem(_) => "per-problem",
            Command::SweepEvidence(_) => "sweep-evidence",
            Command::AblateNoise(_) => "ablate-noise",
            Command::AblateK(_) => "ablate-k",
            Command::Multistep(_) => "multistep",
            Command::Identifiability(_) => "identifiability",
            Command::Calibrate(_) => "calibrate",
            Command::Filter(_) => "filter",
            Command::Synth(_) => "synth",
            Command::Collect(_) => "collect",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Constant exponent
    #[arg(long, conflicts_with = "schedule")]
    pub alpha: Option<f64>,
    /// Per-step exponents, comma separated; sets the number of steps
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    /// Number of candidates
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Steps for a constant exponent
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Evidence strength on the endorsed candidate
    #[arg(long, default_value_t = 0.9)]
    pub evidence_s: f64,
    /// Endorsed candidate
    #[arg(long, default_value_t = 0)]
    pub correct_index: usize,
    /// Starting belief: uniform, dirichlet or dirichlet:<concentration>
    #[arg(long, default_value = "dirichlet:1")]
    pub prior: PriorMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateModel {
    /// One exponent, an intercept per record
    Pooled,
    /// One exponent, one shared intercept
    PooledCommon,
    /// Separate exponents on prior and evidence
    TwoParam,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Record file (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimateModel::Pooled)]
    pub model: EstimateModel,
    /// Bootstrap resamples over records; 0 skips the interval
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Also fit each model × dataset group
    #[arg(long)]
    pub by_group: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PerProblemArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only fits with R² above this
    #[arg(long)]
    pub r2_threshold: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepEvidenceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Strengths to re-encode at, comma separated [default: 0.51,0.6,0.7,0.8,0.9,0.99]
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Permutations for the trend test
    #[arg(long, default_value_t = 9999)]
    pub permutations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateNoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Flip probabilities, comma separated [default: 0,0.2,0.4]
    #[arg(long, value_delimiter = ',')]
    pub flip_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 9999)]
    pub permutations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateKArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only per-problem fits with R² above this
    #[arg(long, default_value_t = 0.3)]
    pub r2_threshold: f64,
    #[arg(long, default_value_t = 9999)]
    pub permutations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MultistepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Bootstrap resamples per step; 0 skips the intervals
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 9999)]
    pub permutations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct IdentifiabilityArgs {
    /// Trials per prior family
    #[arg(long, default_value_t = 300)]
    pub trials: usize,
    /// Records per trial
    #[arg(long, default_value_t = 50)]
    pub records: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Generating exponent
    #[arg(long, default_value_t = 1.17)]
    pub alpha: f64,
    /// Log-weight noise
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Equal-width confidence bins for the calibration error
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Models with a larger fallback share are dropped entirely
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    /// Where to write kept records [default: <out>/filtered.jsonl]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Problems to generate
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Shared exponent
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Exponent on the prior; needs --alpha-b
    #[arg(long, requires = "alpha_b")]
    pub alpha_q0: Option<f64>,
    /// Exponent on the evidence; needs --alpha-q0
    #[arg(long, requires = "alpha_q0")]
    pub alpha_b: Option<f64>,
    /// Per-step exponents for chained records, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["alpha_q0", "alpha_b"])]
    pub schedule: Option<Vec<f64>>,
    /// Log-weight noise
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// uniform, dirichlet or dirichlet:<concentration>
    #[arg(long, default_value = "dirichlet:0.5")]
    pub prior: PriorMode,
    #[arg(long, default_value_t = 0.9)]
    pub evidence_s: f64,
    #[arg(long, default_value = "synthetic")]
    pub model_label: String,
    #[arg(long, default_value = "synthetic")]
    pub dataset_label: String,
    /// Where to write records [default: <out>/records.jsonl]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Deterministic built-in responder
    Mock,
    /// Chat-completion endpoint over HTTP
    Http,
}

#[derive(Debug, Args, Serialize)]
pub struct CollectArgs {
    /// Problem file (JSON lines with id, prompt, options, correct_index)
    #[arg(long, conflicts_with = "mock_problems")]
    pub problems: Option<PathBuf>,
    /// Generate this many placeholder problems instead of reading a file
    #[arg(long)]
    pub mock_problems: Option<usize>,
    #[arg(long, value_enum, default_value_t = ProviderKind::Mock)]
    pub provider: ProviderKind,
    /// Chat-completion URL for the http provider
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the endpoint and stored on records
    #[arg(long, default_value = "mock")]
    pub model_name: String,
    /// Environment variable holding the bearer token
    #[arg(long)]
    pub token_env: Option<String>,
    /// Candidates per generated problem
    #[arg(long, default_value_t = 8)]
    pub m_candidates: usize,
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.9)]
    pub evidence_s: f64,
    #[arg(long, default_value_t = 256)]
    pub max_tokens: u32,
    /// Problems in flight at once
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 60.0)]
    pub timeout_secs: f64,
    /// Base backoff between retries
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    /// Directory with prior.txt and posterior.txt [default: built-in v1]
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Mock: exponent its posteriors follow
    #[arg(long, default_value_t = 1.0)]
    pub mock_alpha: f64,
    /// Mock: share of problems with an unparseable posterior
    #[arg(long, default_value_t = 0.0)]
    pub mock_fail_rate: f64,
    /// Mock: prior family
    #[arg(long, default_value = "dirichlet:1")]
    pub mock_prior: PriorMode,
    /// Mock: answer every request with unparseable text
    #[arg(long)]
    pub mock_malformed: bool,
    /// Where to write records [default: <out>/collected.jsonl]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Bootstrap resamples for the group fits; 0 skips the intervals
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
}
