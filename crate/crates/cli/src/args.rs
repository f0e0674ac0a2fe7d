use std::path::PathBuf;

use bicomm::detectors::{AnalyticConstants, DetectorTag, DEFAULT_BUDGET};
use bicomm::rates::RateConstants;
use bicomm::report::OutputFormat;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bicomm",
    version,
    about = "Detect a planted k1 x k2 community in a bipartite random graph",
    max_term_width = 100
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an adjacency matrix from the null or planted model
    Gen(GenArgs),
    /// Evaluate a test statistic on a matrix file
    Stat(StatArgs),
    /// Calibrate a rejection threshold by null simulation
    Calibrate(CalibrateArgs),
    /// Estimate Type I and Type II errors at one signal strength
    Risk(RiskArgs),
    /// Evaluate the rate functions, branch and signal bounds of a shape
    Rates(RatesArgs),
    /// Exact second-moment lower bound on the minimax risk
    Lb(LbArgs),
    /// Power sweep over a grid of signal strengths
    Sweep(Box<SweepArgs>),
    /// Rate table over a grid of shapes
    Phase(PhaseArgs),
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    /// Number of left vertices
    #[arg(long)]
    pub n1: usize,
    /// Number of right vertices
    #[arg(long)]
    pub n2: usize,
    /// Community size on the left
    #[arg(long)]
    pub k1: usize,
    /// Community size on the right
    #[arg(long)]
    pub k2: usize,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Cap on n/k^2 above which the phi rates are infinite
    #[arg(long = "c-phi", default_value_t = RateConstants::default().c_phi)]
    pub c_phi: f64,
    /// Cutoff on n/k^2 selecting truncated over total degree
    #[arg(long = "c1", default_value_t = RateConstants::default().c1)]
    pub c1: f64,
    /// Lower signal bound constant
    #[arg(long = "c-delta", default_value_t = RateConstants::default().c_delta)]
    pub c_delta: f64,
    /// Upper signal bound constant
    #[arg(long = "C-delta", default_value_t = RateConstants::default().c_delta_upper)]
    pub c_delta_upper: f64,
    /// Density assumption constant
    #[arg(long = "C-eta", default_value_t = RateConstants::default().c_eta)]
    pub c_eta: f64,
}

impl RateArgs {
    pub fn constants(&self) -> RateConstants {
        RateConstants {
            c_phi: self.c_phi,
            c1: self.c1,
            c_delta: self.c_delta,
            c_delta_upper: self.c_delta_upper,
            c_eta: self.c_eta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Calibrated,
    Analytic,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// TOTAL_DEGREE, TRUNC_DEGREE_AXIS1, TRUNC_DEGREE_AXIS2, MAX_TRUNC_AXIS1, MAX_TRUNC_AXIS2 or DELTA_STAR
    #[arg(long, default_value = "DELTA_STAR")]
    pub detector: DetectorTag,
    /// Truncation level; the analytic level when omitted
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Nominal Type I error
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Analytic threshold constant
    #[arg(long = "C-star", default_value_t = AnalyticConstants::default().c_star)]
    pub c_star: f64,
    /// Analytic threshold exponent constant
    #[arg(long = "c-prime", default_value_t = AnalyticConstants::default().c_prime)]
    pub c_prime: f64,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Worker threads; results do not depend on this
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Largest number of subsets a max test may scan
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output path; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format: csv or json
    #[arg(long, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of left vertices
    #[arg(long)]
    pub n1: usize,
    /// Number of right vertices
    #[arg(long)]
    pub n2: usize,
    /// Community size on the left
    #[arg(long, required_unless_present = "null")]
    pub k1: Option<usize>,
    /// Community size on the right
    #[arg(long, required_unless_present = "null")]
    pub k2: Option<usize>,
    /// Edge probability outside the community
    #[arg(long)]
    pub p0: f64,
    /// Signal strength inside the community
    #[arg(long, required_unless_present = "null", conflicts_with = "null")]
    pub delta: Option<f64>,
    /// Sample from the null model
    #[arg(long)]
    pub null: bool,
    /// Random seed
    #[arg(long)]
    pub seed: u64,
    /// Matrix output path; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the planted support as JSON to this path
    #[arg(long, conflicts_with = "null")]
    pub support: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatArgs {
    /// Matrix file
    #[arg(long)]
    pub input: PathBuf,
    /// Community size on the left
    #[arg(long)]
    pub k1: usize,
    /// Community size on the right
    #[arg(long)]
    pub k2: usize,
    /// Edge probability under the null
    #[arg(long)]
    pub p0: f64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// How the reported threshold is obtained
    #[arg(long = "threshold-mode", value_enum, default_value_t = Mode::Analytic)]
    pub threshold_mode: Mode,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Null samples for a calibrated threshold
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Random seed; required for a calibrated threshold
    #[arg(long, required_if_eq("threshold_mode", "calibrated"))]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub rates: RateArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Edge probability under the null
    #[arg(long)]
    pub p0: f64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Nominal Type I error
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Null samples
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Random seed
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub rates: RateArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Edge probability outside the community
    #[arg(long)]
    pub p0: f64,
    /// Signal strength inside the community
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// How the threshold is obtained
    #[arg(long = "threshold-mode", value_enum, default_value_t = Mode::Calibrated)]
    pub threshold_mode: Mode,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Monte Carlo trials under each hypothesis, also used for calibration
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Random seed
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub rates: RateArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Edge probability; adds signal bounds and the density check
    #[arg(long)]
    pub p0: Option<f64>,
    #[command(flatten)]
    pub rates: RateArgs,
}

#[derive(Debug, Args)]
pub struct LbArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Edge probability outside the community
    #[arg(long)]
    pub p0: f64,
    /// Signal strength inside the community
    #[arg(long)]
    pub delta: f64,
    /// Worker threads; results do not depend on this
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Every option overrides the matching field of `--config`; without a config
/// the shape, `--p0`, `--delta` and `--seed` are required.
#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Identifier written to every row [default: experiment]
    #[arg(long = "experiment-id")]
    pub experiment_id: Option<String>,
    /// Number of left vertices
    #[arg(long)]
    pub n1: Option<usize>,
    /// Number of right vertices
    #[arg(long)]
    pub n2: Option<usize>,
    /// Community size on the left
    #[arg(long)]
    pub k1: Option<usize>,
    /// Community size on the right
    #[arg(long)]
    pub k2: Option<usize>,
    /// Edge probability outside the community
    #[arg(long)]
    pub p0: Option<f64>,
    /// Comma-separated signal strengths
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub delta: Option<Vec<f64>>,
    /// Detector tag [default: DELTA_STAR]
    #[arg(long)]
    pub detector: Option<DetectorTag>,
    /// Truncation level; the analytic level when omitted
    #[arg(long)]
    pub tau: Option<f64>,
    /// How the threshold is obtained [default: calibrated]
    #[arg(long = "threshold-mode", value_enum)]
    pub threshold_mode: Option<Mode>,
    /// Nominal Type I error [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Analytic threshold constant [default: 1]
    #[arg(long = "C-star")]
    pub c_star: Option<f64>,
    /// Analytic threshold exponent constant [default: 1]
    #[arg(long = "c-prime")]
    pub c_prime: Option<f64>,
    /// Monte Carlo trials under each hypothesis [default: 1000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Null samples for a calibrated threshold [default: --trials]
    #[arg(long = "calibration-trials")]
    pub calibration_trials: Option<usize>,
    /// Random seed, also seeding calibration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target risk for the bisection [default: 0.5]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Also bisect for the signal strength where risk crosses --eta, to this tolerance
    #[arg(long)]
    pub bisect: Option<f64>,
    /// Cap on n/k^2 above which the phi rates are infinite [default: 8]
    #[arg(long = "c-phi")]
    pub c_phi: Option<f64>,
    /// Cutoff on n/k^2 selecting truncated over total degree [default: 1]
    #[arg(long = "c1")]
    pub c1: Option<f64>,
    /// Lower signal bound constant [default: 0.01]
    #[arg(long = "c-delta")]
    pub c_delta: Option<f64>,
    /// Upper signal bound constant [default: 16]
    #[arg(long = "C-delta")]
    pub c_delta_upper: Option<f64>,
    /// Density assumption constant [default: 1]
    #[arg(long = "C-eta")]
    pub c_eta: Option<f64>,
    /// Largest number of subsets a max test may scan [default: 1000000]
    #[arg(long)]
    pub budget: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub out: OutArgs,
    /// Provenance JSON path [default: <out>.meta.json when --out is set]
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Comma-separated left sizes
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub n1: Vec<usize>,
    /// Comma-separated right sizes
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub n2: Vec<usize>,
    /// Comma-separated left community sizes
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub k1: Vec<usize>,
    /// Comma-separated right community sizes
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub k2: Vec<usize>,
    /// Edge probability for the density check
    #[arg(long)]
    pub p0: f64,
    #[command(flatten)]
    pub rates: RateArgs,
    #[command(flatten)]
    pub out: OutArgs,
}
