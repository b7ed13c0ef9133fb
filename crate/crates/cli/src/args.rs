use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pvdtw",
    version,
    about = "DTW K-means fault detection for photovoltaic panel current signals",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads for distance matrices, restarts and windows (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of default flag values; keys are flag names, explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Suppress the per-stage log on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fleet CSV and its ground-truth labels.
    Synth(SynthArgs),
    /// Compute the pairwise DTW distance matrix of a fleet.
    Dist(DistArgs),
    /// Fit DTW K-means and write the cluster model.
    Cluster(ClusterArgs),
    /// Run the full healthy/abnormal diagnosis.
    Diagnose(DiagnoseArgs),
    /// Print the text summary of a saved diagnosis report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 12)]
    pub panels: usize,
    /// Broken-glass panels, placed last.
    #[arg(long, default_value_t = 4)]
    pub faulty: usize,
    /// Broken-glass amplitude scale, in (0, 1).
    #[arg(long, default_value_t = 0.75)]
    pub scale: f64,
    /// Snail-trail panels, placed just before the broken-glass ones.
    #[arg(long, default_value_t = 0)]
    pub snail: usize,
    #[arg(long, default_value_t = 0.99)]
    pub snail_scale: f64,
    #[arg(long, default_value_t = pvdtw::kmeans::DEFAULT_SEED)]
    pub seed: u64,
    /// Noise standard deviation as a fraction of the peak current.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Peak clear-sky current in amperes.
    #[arg(long, default_value_t = 8.0)]
    pub peak: f64,
    /// Sunrise, in minutes after midnight.
    #[arg(long, default_value_t = 360.0)]
    pub sunrise: f64,
    /// Sunset, in minutes after midnight.
    #[arg(long, default_value_t = 1200.0)]
    pub sunset: f64,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Labels JSON (defaults to `<output>.labels.json`).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub input: PathBuf,
    /// Sakoe-Chiba radius in samples (unconstrained when omitted).
    #[arg(long)]
    pub band: Option<usize>,
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Output format; inferred from the output extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Longest gap, in samples, filled by interpolation.
    #[arg(long, default_value_t = pvdtw::signal::DEFAULT_MAX_GAP)]
    pub max_gap: usize,
    /// Grid period in seconds for resampling unaligned input.
    #[arg(long, default_value_t = pvdtw::signal::DEFAULT_PERIOD)]
    pub period: i64,
    /// Z-normalize each panel before computing distances.
    #[arg(long)]
    pub normalize: bool,
    /// Trim leading/trailing samples where every panel is below this current (A).
    #[arg(long, value_name = "AMPS")]
    pub trim_dark: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KMeansArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = pvdtw::kmeans::DEFAULT_SEED)]
    pub seed: u64,
    /// Sakoe-Chiba radius in samples (unconstrained when omitted).
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub n_init: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = pvdtw::dba::DEFAULT_MAX_ITER)]
    pub dba_max_iter: usize,
    #[arg(long, default_value_t = pvdtw::dba::DEFAULT_TOL)]
    pub dba_tol: f64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[command(flatten)]
    pub prep: PrepArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Diagnose sliding windows of this many samples and vote.
    #[arg(long)]
    pub window: Option<usize>,
    /// Step between windows, in samples.
    #[arg(long, default_value_t = 1, requires = "window")]
    pub stride: usize,
    /// Report JSON (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Text summary file (printed to stdout when omitted and --output is set).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Per-sample plot CSV with cluster and verdict columns.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
