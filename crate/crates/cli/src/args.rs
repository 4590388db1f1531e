use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "robclust",
    version,
    about = "Outlier-aware clustering with sparsity-regularized outlier vectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic data set plus truth sidecars.
    Gen(GenArgs),
    /// Fit one algorithm at a fixed λ, or tune λ to a target outlier count.
    Fit(FitArgs),
    /// Run the full warm-started λ path and report every step.
    Path(FitArgs),
    /// Score a report against truth files.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Spherical,
    Rings,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "spherical")]
    pub kind: DataKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the default number of outliers.
    #[arg(long)]
    pub outliers: Option<usize>,
    /// Points CSV; `.truth.csv` and (spherical) `.centers.csv` sidecars go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoArg {
    /// Robust K-means with outliers disabled.
    Kmeans,
    Rkm,
    Wrkm,
    Rpc,
    Wrpc,
    Krkm,
    Krpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingArg {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Random,
    /// Laplacian eigenmap of the graph (or of the kernel as an affinity).
    Spectral,
}

/// `linear`, `gaussian:ALPHA`, `gaussian:auto`, `poly:DEGREE` or `graph`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelArg {
    Linear,
    Gaussian { alpha: Option<f64> },
    Poly { degree: u32 },
    Graph,
}

impl FromStr for KernelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        match (name, param) {
            ("linear", None) => Ok(KernelArg::Linear),
            ("graph", None) => Ok(KernelArg::Graph),
            ("gaussian", Some("auto")) => Ok(KernelArg::Gaussian { alpha: None }),
            ("gaussian", Some(a)) => match a.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(KernelArg::Gaussian { alpha: Some(v) }),
                _ => Err(format!(
                    "gaussian width must be a positive number or 'auto', got {a:?}"
                )),
            },
            ("poly", Some(d)) => match d.parse::<u32>() {
                Ok(v) if v >= 1 => Ok(KernelArg::Poly { degree: v }),
                _ => Err(format!("polynomial degree must be a positive integer, got {d:?}")),
            },
            _ => Err(format!(
                "unknown kernel {s:?}; expected linear, gaussian:ALPHA|auto, poly:DEGREE or graph"
            )),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    #[arg(long)]
    pub clusters: usize,
    /// Fixed outlier-controlling parameter (`inf` disables outliers).
    #[arg(long, conflicts_with = "target_outliers")]
    pub lambda: Option<f64>,
    /// Tune λ along a warm-started path until this many points are flagged.
    #[arg(long)]
    pub target_outliers: Option<usize>,
    /// Membership exponent; 1 is hard assignment.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent seeded starts; the lowest-cost one is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Required for krkm/krpc.
    #[arg(long)]
    pub kernel: Option<KernelArg>,
    /// CSV of points, or an edge list with `--kernel graph`.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the last CSV column as integer truth labels.
    #[arg(long)]
    pub label_column: bool,
    /// `label,outlier` truth file for metrics in the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitArg,
    /// Log-penalty ε for wrkm/wrpc (default: derived from the plain fit).
    #[arg(long)]
    pub reweight_eps: Option<f64>,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include soft memberships per point.
    #[arg(long)]
    pub emit_soft: bool,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, value_enum, default_value = "log")]
    pub spacing: SpacingArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Report written by `fit` or `path`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// True centers, one per row, for the centroid RMSE.
    #[arg(long)]
    pub centers: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
