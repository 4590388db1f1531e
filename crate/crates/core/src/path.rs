//! Warm-started λ paths that stop once a requested number of outliers is
//! flagged.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::{self, KernelMatrix};
use crate::math;
use crate::model::{Algorithm, DataSet, FitConfig, FitResult, Init};
use crate::{rkm, rpc};

pub const MAX_GRID: usize = 1000;
/// Ratio between the last and first grid value.
pub const GRID_SPAN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Strictly decreasing positive λ values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() > MAX_GRID {
            return Err(Error::InvalidConfig(format!(
                "grid needs 1..={MAX_GRID} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "grid values must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidConfig("grid must be strictly decreasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `G` values from `lambda_max` down to `lambda_max · 1e-3`.
pub fn make_grid(lambda_max: f64, g: usize, spacing: Spacing) -> Result<LambdaGrid> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda_max must be positive and finite, got {lambda_max}"
        )));
    }
    if g < 2 {
        return Err(Error::InvalidConfig(format!("grid size must be >= 2, got {g}")));
    }
    let last = (g - 1) as f64;
    let values = (0..g)
        .map(|i| {
            let t = i as f64 / last;
            match spacing {
                Spacing::Log => lambda_max * math::exp(t * math::ln(GRID_SPAN)),
                Spacing::Linear => lambda_max * (1.0 - t * (1.0 - GRID_SPAN)),
            }
        })
        .collect();
    LambdaGrid::new(values)
}

/// Raw points or a kernel matrix, depending on the algorithm.
#[derive(Debug, Clone, Copy)]
pub enum PathInput<'a> {
    Data(&'a DataSet),
    Kernel(&'a KernelMatrix),
}

impl PathInput<'_> {
    pub fn n_points(&self) -> usize {
        match self {
            PathInput::Data(x) => x.n_points(),
            PathInput::Kernel(k) => k.n_points(),
        }
    }

    fn data(&self) -> Result<&DataSet> {
        match self {
            PathInput::Data(x) => Ok(x),
            PathInput::Kernel(_) => Err(Error::InvalidConfig(
                "this algorithm needs data points, not a kernel matrix".into(),
            )),
        }
    }

    fn kernel(&self) -> Result<&KernelMatrix> {
        match self {
            PathInput::Kernel(k) => Ok(k),
            PathInput::Data(_) => Err(Error::InvalidConfig(
                "kernel algorithms need a kernel matrix".into(),
            )),
        }
    }
}

/// One cold fit of `algorithm` at `cfg.lambda`. Reweighted algorithms run
/// the plain fit first and warm-start from it.
pub fn fit(
    algorithm: Algorithm,
    input: PathInput<'_>,
    n_clusters: usize,
    cfg: &FitConfig,
    init: Init,
) -> Result<FitResult> {
    match algorithm {
        Algorithm::Rkm => rkm::rkm_fit(input.data()?, n_clusters, &plain(cfg), init),
        Algorithm::Rpc => rpc::rpc_fit(input.data()?, n_clusters, &plain(cfg), init),
        Algorithm::Wrkm => {
            let x = input.data()?;
            let warm = rkm::rkm_fit(x, n_clusters, &plain(cfg), init)?;
            rkm::wrkm_fit(x, &weighted(cfg), &warm)
        }
        Algorithm::Wrpc => {
            let x = input.data()?;
            let warm = rpc::rpc_fit(x, n_clusters, &plain(cfg), init)?;
            rpc::wrpc_fit(x, &weighted(cfg), &warm)
        }
        Algorithm::Krkm => kernel::krkm_fit(input.kernel()?, n_clusters, cfg, init),
        Algorithm::Krpc => kernel::krpc_fit(input.kernel()?, n_clusters, cfg, init),
    }
}

fn plain(cfg: &FitConfig) -> FitConfig {
    cfg.clone().with_reweight(crate::model::Reweight::Off)
}

fn weighted(cfg: &FitConfig) -> FitConfig {
    match cfg.reweight {
        crate::model::Reweight::Off => cfg.clone().with_reweight(crate::model::Reweight::Auto),
        _ => cfg.clone(),
    }
}

/// Algorithm whose fit seeds the warm-start chain.
fn base_algorithm(algorithm: Algorithm) -> Algorithm {
    match algorithm {
        Algorithm::Wrkm => Algorithm::Rkm,
        Algorithm::Wrpc => Algorithm::Rpc,
        a => a,
    }
}

/// Outlier-free fit (`λ = ∞`) with the lowest final cost over `restarts`
/// seeds `cfg.seed, cfg.seed + 1, …`.
pub fn baseline_fit(
    algorithm: Algorithm,
    input: PathInput<'_>,
    n_clusters: usize,
    cfg: &FitConfig,
    restarts: usize,
) -> Result<FitResult> {
    let base = base_algorithm(algorithm);
    let mut best: Option<FitResult> = None;
    for r in 0..restarts.max(1) {
        let c = plain(cfg)
            .with_lambda(f64::INFINITY)
            .with_seed(cfg.seed.wrapping_add(r as u64));
        let f = fit(base, input, n_clusters, &c, Init::Random)?;
        if best.as_ref().is_none_or(|b| f.final_cost() < b.final_cost()) {
            best = Some(f);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Smallest λ at which one more cycle from `baseline` flags nothing.
pub fn lambda_max(algorithm: Algorithm, input: PathInput<'_>, baseline: &FitResult) -> Result<f64> {
    match base_algorithm(algorithm) {
        Algorithm::Rkm => rkm::lambda_max(input.data()?, &baseline.memberships),
        Algorithm::Rpc => rpc::lambda_max(input.data()?, &rpc::params_of(baseline)?),
        Algorithm::Krkm => kernel::lambda_max_krkm(input.kernel()?, &baseline.memberships),
        Algorithm::Krpc => kernel::lambda_max_krpc(input.kernel()?, baseline),
        _ => unreachable!("weighted algorithms map to their base"),
    }
}

/// Summary of the fit at one grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub lambda: f64,
    pub n_outliers: usize,
    pub flagged: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    /// Shared fit settings; `lambda` is overridden by the grid.
    pub fit: FitConfig,
    pub target: usize,
    /// Keep going while the count equals the target; stop once it exceeds it.
    pub continue_past_target: bool,
}

impl PathConfig {
    pub fn new(fit: FitConfig, target: usize) -> Self {
        Self {
            fit,
            target,
            continue_past_target: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub algorithm: Algorithm,
    pub target: usize,
    pub steps: Vec<PathStep>,
    /// Index into `steps`.
    pub selected: usize,
    pub target_reached: bool,
    /// Full result at the selected λ.
    pub fit: FitResult,
}

impl PathResult {
    pub fn selected_step(&self) -> &PathStep {
        &self.steps[self.selected]
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    /// Longest run of consecutive steps flagging exactly `count` points.
    pub fn plateau_len(&self, count: usize) -> usize {
        let mut best = 0;
        let mut run = 0;
        for s in &self.steps {
            if s.n_outliers == count {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }
}

fn warm_fit(
    algorithm: Algorithm,
    input: PathInput<'_>,
    cfg: &FitConfig,
    warm: &FitResult,
) -> Result<FitResult> {
    match algorithm {
        Algorithm::Rkm => rkm::rkm_fit_warm(input.data()?, &plain(cfg), warm),
        Algorithm::Rpc => rpc::rpc_fit_warm(input.data()?, &plain(cfg), warm),
        Algorithm::Krkm => kernel::krkm_fit_warm(input.kernel()?, cfg, warm),
        Algorithm::Krpc => kernel::krpc_fit_warm(input.kernel()?, cfg, warm),
        _ => unreachable!("weighted algorithms map to their base"),
    }
}

/// Fits down the grid, each λ warm-started from the previous solution,
/// starting from `start` (normally the baseline fit).
pub fn path_fit(
    algorithm: Algorithm,
    input: PathInput<'_>,
    grid: &LambdaGrid,
    cfg: &PathConfig,
    start: &FitResult,
) -> Result<PathResult> {
    if cfg.target > input.n_points() {
        return Err(Error::InvalidConfig(format!(
            "target {} exceeds the {} points",
            cfg.target,
            input.n_points()
        )));
    }
    let base = base_algorithm(algorithm);
    let mut chain = start.clone();
    let mut steps = Vec::new();
    let mut best: Option<(usize, usize, FitResult)> = None;
    let mut last: Option<FitResult> = None;
    let mut reached = false;
    for &lambda in grid.values() {
        let c = cfg.fit.clone().with_lambda(lambda);
        chain = warm_fit(base, input, &c, &chain)?;
        let f = match algorithm {
            Algorithm::Wrkm => rkm::wrkm_fit(input.data()?, &weighted(&c), &chain)?,
            Algorithm::Wrpc => rpc::wrpc_fit(input.data()?, &weighted(&c), &chain)?,
            _ => chain.clone(),
        };
        let count = f.n_outliers();
        let iterations = f.iterations
            + if algorithm.is_weighted() {
                chain.iterations
            } else {
                0
            };
        steps.push(PathStep {
            lambda,
            n_outliers: count,
            flagged: f.flagged(),
            iterations,
            converged: f.converged,
            final_cost: f.final_cost(),
        });
        let gap = count.abs_diff(cfg.target);
        if best.as_ref().is_none_or(|(_, g, _)| gap < *g) {
            best = Some((steps.len() - 1, gap, f.clone()));
        }
        reached |= count >= cfg.target;
        let stop = if cfg.continue_past_target {
            count > cfg.target
        } else {
            count >= cfg.target
        };
        last = Some(f);
        if stop {
            break;
        }
    }
    let (selected, fit) = if reached {
        let (i, _, f) = best.expect("grid is non-empty");
        (i, f)
    } else {
        log::warn!("target of {} outliers not reached on the grid", cfg.target);
        (steps.len() - 1, last.expect("grid is non-empty"))
    };
    Ok(PathResult {
        algorithm,
        target: cfg.target,
        steps,
        selected,
        target_reached: reached,
        fit,
    })
}

/// Baseline, λ_max (nudged up by `1e-6` relative), grid and path in one call.
pub fn auto_path(
    algorithm: Algorithm,
    input: PathInput<'_>,
    n_clusters: usize,
    cfg: &PathConfig,
    grid_size: usize,
    spacing: Spacing,
    restarts: usize,
) -> Result<PathResult> {
    let baseline = baseline_fit(algorithm, input, n_clusters, &cfg.fit, restarts)?;
    let lmax = lambda_max(algorithm, input, &baseline)?;
    let grid = make_grid(lmax * (1.0 + 1e-6), grid_size, spacing)?;
    path_fit(algorithm, input, &grid, cfg, &baseline)
}
