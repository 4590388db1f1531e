//! Robust probabilistic clustering.
//!
//! Regularized EM for a spherical Gaussian mixture in which every point may
//! carry a deterministic outlier vector `o_n`:
//! `−Σ_n log Σ_c π_c N(x_n; m_c + o_n, σ²I) + λ Σ_n ‖o_n‖/σ`.
//! One cycle is an E-step followed by the π, M, O and σ blocks in that order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    check_rows, group_penalty, log_penalty, Algorithm, AssignmentMode, Centroids, DataSet, FitConfig,
    FitResult, Init, Membership, MixtureFit, OutlierState, Outliers,
};
use crate::rkm::{block_threshold, check_points, resolve_epsilon, rng_for, PerPointLambda};

const SIMPLEX_TOL: f64 = 1e-9;

/// Mixture weights, centroids, spherical deviation and outlier vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pi: Vec<f64>,
    m: Centroids,
    sigma: f64,
    o: OutlierState,
}

impl MixtureParams {
    pub fn new(pi: Vec<f64>, m: Centroids, sigma: f64, o: OutlierState) -> Result<Self> {
        check_rows("mixture weights", m.n_clusters(), pi.len())?;
        check_rows("outlier dimension", m.dim(), o.dim())?;
        if pi.iter().any(|&v| !(v >= 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "mixture weights not on the simplex: {pi:?}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { pi, m, sigma, o })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn centroids(&self) -> &Centroids {
        &self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn outliers(&self) -> &OutlierState {
        &self.o
    }
}

/// `N × C` posterior probabilities, rows summing to one, entries positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    gamma: DMatrix<f64>,
}

impl Posteriors {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        for n in 0..gamma.nrows() {
            let row = gamma.row(n);
            if row.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::InvalidMembership(format!(
                    "posterior row {n} outside (0, 1]"
                )));
            }
            if (row.sum() - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidMembership(format!(
                    "posterior row {n} does not sum to 1"
                )));
            }
        }
        Ok(Self { gamma })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn into_membership(self) -> Membership {
        Membership::from_parts(self.gamma, 1.0, AssignmentMode::Soft)
    }
}

/// Log-domain Bayes rule on squared distances `d` (`N × C`).
pub(crate) fn posteriors_from_distances(d: &DMatrix<f64>, pi: &[f64], sigma: f64) -> Posteriors {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let log_pi: Vec<f64> = pi.iter().map(|&p| math::ln(p)).collect();
    let k = d.ncols();
    let mut gamma = DMatrix::zeros(d.nrows(), k);
    let mut logs = vec![0.0; k];
    for n in 0..d.nrows() {
        for c in 0..k {
            logs[c] = log_pi[c] - d[(n, c)] * inv;
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in 0..k {
            let v = math::exp(logs[c] - max).max(f64::MIN_POSITIVE);
            gamma[(n, c)] = v;
            total += v;
        }
        for c in 0..k {
            gamma[(n, c)] /= total;
        }
    }
    Posteriors { gamma }
}

/// `−Σ_n log Σ_c π_c N(·; σ²I_dim)` given squared distances `d`.
pub(crate) fn neg_log_likelihood(d: &DMatrix<f64>, pi: &[f64], sigma: f64, dim: usize) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let norm = 0.5 * dim as f64 * math::ln(2.0 * core::f64::consts::PI * sigma * sigma);
    let log_pi: Vec<f64> = pi.iter().map(|&p| math::ln(p)).collect();
    let mut logs = vec![0.0; d.ncols()];
    let mut total = 0.0;
    for n in 0..d.nrows() {
        for c in 0..d.ncols() {
            logs[c] = log_pi[c] - d[(n, c)] * inv;
        }
        total += norm - math::log_sum_exp(&logs);
    }
    total
}

fn check_params(x: &DataSet, params: &MixtureParams) -> Result<()> {
    check_rows("centroid dimension", x.dim(), params.m.dim())?;
    check_rows("outlier count", x.n_points(), params.o.n_points())
}

pub fn e_step(x: &DataSet, params: &MixtureParams) -> Result<Posteriors> {
    check_params(x, params)?;
    let d = x.compensated_distances(params.m.matrix(), params.o.matrix());
    Ok(posteriors_from_distances(&d, &params.pi, params.sigma))
}

/// `π_c = (1/N) Σ_n γ_nc`.
pub fn update_pi(gamma: &Posteriors) -> Vec<f64> {
    let n = gamma.gamma.nrows() as f64;
    gamma.gamma.column_iter().map(|col| col.sum() / n).collect()
}

/// `m_c = Σ_n γ_nc (x_n − o_n) / Σ_n γ_nc`.
pub fn update_means_em(x: &DataSet, gamma: &Posteriors, o: &OutlierState) -> Result<Centroids> {
    check_rows("posterior rows", x.n_points(), gamma.gamma.nrows())?;
    check_rows("outlier count", x.n_points(), o.n_points())?;
    check_rows("outlier dimension", x.dim(), o.dim())?;
    let g = &gamma.gamma;
    let mut m = DMatrix::zeros(x.dim(), g.ncols());
    for c in 0..g.ncols() {
        let mass = g.column(c).sum();
        if !(mass > 0.0) {
            return Err(Error::EmptyCluster { cluster: c });
        }
        for n in 0..x.n_points() {
            let w = g[(n, c)] / mass;
            for j in 0..x.dim() {
                m[(j, c)] += w * (x.x()[(n, j)] - o.matrix()[(j, n)]);
            }
        }
    }
    Ok(Centroids::from_matrix(m))
}

/// `r_n = Σ_c γ_nc (x_n − m_c)` as a `p × N` matrix.
fn em_residuals(x: &DataSet, m: &Centroids, gamma: &Posteriors) -> Result<DMatrix<f64>> {
    check_rows("posterior rows", x.n_points(), gamma.gamma.nrows())?;
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("centroid count", gamma.gamma.ncols(), m.n_clusters())?;
    let g = &gamma.gamma;
    let mut r = DMatrix::zeros(x.dim(), x.n_points());
    for n in 0..x.n_points() {
        for c in 0..g.ncols() {
            let w = g[(n, c)];
            for j in 0..x.dim() {
                r[(j, n)] += w * (x.x()[(n, j)] - m.matrix()[(j, c)]);
            }
        }
    }
    Ok(r)
}

/// `o_n = r_n [1 − λσ/‖r_n‖]₊` with `r_n = Σ_c γ_nc (x_n − m_c)`.
pub fn shrink_outliers_em(
    x: &DataSet,
    m: &Centroids,
    gamma: &Posteriors,
    lambda: f64,
    sigma: f64,
) -> Result<OutlierState> {
    shrink_outliers_em_per_point(x, m, gamma, &PerPointLambda::uniform(lambda, x.n_points()), sigma)
}

/// As [`shrink_outliers_em`] with threshold `λ_n σ` per point.
pub fn shrink_outliers_em_per_point(
    x: &DataSet,
    m: &Centroids,
    gamma: &Posteriors,
    lam: &PerPointLambda,
    sigma: f64,
) -> Result<OutlierState> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be > 0, got {sigma}")));
    }
    check_rows("per-point lambda", x.n_points(), lam.values().len())?;
    let r = em_residuals(x, m, gamma)?;
    Ok(block_threshold(&r, |n| {
        let l = lam.values()[n];
        if l == 0.0 {
            0.0
        } else {
            l * sigma
        }
    }))
}

/// Positive root of `Dσ² − Pσ − S = 0` with `D = N·dim`, `P` the penalty sum
/// and `S` the weighted scatter: `σ = a + sqrt(b + a²)`.
pub(crate) fn sigma_from_stats(penalty: f64, scatter: f64, n_dim: f64) -> Result<f64> {
    let a = penalty / (2.0 * n_dim);
    let b = scatter / n_dim;
    if a == 0.0 && b == 0.0 {
        return Err(Error::DegenerateSigma);
    }
    Ok(a + math::sqrt(b + a * a))
}

fn weighted_scatter(d: &DMatrix<f64>, gamma: &DMatrix<f64>) -> f64 {
    d.iter().zip(gamma.iter()).map(|(dv, g)| dv * g).sum()
}

pub fn update_sigma(
    x: &DataSet,
    m: &Centroids,
    o: &OutlierState,
    gamma: &Posteriors,
    lambda: f64,
) -> Result<f64> {
    check_rows("posterior rows", x.n_points(), gamma.gamma.nrows())?;
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("outlier count", x.n_points(), o.n_points())?;
    let d = x.compensated_distances(m.matrix(), o.matrix());
    let pen: f64 = o.norms().iter().map(|&v| group_penalty(lambda, v)).sum();
    sigma_from_stats(
        pen,
        weighted_scatter(&d, &gamma.gamma),
        (x.n_points() * x.dim()) as f64,
    )
}

/// Floor applied to σ, relative to the spread of the data.
pub(crate) fn sigma_floor(scale: f64) -> f64 {
    1e-6 * if scale > 0.0 { scale } else { 1.0 }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "probabilistic clustering needs lambda > 0, got {lambda}"
        )));
    }
    Ok(())
}

fn initial_params(x: &DataSet, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<MixtureParams> {
    let (n_points, dim) = (x.n_points(), x.dim());
    if n_clusters == 0 || n_clusters > n_points {
        return Err(Error::InvalidInput(format!(
            "need 1 <= clusters <= points, got {n_clusters} clusters for {n_points} points"
        )));
    }
    let scale = math::sqrt(x.variance_per_dim());
    let floor = sigma_floor(scale);
    let o = OutlierState::zeros(dim, n_points);
    let uniform = vec![1.0 / n_clusters as f64; n_clusters];
    let from_points = |points: &[usize]| {
        let m = DMatrix::from_fn(dim, n_clusters, |j, c| x.x()[(points[c], j)]);
        MixtureParams {
            pi: uniform.clone(),
            m: Centroids::from_matrix(m),
            sigma: scale.max(floor),
            o: o.clone(),
        }
    };
    match init {
        Init::Random => {
            let mut rng = rng_for(cfg.seed);
            let points = sample(&mut rng, n_points, n_clusters).into_vec();
            Ok(from_points(&points))
        }
        Init::Points(points) => {
            check_points(&points, n_points, n_clusters)?;
            Ok(from_points(&points))
        }
        Init::Memberships(u) => {
            check_rows("initial membership rows", n_points, u.n_points())?;
            check_rows("initial membership clusters", n_clusters, u.n_clusters())?;
            let gamma = Posteriors {
                gamma: u.matrix().clone(),
            };
            let pi = update_pi(&gamma);
            let m = update_means_em(x, &gamma, &o)?;
            let d = x.compensated_distances(m.matrix(), o.matrix());
            let sigma = math::sqrt(weighted_scatter(&d, &gamma.gamma) / (n_points * dim) as f64);
            Ok(MixtureParams {
                pi,
                m,
                sigma: sigma.max(floor),
                o,
            })
        }
    }
}

fn run(
    x: &DataSet,
    cfg: &FitConfig,
    mut params: MixtureParams,
    epsilon: Option<f64>,
    algorithm: Algorithm,
) -> Result<FitResult> {
    let lambda = cfg.lambda;
    let (n_points, dim) = (x.n_points(), x.dim());
    let n_dim = (n_points * dim) as f64;
    let floor = sigma_floor(math::sqrt(x.variance_per_dim()));
    let penalty = |norm: f64| match epsilon {
        None => group_penalty(lambda, norm),
        Some(eps) => log_penalty(lambda, norm, eps),
    };

    let mut trace: Vec<f64> = Vec::new();
    let mut degenerate = false;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let gamma = e_step(x, &params)?;
        let pi = update_pi(&gamma);
        let m = update_means_em(x, &gamma, &params.o)?;
        let lam = match epsilon {
            None => PerPointLambda::uniform(lambda, n_points),
            Some(eps) => crate::rkm::reweight(&params.o, lambda, eps)?,
        };
        let o = shrink_outliers_em_per_point(x, &m, &gamma, &lam, params.sigma)?;
        let d = x.compensated_distances(m.matrix(), o.matrix());
        let pen: f64 = o.norms().iter().map(|&v| penalty(v)).sum();
        let sigma = match sigma_from_stats(pen, weighted_scatter(&d, &gamma.gamma), n_dim) {
            Ok(s) if s >= floor => s,
            _ => {
                degenerate = true;
                floor
            }
        };
        params = MixtureParams { pi, m, sigma, o };

        let cost = neg_log_likelihood(&d, &params.pi, sigma, dim) + pen / sigma;
        let done = trace.last().is_some_and(|&prev: &f64| {
            (prev - cost).abs() <= cfg.objective_tol * cost.abs().max(f64::MIN_POSITIVE)
        });
        trace.push(cost);
        if done {
            converged = true;
            break;
        }
    }
    if degenerate {
        log::warn!("sigma reached its floor {floor:e}; fit flagged degenerate");
    }

    let gamma = e_step(x, &params)?;
    let MixtureParams { pi, m, sigma, o } = params;
    Ok(FitResult {
        algorithm,
        lambda,
        memberships: gamma.into_membership(),
        centroids: Some(m),
        outliers: Outliers::Explicit(o),
        mixture: Some(MixtureFit { pi, sigma }),
        epsilon,
        cost_trace: trace,
        iterations,
        converged,
        degenerate,
        empty_cluster_repairs: 0,
    })
}

/// Robust probabilistic clustering from a fresh start with `O = 0`.
pub fn rpc_fit(x: &DataSet, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<FitResult> {
    cfg.validate()?;
    check_lambda(cfg.lambda)?;
    let params = initial_params(x, n_clusters, cfg, init)?;
    run(x, cfg, params, None, Algorithm::Rpc)
}

/// Continues from the parameters of an earlier probabilistic fit.
pub fn rpc_fit_warm(x: &DataSet, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    cfg.validate()?;
    check_lambda(cfg.lambda)?;
    let params = warm_params(x, warm)?;
    run(x, cfg, params, None, Algorithm::Rpc)
}

/// Reweighted robust probabilistic clustering started from a completed fit.
pub fn wrpc_fit(x: &DataSet, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    cfg.validate()?;
    check_lambda(cfg.lambda)?;
    let params = warm_params(x, warm)?;
    let eps = resolve_epsilon(cfg.reweight, params.o.norms())?;
    run(x, cfg, params, Some(eps), Algorithm::Wrpc)
}

/// Parameters carried by a probabilistic fit.
pub fn params_of(warm: &FitResult) -> Result<MixtureParams> {
    let (Some(mix), Some(m)) = (&warm.mixture, &warm.centroids) else {
        return Err(Error::InvalidInput(
            "expected a probabilistic fit with centroids".into(),
        ));
    };
    Ok(MixtureParams {
        pi: mix.pi.clone(),
        m: m.clone(),
        sigma: mix.sigma,
        o: warm.explicit_outliers()?.clone(),
    })
}

fn warm_params(x: &DataSet, warm: &FitResult) -> Result<MixtureParams> {
    let params = params_of(warm)?;
    check_params(x, &params)?;
    check_rows("outlier dimension", x.dim(), params.o.dim())?;
    Ok(params)
}

/// Smallest λ for which the next cycle from `params` leaves every outlier
/// vector at zero: `max_n ‖r_n‖ / σ`, evaluated with `O = 0`.
pub fn lambda_max(x: &DataSet, params: &MixtureParams) -> Result<f64> {
    let zero = OutlierState::zeros(x.dim(), x.n_points());
    let start = MixtureParams {
        o: zero.clone(),
        ..params.clone()
    };
    let gamma = e_step(x, &start)?;
    let m = update_means_em(x, &gamma, &zero)?;
    let r = em_residuals(x, &m, &gamma)?;
    let max = r.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(max / params.sigma)
}
