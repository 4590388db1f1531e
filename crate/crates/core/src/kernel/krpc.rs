//! Kernelized robust probabilistic clustering.
//!
//! Densities are evaluated in the `N`-dimensional empirical feature space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index::sample;

use super::{column_normalized, Coeffs, KernelMatrix};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    check_rows, group_penalty, Algorithm, FitConfig, FitResult, Init, MixtureFit, Outliers, Reweight,
};
use crate::rkm::{check_points, rng_for};
use crate::rpc::{neg_log_likelihood, posteriors_from_distances, sigma_floor, sigma_from_stats};

fn check_config(cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.reweight != Reweight::Off {
        return Err(Error::InvalidConfig(
            "reweighting is not available for kernel fits".into(),
        ));
    }
    if !(cfg.lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "probabilistic clustering needs lambda > 0, got {}",
            cfg.lambda
        )));
    }
    Ok(())
}

/// Spread of the mapped points around their mean, per feature-space dimension.
fn feature_scale(km: &KernelMatrix) -> f64 {
    let k = km.matrix();
    let n = k.nrows() as f64;
    let total = (k.trace() / n - k.sum() / (n * n)).max(0.0);
    math::sqrt(total / n)
}

struct State {
    coeffs: Coeffs,
    pi: Vec<f64>,
    sigma: f64,
}

fn initial_state(km: &KernelMatrix, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<State> {
    let n = km.n_points();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= clusters <= points, got {n_clusters} clusters for {n} points"
        )));
    }
    let scale = feature_scale(km);
    let floor = sigma_floor(scale);
    let mut coeffs = Coeffs::zero(n, n_clusters);
    let from_points = |coeffs: &mut Coeffs, points: &[usize]| {
        coeffs.b = DMatrix::from_fn(n, n_clusters, |i, c| if points[c] == i { 1.0 } else { 0.0 });
        coeffs.refresh_gram(km);
    };
    let uniform = vec![1.0 / n_clusters as f64; n_clusters];
    match init {
        Init::Random => {
            let points = sample(&mut rng_for(cfg.seed), n, n_clusters).into_vec();
            from_points(&mut coeffs, &points);
            Ok(State {
                coeffs,
                pi: uniform,
                sigma: scale.max(floor),
            })
        }
        Init::Points(points) => {
            check_points(&points, n, n_clusters)?;
            from_points(&mut coeffs, &points);
            Ok(State {
                coeffs,
                pi: uniform,
                sigma: scale.max(floor),
            })
        }
        Init::Memberships(u) => {
            check_rows("initial membership rows", n, u.n_points())?;
            check_rows("initial membership clusters", n_clusters, u.n_clusters())?;
            let gamma = u.matrix();
            let pi: Vec<f64> = gamma.column_iter().map(|c| c.sum() / n as f64).collect();
            if let Some(c) = pi.iter().position(|&p| p == 0.0) {
                return Err(Error::EmptyCluster { cluster: c });
            }
            coeffs.set_centroids(km, &column_normalized(gamma));
            let d = coeffs.distances(km);
            let scatter: f64 = d.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
            let sigma = math::sqrt(scatter / (n * n) as f64);
            Ok(State {
                coeffs,
                pi,
                sigma: sigma.max(floor),
            })
        }
    }
}

/// Kernel probabilistic clustering started with `A = 0`.
pub fn krpc_fit(km: &KernelMatrix, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<FitResult> {
    check_config(cfg)?;
    let st = initial_state(km, n_clusters, cfg, init)?;
    run(km, cfg, st)
}

/// Continues from the coefficients and mixture of an earlier kernel fit.
pub fn krpc_fit_warm(km: &KernelMatrix, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    check_config(cfg)?;
    let ks = warm.kernel_state()?;
    check_rows("warm state points", km.n_points(), ks.a().nrows())?;
    let mix = warm
        .mixture
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("expected a probabilistic kernel fit".into()))?;
    let st = State {
        coeffs: Coeffs::from_state(km, ks),
        pi: mix.pi.clone(),
        sigma: mix.sigma,
    };
    run(km, cfg, st)
}

/// Posteriors of a completed fit with its outlier coefficients cleared.
pub(crate) fn baseline_posteriors(km: &KernelMatrix, fit: &FitResult) -> Result<(DMatrix<f64>, f64)> {
    let ks = fit.kernel_state()?;
    let mix = fit
        .mixture
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("expected a probabilistic kernel fit".into()))?;
    check_rows("fit points", km.n_points(), ks.b().nrows())?;
    let mut c = Coeffs::zero(km.n_points(), ks.b().ncols());
    c.b = ks.b().clone();
    c.refresh_gram(km);
    let gamma = posteriors_from_distances(&c.distances(km), &mix.pi, mix.sigma);
    Ok((gamma.matrix().clone(), mix.sigma))
}

fn run(km: &KernelMatrix, cfg: &FitConfig, st: State) -> Result<FitResult> {
    let lambda = cfg.lambda;
    let n = km.n_points();
    let n_dim = (n * n) as f64;
    let floor = sigma_floor(feature_scale(km));
    let State {
        mut coeffs,
        mut pi,
        mut sigma,
    } = st;

    let mut trace: Vec<f64> = Vec::new();
    let mut degenerate = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut gamma = DMatrix::zeros(n, coeffs.b.ncols());
    for t in 1..=cfg.max_iters {
        iterations = t;
        gamma = posteriors_from_distances(&coeffs.distances(km), &pi, sigma)
            .matrix()
            .clone();
        pi = gamma.column_iter().map(|c| c.sum() / n as f64).collect();
        coeffs.set_centroids(km, &column_normalized(&gamma));
        let sq = coeffs.residual_sq_norms(km, &gamma);
        let tau = lambda * sigma;
        coeffs.shrink(km, &gamma, &sq, |_| tau);

        let d = coeffs.distances(km);
        let pen: f64 = coeffs.norms.iter().map(|&v| group_penalty(lambda, v)).sum();
        let scatter: f64 = d.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
        sigma = match sigma_from_stats(pen, scatter, n_dim) {
            Ok(s) if s >= floor => s,
            _ => {
                degenerate = true;
                floor
            }
        };
        let cost = neg_log_likelihood(&d, &pi, sigma, n) + pen / sigma;
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

    let post = posteriors_from_distances(&coeffs.distances(km), &pi, sigma);
    Ok(FitResult {
        algorithm: Algorithm::Krpc,
        lambda,
        memberships: post.into_membership(),
        centroids: None,
        outliers: Outliers::Kernel(coeffs.into_state(&gamma)),
        mixture: Some(MixtureFit { pi, sigma }),
        epsilon: None,
        cost_trace: trace,
        iterations,
        converged,
        degenerate,
        empty_cluster_repairs: 0,
    })
}
