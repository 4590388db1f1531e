//! Kernelized robust (soft) K-means.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{column_normalized, row_normalized, Coeffs, KernelMatrix};
use crate::error::{Error, Result};
use crate::model::{
    check_rows, group_penalty, Algorithm, FitConfig, FitResult, Init, Membership, Outliers, Reweight,
};
use crate::rkm::{
    check_points, memberships_from_distances, random_memberships, repair_empty_clusters, rng_for,
};

fn check_config(cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.reweight != Reweight::Off {
        return Err(Error::InvalidConfig(
            "reweighting is not available for kernel fits".into(),
        ));
    }
    Ok(())
}

fn initial_memberships(
    km: &KernelMatrix,
    n_clusters: usize,
    cfg: &FitConfig,
    init: Init,
) -> Result<Membership> {
    let n = km.n_points();
    match init {
        Init::Random => random_memberships(&mut rng_for(cfg.seed), n, n_clusters, cfg.q),
        Init::Memberships(u) => {
            check_rows("initial membership rows", n, u.n_points())?;
            check_rows("initial membership clusters", n_clusters, u.n_clusters())?;
            u.with_exponent(cfg.q)
        }
        Init::Points(points) => {
            check_points(&points, n, n_clusters)?;
            let mut c = Coeffs::zero(n, n_clusters);
            c.b = DMatrix::from_fn(n, n_clusters, |i, k| if points[k] == i { 1.0 } else { 0.0 });
            c.refresh_gram(km);
            Ok(memberships_from_distances(
                &c.distances(km),
                &alloc::vec![0.0; n],
                cfg.q,
            ))
        }
    }
}

/// Kernel K-means with outlier vectors in the span of the mapped points,
/// started with `A = 0`.
pub fn krkm_fit(km: &KernelMatrix, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<FitResult> {
    check_config(cfg)?;
    let u = initial_memberships(km, n_clusters, cfg, init)?;
    run(km, cfg, u, Coeffs::zero(km.n_points(), n_clusters))
}

/// Continues from the memberships and coefficients of an earlier kernel fit.
pub fn krkm_fit_warm(km: &KernelMatrix, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    check_config(cfg)?;
    let st = warm.kernel_state()?;
    check_rows("warm state points", km.n_points(), st.a().nrows())?;
    let u = warm.memberships.with_exponent(cfg.q)?;
    run(km, cfg, u, Coeffs::from_state(km, st))
}

fn run(km: &KernelMatrix, cfg: &FitConfig, mut u: Membership, mut coeffs: Coeffs) -> Result<FitResult> {
    let lambda = cfg.lambda;
    let n_points = km.n_points();
    let mut repairs = 0;
    if u.matrix().column_iter().any(|col| col.iter().all(|&v| v == 0.0)) {
        coeffs.set_centroids(km, &column_normalized(&u.weights()));
        let d = coeffs.distances(km);
        repairs += repair_empty_clusters(&mut u, &d).len();
    }

    let mut trace = Vec::new();
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut w_last = row_normalized(&u.weights());
    for t in 1..=cfg.max_iters {
        iterations = t;
        let w = u.weights();
        coeffs.set_centroids(km, &column_normalized(&w));
        w_last = row_normalized(&w);
        let sq = coeffs.residual_sq_norms(km, &w_last);
        coeffs.shrink(km, &w_last, &sq, |_| 0.5 * lambda);

        let mut d = coeffs.distances(km);
        let pen: Vec<f64> = coeffs.norms.iter().map(|&v| group_penalty(lambda, v)).collect();
        u = memberships_from_distances(&d, &pen, cfg.q);
        for (c, n) in repair_empty_clusters(&mut u, &d) {
            repairs += 1;
            coeffs.reseed(km, c, n, &mut d);
        }

        let mut cost = 0.0;
        for n in 0..n_points {
            for c in 0..u.n_clusters() {
                let wt = u.weight(n, c);
                if wt > 0.0 {
                    cost += wt * (d[(n, c)] + pen[n]);
                }
            }
        }
        trace.push(cost);

        let done = prev.as_ref().is_some_and(|(b0, g0)| {
            let db = &coeffs.b - b0;
            let dg = &coeffs.g - g0;
            let num: f64 = db.iter().zip(dg.iter()).map(|(x, y)| x * y).sum();
            let den: f64 = coeffs.h.diagonal().sum();
            num.max(0.0) <= cfg.eps_stop * cfg.eps_stop * den
        });
        prev = Some((coeffs.b.clone(), coeffs.g.clone()));
        if done {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        algorithm: Algorithm::Krkm,
        lambda,
        memberships: u,
        centroids: None,
        outliers: Outliers::Kernel(coeffs.into_state(&w_last)),
        mixture: None,
        epsilon: None,
        cost_trace: trace,
        iterations,
        converged,
        degenerate: false,
        empty_cluster_repairs: repairs,
    })
}
