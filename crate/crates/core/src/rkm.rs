//! Robust hard/soft K-means.
//!
//! Block coordinate descent over centroids `M`, outlier vectors `O` and
//! memberships `U` for
//! `Σ_n Σ_c u_nc^q (‖x_n − m_c − o_n‖² + λ‖o_n‖)`.
//! The reweighted variant replaces `λ‖o_n‖` by `λ log(1 + ‖o_n‖/ε)` and takes a
//! single majorization-minimization step per cycle, which turns the outlier
//! update into the same block soft-threshold with per-point `λ_n`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    check_rows, group_penalty, log_penalty, Algorithm, AssignmentMode, Centroids, DataSet, FitConfig,
    FitResult, Init, Membership, OutlierState, Outliers, Reweight,
};

/// `p × N` weighted residuals `r_n = Σ_c u_nc^q (x_n − m_c) / Σ_c u_nc^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    r: DMatrix<f64>,
}

impl Residuals {
    pub fn new(r: DMatrix<f64>) -> Self {
        Self { r }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.r.ncols()).map(|n| self.r.column(n).norm()).collect()
    }
}

/// Per-point outlier thresholds `λ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerPointLambda {
    lam: Vec<f64>,
}

impl PerPointLambda {
    pub fn uniform(lambda: f64, n_points: usize) -> Self {
        Self {
            lam: vec![lambda; n_points],
        }
    }

    pub fn new(lam: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lam.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "per-point lambda must be >= 0, got {bad}"
            )));
        }
        Ok(Self { lam })
    }

    pub fn values(&self) -> &[f64] {
        &self.lam
    }
}

/// Weighted least-squares centroids `m_c = Σ_n u_nc^q (x_n − o_n) / Σ_n u_nc^q`.
pub fn update_centroids(x: &DataSet, u: &Membership, o: &OutlierState) -> Result<Centroids> {
    check_rows("membership rows", x.n_points(), u.n_points())?;
    check_rows("outlier count", x.n_points(), o.n_points())?;
    check_rows("outlier dimension", x.dim(), o.dim())?;
    let (n_points, dim, k) = (x.n_points(), x.dim(), u.n_clusters());
    let mut m = DMatrix::zeros(dim, k);
    for c in 0..k {
        let mut mass = 0.0;
        for n in 0..n_points {
            let w = u.weight(n, c);
            if w == 0.0 {
                continue;
            }
            mass += w;
            for j in 0..dim {
                m[(j, c)] += w * (x.x()[(n, j)] - o.matrix()[(j, n)]);
            }
        }
        if !(mass > 0.0) {
            return Err(Error::EmptyCluster { cluster: c });
        }
        for j in 0..dim {
            m[(j, c)] /= mass;
        }
    }
    Ok(Centroids::from_matrix(m))
}

pub fn compute_residuals(x: &DataSet, m: &Centroids, u: &Membership) -> Result<Residuals> {
    check_rows("membership rows", x.n_points(), u.n_points())?;
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("centroid count", u.n_clusters(), m.n_clusters())?;
    let (n_points, dim, k) = (x.n_points(), x.dim(), u.n_clusters());
    let mut r = DMatrix::zeros(dim, n_points);
    for n in 0..n_points {
        let mut mass = 0.0;
        for c in 0..k {
            let w = u.weight(n, c);
            if w == 0.0 {
                continue;
            }
            mass += w;
            for j in 0..dim {
                r[(j, n)] += w * (x.x()[(n, j)] - m.matrix()[(j, c)]);
            }
        }
        for j in 0..dim {
            r[(j, n)] /= mass;
        }
    }
    Ok(Residuals { r })
}

/// Block soft-threshold `o_n = r_n [1 − λ_n / (2‖r_n‖)]₊`.
pub fn shrink_outliers(r: &Residuals, lam: &PerPointLambda) -> Result<OutlierState> {
    check_rows("per-point lambda", r.r.ncols(), lam.lam.len())?;
    Ok(block_threshold(&r.r, |n| 0.5 * lam.lam[n]))
}

/// Zeroes column `n` when its norm is at most `threshold(n)`, otherwise
/// shrinks it towards zero by `threshold(n)`.
pub(crate) fn block_threshold(r: &DMatrix<f64>, threshold: impl Fn(usize) -> f64) -> OutlierState {
    let mut o = DMatrix::zeros(r.nrows(), r.ncols());
    let mut norms = vec![0.0; r.ncols()];
    for n in 0..r.ncols() {
        let col = r.column(n);
        let norm = col.norm();
        let tau = threshold(n);
        if norm > tau {
            let scale = 1.0 - tau / norm;
            for j in 0..r.nrows() {
                o[(j, n)] = col[j] * scale;
            }
            norms[n] = o.column(n).norm();
        }
    }
    OutlierState::from_parts(o, norms)
}

/// Closed-form soft membership update for `q > 1`.
pub fn update_memberships_soft(
    x: &DataSet,
    m: &Centroids,
    o: &OutlierState,
    lambda: f64,
    q: f64,
) -> Result<Membership> {
    if !(q > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "soft memberships need q > 1, got {q}"
        )));
    }
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("outlier count", x.n_points(), o.n_points())?;
    let d = x.compensated_distances(m.matrix(), o.matrix());
    let pen: Vec<f64> = o.norms().iter().map(|&v| group_penalty(lambda, v)).collect();
    Ok(soft_from_distances(&d, &pen, q))
}

/// Minimum-distance rule, ties to the lowest cluster index.
pub fn update_memberships_hard(x: &DataSet, m: &Centroids, o: &OutlierState) -> Result<Membership> {
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("outlier count", x.n_points(), o.n_points())?;
    let d = x.compensated_distances(m.matrix(), o.matrix());
    Ok(hard_from_distances(&d))
}

pub(crate) fn hard_from_distances(d: &DMatrix<f64>) -> Membership {
    let mut u = DMatrix::zeros(d.nrows(), d.ncols());
    for n in 0..d.nrows() {
        let mut best = 0;
        for c in 1..d.ncols() {
            if d[(n, c)] < d[(n, best)] {
                best = c;
            }
        }
        u[(n, best)] = 1.0;
    }
    Membership::from_parts(u, 1.0, AssignmentMode::Hard)
}

/// `u_nc = [Σ_c' (a_nc / a_nc')^{1/(q−1)}]⁻¹` with `a_nc = d_nc + pen_n`,
/// evaluated relative to the row minimum. A zero augmented distance takes the
/// whole row.
pub(crate) fn soft_from_distances(d: &DMatrix<f64>, pen: &[f64], q: f64) -> Membership {
    let exponent = 1.0 / (q - 1.0);
    let k = d.ncols();
    let mut u = DMatrix::zeros(d.nrows(), k);
    for n in 0..d.nrows() {
        let aug = |c: usize| d[(n, c)] + pen[n];
        if let Some(zero) = (0..k).find(|&c| aug(c) == 0.0) {
            u[(n, zero)] = 1.0;
            continue;
        }
        let min = (0..k).map(aug).fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for c in 0..k {
            let w = math::powf(min / aug(c), exponent);
            u[(n, c)] = w;
            total += w;
        }
        for c in 0..k {
            u[(n, c)] /= total;
        }
    }
    Membership::from_parts(u, q, AssignmentMode::Soft)
}

/// `λ_n = λ / (‖o_n‖ + ε)`.
pub fn reweight(o_prev: &OutlierState, lambda: f64, epsilon: f64) -> Result<PerPointLambda> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    Ok(PerPointLambda {
        lam: o_prev.norms().iter().map(|&v| lambda / (v + epsilon)).collect(),
    })
}

/// Resolves the log-penalty ε for a reweighted fit started from `warm_norms`.
pub(crate) fn resolve_epsilon(reweight: Reweight, warm_norms: &[f64]) -> Result<f64> {
    match reweight {
        Reweight::Off => Err(Error::InvalidConfig(
            "reweighted fit requested with reweighting off".into(),
        )),
        Reweight::Epsilon(eps) => Ok(eps),
        Reweight::Auto => {
            let mut nonzero: Vec<f64> = warm_norms.iter().copied().filter(|&v| v > 0.0).collect();
            let med = math::median_in_place(&mut nonzero).unwrap_or(0.0);
            Ok((1e-2 * med).max(1e-6))
        }
    }
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random memberships. Hard: uniform cluster per point after seeding each
/// cluster with one distinct point. Soft: uniform entries normalized per row.
pub(crate) fn random_memberships(
    rng: &mut ChaCha8Rng,
    n_points: usize,
    n_clusters: usize,
    q: f64,
) -> Result<Membership> {
    if n_clusters == 0 || n_clusters > n_points {
        return Err(Error::InvalidInput(format!(
            "need 1 <= clusters <= points, got {n_clusters} clusters for {n_points} points"
        )));
    }
    match AssignmentMode::for_exponent(q) {
        AssignmentMode::Hard => {
            let mut labels: Vec<usize> = (0..n_points).map(|_| rng.random_range(0..n_clusters)).collect();
            for (c, n) in sample(rng, n_points, n_clusters).into_iter().enumerate() {
                labels[n] = c;
            }
            Membership::from_labels(&labels, n_clusters)
        }
        AssignmentMode::Soft => {
            let mut u = DMatrix::zeros(n_points, n_clusters);
            for n in 0..n_points {
                let mut total = 0.0;
                for c in 0..n_clusters {
                    let v = rng.random_range(f64::EPSILON..1.0);
                    u[(n, c)] = v;
                    total += v;
                }
                for c in 0..n_clusters {
                    u[(n, c)] /= total;
                }
            }
            Membership::new(u, q, AssignmentMode::Soft)
        }
    }
}

pub(crate) fn check_points(points: &[usize], n_points: usize, n_clusters: usize) -> Result<()> {
    check_rows("initial points", n_clusters, points.len())?;
    for (i, &p) in points.iter().enumerate() {
        if p >= n_points {
            return Err(Error::InvalidInput(format!("initial point {p} out of range")));
        }
        if points[..i].contains(&p) {
            return Err(Error::InvalidInput(format!("initial point {p} repeated")));
        }
    }
    Ok(())
}

/// Memberships from a distance matrix under the exponent `q`.
pub(crate) fn memberships_from_distances(d: &DMatrix<f64>, pen: &[f64], q: f64) -> Membership {
    match AssignmentMode::for_exponent(q) {
        AssignmentMode::Hard => hard_from_distances(d),
        AssignmentMode::Soft => soft_from_distances(d, pen, q),
    }
}

/// Gives every cluster without mass the point that sits farthest from the
/// cluster it currently belongs to. Hard mode only takes points whose
/// cluster keeps at least one other member. Returns `(cluster, point)` moves.
pub(crate) fn repair_empty_clusters(u: &mut Membership, d: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut moves = Vec::new();
    let k = u.n_clusters();
    for c in 0..k {
        if u.matrix().column(c).iter().any(|&v| v > 0.0) {
            continue;
        }
        let labels = u.labels();
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        let mut best: Option<(usize, f64)> = None;
        for (n, &l) in labels.iter().enumerate() {
            if u.mode() == AssignmentMode::Hard && counts[l] < 2 {
                continue;
            }
            let dist = d[(n, l)];
            if best.is_none_or(|(_, bd)| dist > bd) {
                best = Some((n, dist));
            }
        }
        let Some((n, _)) = best else { continue };
        let mut m = u.matrix().clone();
        for cc in 0..k {
            m[(n, cc)] = 0.0;
        }
        m[(n, c)] = 1.0;
        *u = Membership::from_parts(m, u.q(), u.mode());
        log::debug!("cluster {c} emptied; reseeded with point {n}");
        moves.push((c, n));
    }
    moves
}

/// Weighted means of the non-empty clusters; empty clusters get a zero column.
fn partial_centroids(x: &DataSet, u: &Membership, o: &OutlierState) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.dim(), u.n_clusters());
    for c in 0..u.n_clusters() {
        let mass: f64 = (0..x.n_points()).map(|n| u.weight(n, c)).sum();
        if mass > 0.0 {
            for n in 0..x.n_points() {
                let w = u.weight(n, c) / mass;
                for j in 0..x.dim() {
                    m[(j, c)] += w * (x.x()[(n, j)] - o.matrix()[(j, n)]);
                }
            }
        }
    }
    m
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    let diff = (new - old).norm();
    let scale = new.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

struct RkmStart {
    u: Membership,
    o: OutlierState,
}

fn initial_state(x: &DataSet, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<RkmStart> {
    let o = OutlierState::zeros(x.dim(), x.n_points());
    let u = match init {
        Init::Random => {
            let mut rng = rng_for(cfg.seed);
            random_memberships(&mut rng, x.n_points(), n_clusters, cfg.q)?
        }
        Init::Memberships(u) => {
            check_rows("initial membership rows", x.n_points(), u.n_points())?;
            check_rows("initial membership clusters", n_clusters, u.n_clusters())?;
            u.with_exponent(cfg.q)?
        }
        Init::Points(points) => {
            check_points(&points, x.n_points(), n_clusters)?;
            let m = DMatrix::from_fn(x.dim(), n_clusters, |j, c| x.x()[(points[c], j)]);
            let d = x.compensated_distances(&m, o.matrix());
            memberships_from_distances(&d, &vec![0.0; x.n_points()], cfg.q)
        }
    };
    Ok(RkmStart { u, o })
}

fn run(
    x: &DataSet,
    cfg: &FitConfig,
    start: RkmStart,
    epsilon: Option<f64>,
    algorithm: Algorithm,
) -> Result<FitResult> {
    let RkmStart { mut u, mut o } = start;
    let lambda = cfg.lambda;
    let penalty = |norm: f64| match epsilon {
        None => group_penalty(lambda, norm),
        Some(eps) => log_penalty(lambda, norm, eps),
    };

    let mut repairs = 0;
    if u.matrix().column_iter().any(|col| col.iter().all(|&v| v == 0.0)) {
        let m0 = partial_centroids(x, &u, &o);
        let d0 = x.compensated_distances(&m0, o.matrix());
        repairs += repair_empty_clusters(&mut u, &d0).len();
    }

    let mut trace = Vec::new();
    let mut prev_m: Option<DMatrix<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut centroids = None;
    for t in 1..=cfg.max_iters {
        iterations = t;
        let m = update_centroids(x, &u, &o)?;
        let r = compute_residuals(x, &m, &u)?;
        let lam = match epsilon {
            None => PerPointLambda::uniform(lambda, x.n_points()),
            Some(eps) => reweight(&o, lambda, eps)?,
        };
        o = shrink_outliers(&r, &lam)?;

        let mut m = m.matrix().clone();
        let mut d = x.compensated_distances(&m, o.matrix());
        let pen: Vec<f64> = o.norms().iter().map(|&v| penalty(v)).collect();
        u = memberships_from_distances(&d, &pen, cfg.q);
        for (c, n) in repair_empty_clusters(&mut u, &d) {
            repairs += 1;
            for j in 0..x.dim() {
                m[(j, c)] = x.x()[(n, j)] - o.matrix()[(j, n)];
            }
            for nn in 0..x.n_points() {
                d[(nn, c)] = x.compensated_sq_dist(nn, &m, c, o.matrix());
            }
        }

        let mut cost = 0.0;
        for n in 0..x.n_points() {
            for c in 0..u.n_clusters() {
                let w = u.weight(n, c);
                if w > 0.0 {
                    cost += w * (d[(n, c)] + pen[n]);
                }
            }
        }
        trace.push(cost);

        let done = prev_m
            .as_ref()
            .is_some_and(|pm| relative_change(&m, pm) <= cfg.eps_stop);
        prev_m = Some(m.clone());
        centroids = Some(m);
        if done {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        algorithm,
        lambda,
        memberships: u,
        centroids: centroids.map(Centroids::from_matrix),
        outliers: Outliers::Explicit(o),
        mixture: None,
        epsilon,
        cost_trace: trace,
        iterations,
        converged,
        degenerate: false,
        empty_cluster_repairs: repairs,
    })
}

/// Robust (soft) K-means from a fresh start with `O = 0`.
pub fn rkm_fit(x: &DataSet, n_clusters: usize, cfg: &FitConfig, init: Init) -> Result<FitResult> {
    cfg.validate()?;
    let start = initial_state(x, n_clusters, cfg, init)?;
    run(x, cfg, start, None, Algorithm::Rkm)
}

/// Robust (soft) K-means continued from the memberships and outliers of an
/// earlier fit (warm start along a λ path).
pub fn rkm_fit_warm(x: &DataSet, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    cfg.validate()?;
    let start = warm_start(x, cfg, warm)?;
    run(x, cfg, start, None, Algorithm::Rkm)
}

/// Reweighted robust K-means started from a completed fit at the same λ.
pub fn wrkm_fit(x: &DataSet, cfg: &FitConfig, warm: &FitResult) -> Result<FitResult> {
    cfg.validate()?;
    let start = warm_start(x, cfg, warm)?;
    let eps = resolve_epsilon(cfg.reweight, start.o.norms())?;
    run(x, cfg, start, Some(eps), Algorithm::Wrkm)
}

fn warm_start(x: &DataSet, cfg: &FitConfig, warm: &FitResult) -> Result<RkmStart> {
    let o = warm.explicit_outliers()?.clone();
    check_rows("warm outlier count", x.n_points(), o.n_points())?;
    check_rows("warm outlier dimension", x.dim(), o.dim())?;
    check_rows("warm membership rows", x.n_points(), warm.memberships.n_points())?;
    Ok(RkmStart {
        u: warm.memberships.with_exponent(cfg.q)?,
        o,
    })
}

/// Smallest λ for which the next cycle from memberships `u` (with `O = 0`)
/// leaves every outlier vector at zero: `2 max_n ‖r_n‖`.
pub fn lambda_max(x: &DataSet, u: &Membership) -> Result<f64> {
    let o = OutlierState::zeros(x.dim(), x.n_points());
    let m = update_centroids(x, u, &o)?;
    let r = compute_residuals(x, &m, u)?;
    Ok(2.0 * r.norms().into_iter().fold(0.0, f64::max))
}
