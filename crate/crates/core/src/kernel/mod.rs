//! Kernelized robust clustering.
//!
//! Centroids and outlier vectors live in the span of the mapped points:
//! `m_c = Φβ_c`, `o_n = Φα_n`, so every update only needs `K = ΦᵀΦ`.

mod krkm;
mod krpc;
mod spectral;

pub use krkm::{krkm_fit, krkm_fit_warm};
pub use krpc::{krpc_fit, krpc_fit_warm};
pub use spectral::{spectral_init, spectral_init_affinity};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, symmetric_eigenvalues};
use crate::math;
use crate::model::{check_rows, DataSet, Membership};

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;

/// Symmetric positive semidefinite `N × N` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    k: DMatrix<f64>,
}

impl KernelMatrix {
    /// Validates symmetry and positive semidefiniteness
    /// (smallest eigenvalue `≥ −1e-8 · trace / N`).
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        if k.nrows() == 0 {
            return Err(Error::InvalidInput("empty kernel matrix".into()));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite kernel entry".into()));
        }
        check_symmetric(&k, SYMMETRY_TOL)?;
        let n = k.nrows();
        let min = symmetric_eigenvalues(&k)?[0];
        let tol = PSD_TOL * (k.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
        if min < -tol {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(Self { k })
    }

    /// Skips the eigenvalue scan for matrices that are PSD by construction.
    fn trusted(k: DMatrix<f64>) -> Self {
        Self { k }
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.k.nrows()
    }
}

/// `K = X Xᵀ` (inner products of the data rows).
pub fn gram_linear(x: &DataSet) -> KernelMatrix {
    KernelMatrix::trusted(x.x() * x.x().transpose())
}

fn pairwise_sq_dists(x: &DataSet) -> DMatrix<f64> {
    let n = x.n_points();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (x.x().row(i) - x.x().row(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// `κ(x, y) = exp(−α ‖x − y‖²)`.
pub fn kernel_gaussian(x: &DataSet, alpha: f64) -> Result<KernelMatrix> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "gaussian alpha must be > 0, got {alpha}"
        )));
    }
    let d = pairwise_sq_dists(x);
    Ok(KernelMatrix::trusted(d.map(|v| math::exp(-alpha * v))))
}

/// `κ(x, y) = (xᵀy)^degree`.
pub fn kernel_polynomial(x: &DataSet, degree: u32) -> Result<KernelMatrix> {
    if degree == 0 {
        return Err(Error::InvalidConfig("polynomial degree must be >= 1".into()));
    }
    let g = x.x() * x.x().transpose();
    Ok(KernelMatrix::trusted(g.map(|v| libm::pow(v, degree as f64))))
}

/// Checks a 0/1 symmetric adjacency matrix and returns node degrees.
pub(crate) fn adjacency_degrees(adj: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(adj, 0.0)?;
    if adj.nrows() == 0 {
        return Err(Error::InvalidInput("empty graph".into()));
    }
    if let Some(v) = adj.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!(
            "adjacency entries must be 0 or 1, got {v}"
        )));
    }
    let deg: Vec<f64> = adj.row_iter().map(|r| r.sum()).collect();
    if let Some(node) = deg.iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedNode { node });
    }
    Ok(deg)
}

/// `D^{-1/2} E D^{-1/2}`.
pub(crate) fn normalized_adjacency(adj: &DMatrix<f64>, deg: &[f64]) -> DMatrix<f64> {
    let inv: Vec<f64> = deg.iter().map(|&d| 1.0 / math::sqrt(d)).collect();
    DMatrix::from_fn(adj.nrows(), adj.ncols(), |i, j| adj[(i, j)] * inv[i] * inv[j])
}

/// `K = νI + D^{-1/2} E D^{-1/2}` with `ν = |λ_min| + nu_margin`.
pub fn kernel_graph(adjacency: &DMatrix<f64>, nu_margin: f64) -> Result<KernelMatrix> {
    if !(nu_margin > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "nu margin must be > 0, got {nu_margin}"
        )));
    }
    let deg = adjacency_degrees(adjacency)?;
    let mut k = normalized_adjacency(adjacency, &deg);
    let nu = symmetric_eigenvalues(&k)?[0].abs() + nu_margin;
    for i in 0..k.nrows() {
        k[(i, i)] += nu;
    }
    Ok(KernelMatrix::trusted(k))
}

/// `1 / median_{i<j} ‖x_i − x_j‖²`.
pub fn alpha_kappa_heuristic(x: &DataSet) -> Result<f64> {
    let n = x.n_points();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let d = pairwise_sq_dists(x);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(d[(i, j)]);
        }
    }
    let med = math::median_in_place(&mut pairs).unwrap_or(0.0);
    if !(med > 0.0) {
        return Err(Error::IdenticalPoints);
    }
    Ok(1.0 / med)
}

/// Coefficients of a kernelized fit.
///
/// Column `n` of `a` is `α_n` (`o_n = Φα_n`), column `c` of `b` is `β_c`
/// (`m_c = Φβ_c`) and column `n` of `delta` is `δ_n` (`r_n = Φδ_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelState {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    delta: DMatrix<f64>,
    norms: Vec<f64>,
}

impl KernelState {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    /// `‖α_n‖_K`, the feature-space norm of each outlier vector.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Explicit `(M, O, R)` for a linear kernel built from `x`.
    pub fn reconstruct_linear(&self, x: &DataSet) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        check_rows("kernel state points", x.n_points(), self.a.nrows())?;
        let xt = x.x().transpose();
        Ok((&xt * &self.b, &xt * &self.a, &xt * &self.delta))
    }
}

/// Working quantities shared by both kernel fits.
///
/// `ka` holds `Kα_n` in column `n`; only flagged columns of `a` and `ka` are
/// nonzero.
pub(crate) struct Coeffs {
    pub a: DMatrix<f64>,
    pub ka: DMatrix<f64>,
    pub norms: Vec<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl Coeffs {
    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            a: DMatrix::zeros(n, n),
            ka: DMatrix::zeros(n, n),
            norms: vec![0.0; n],
            b: DMatrix::zeros(n, k),
            g: DMatrix::zeros(n, k),
            h: DMatrix::zeros(k, k),
        }
    }

    /// Rebuilds from a stored state, recomputing `KA` over flagged columns.
    pub fn from_state(km: &KernelMatrix, st: &KernelState) -> Self {
        let n = km.n_points();
        let mut ka = DMatrix::zeros(n, n);
        for j in flagged(&st.norms) {
            ka.set_column(j, &(km.matrix() * st.a.column(j)));
        }
        let mut c = Self {
            a: st.a.clone(),
            ka,
            norms: st.norms.clone(),
            b: st.b.clone(),
            g: DMatrix::zeros(n, st.b.ncols()),
            h: DMatrix::zeros(st.b.ncols(), st.b.ncols()),
        };
        c.refresh_gram(km);
        c
    }

    /// `B = V − AV` for column-normalized weights `v`.
    pub fn set_centroids(&mut self, km: &KernelMatrix, v: &DMatrix<f64>) {
        let mut b = v.clone();
        for j in flagged(&self.norms) {
            let aj = self.a.column(j);
            for c in 0..v.ncols() {
                let w = v[(j, c)];
                if w != 0.0 {
                    b.column_mut(c).axpy(-w, &aj, 1.0);
                }
            }
        }
        self.b = b;
        self.refresh_gram(km);
    }

    /// `G = KB`, `H = BᵀG`.
    pub fn refresh_gram(&mut self, km: &KernelMatrix) {
        self.g = km.matrix() * &self.b;
        self.h = self.b.transpose() * &self.g;
    }

    /// Squared kernel norms `‖δ_n‖²_K` of `δ_n = e_n − B w_n` (`w` row-normalized).
    pub fn residual_sq_norms(&self, km: &KernelMatrix, w: &DMatrix<f64>) -> Vec<f64> {
        let k = km.matrix();
        (0..k.nrows())
            .map(|n| {
                let wn = w.row(n).transpose();
                let gw = self.g.row(n).dot(&wn.transpose());
                let hw = (&self.h * &wn).dot(&wn);
                (k[(n, n)] - 2.0 * gw + hw).max(0.0)
            })
            .collect()
    }

    /// `α_n = s_n δ_n`, `s_n = [1 − τ_n/‖δ_n‖_K]₊`, keeping `KA` in step.
    pub fn shrink(
        &mut self,
        km: &KernelMatrix,
        w: &DMatrix<f64>,
        sq_norms: &[f64],
        tau: impl Fn(usize) -> f64,
    ) {
        let n_points = km.n_points();
        let k = km.matrix();
        for n in 0..n_points {
            let norm = math::sqrt(sq_norms[n]);
            let t = tau(n);
            if norm > t {
                let s = 1.0 - t / norm;
                let wn = w.row(n).transpose();
                let bw = &self.b * &wn;
                let gw = &self.g * &wn;
                let mut alpha = -bw * s;
                alpha[n] += s;
                let mut kalpha = -gw * s;
                kalpha.axpy(s, &k.column(n), 1.0);
                self.a.set_column(n, &alpha);
                self.ka.set_column(n, &kalpha);
                self.norms[n] = s * norm;
            } else if self.norms[n] > 0.0 {
                self.a.column_mut(n).fill(0.0);
                self.ka.column_mut(n).fill(0.0);
                self.norms[n] = 0.0;
            }
        }
    }

    /// `D_nc = ‖e_n − β_c − α_n‖²_K`.
    pub fn distances(&self, km: &KernelMatrix) -> DMatrix<f64> {
        let k = km.matrix();
        let n_points = k.nrows();
        let n_clusters = self.b.ncols();
        let mut d = DMatrix::zeros(n_points, n_clusters);
        for n in 0..n_points {
            for c in 0..n_clusters {
                d[(n, c)] = self.distance(k, n, c);
            }
        }
        d
    }

    fn distance(&self, k: &DMatrix<f64>, n: usize, c: usize) -> f64 {
        let mut v = k[(n, n)] + self.h[(c, c)] - 2.0 * self.g[(n, c)];
        if self.norms[n] > 0.0 {
            v += self.norms[n] * self.norms[n] - 2.0 * self.ka[(n, n)]
                + 2.0 * self.b.column(c).dot(&self.ka.column(n));
        }
        v.max(0.0)
    }

    /// Reseeds cluster `c` at point `n`: `β_c = e_n − α_n`.
    pub fn reseed(&mut self, km: &KernelMatrix, c: usize, n: usize, d: &mut DMatrix<f64>) {
        let mut beta = -self.a.column(n).into_owned();
        beta[n] += 1.0;
        self.b.set_column(c, &beta);
        let mut g = km.matrix().column(n).into_owned();
        g -= self.ka.column(n);
        self.g.set_column(c, &g);
        self.h = self.b.transpose() * &self.g;
        for nn in 0..km.n_points() {
            d[(nn, c)] = self.distance(km.matrix(), nn, c);
        }
        d[(n, c)] = 0.0;
    }

    pub fn into_state(self, w: &DMatrix<f64>) -> KernelState {
        let n = self.a.nrows();
        let delta = DMatrix::<f64>::identity(n, n) - &self.b * w.transpose();
        KernelState {
            a: self.a,
            b: self.b,
            delta,
            norms: self.norms,
        }
    }
}

pub(crate) fn flagged(norms: &[f64]) -> impl Iterator<Item = usize> + '_ {
    norms.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i)
}

/// Normalizes each column of `w` to unit sum; empty columns stay zero.
pub(crate) fn column_normalized(w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut v = w.clone();
    for mut col in v.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        }
    }
    v
}

pub(crate) fn row_normalized(w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut v = w.clone();
    for mut row in v.row_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    v
}

/// Largest feature-space residual norm `max_n ‖δ_n‖_K` with `A = 0` and
/// centroid weights taken from `u`.
fn max_residual_norm(km: &KernelMatrix, w: &DMatrix<f64>) -> f64 {
    let mut c = Coeffs::zero(km.n_points(), w.ncols());
    c.set_centroids(km, &column_normalized(w));
    let w = row_normalized(w);
    c.residual_sq_norms(km, &w)
        .into_iter()
        .map(math::sqrt)
        .fold(0.0, f64::max)
}

/// Kernel K-means threshold `2 max_n ‖δ_n‖_K` from memberships `u`.
pub fn lambda_max_krkm(km: &KernelMatrix, u: &Membership) -> Result<f64> {
    check_rows("membership rows", km.n_points(), u.n_points())?;
    Ok(2.0 * max_residual_norm(km, &u.weights()))
}

/// Kernel probabilistic threshold `max_n ‖δ_n‖_K / σ` after one E-step
/// from a completed fit.
pub fn lambda_max_krpc(km: &KernelMatrix, fit: &crate::model::FitResult) -> Result<f64> {
    let (gamma, sigma) = krpc::baseline_posteriors(km, fit)?;
    Ok(max_residual_norm(km, &gamma) / sigma)
}
