//! Shared data model, validation and objective evaluation.
//!
//! Layout conventions: the data matrix is `N × p` (one point per row), the
//! centroid matrix is `p × C` (one cluster per column) and the outlier matrix
//! is `p × N` (one point per column). Membership matrices are `N × C`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::KernelState;
use crate::math;
use crate::rpc::{self, MixtureParams};

/// Tolerance on row sums of a membership matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Input points with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: DMatrix<f64>,
    truth_labels: Option<Vec<usize>>,
    truth_outliers: Option<Vec<bool>>,
}

impl DataSet {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "data set needs at least one point and one feature, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite entry at point {row}, feature {col}"
            )));
        }
        Ok(Self {
            x,
            truth_labels: None,
            truth_outliers: None,
        })
    }

    /// Builds a data set from row-major values.
    pub fn from_row_slice(n_points: usize, dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n_points * dim {
            return Err(Error::DimensionMismatch {
                what: "row-major data length",
                expected: n_points * dim,
                found: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n_points, dim, values))
    }

    pub fn with_truth_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_points() {
            return Err(Error::DimensionMismatch {
                what: "truth labels",
                expected: self.n_points(),
                found: labels.len(),
            });
        }
        self.truth_labels = Some(labels);
        Ok(self)
    }

    pub fn with_truth_outliers(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.n_points() {
            return Err(Error::DimensionMismatch {
                what: "truth outlier flags",
                expected: self.n_points(),
                found: flags.len(),
            });
        }
        self.truth_outliers = Some(flags);
        Ok(self)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.x.nrows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn truth_labels(&self) -> Option<&[usize]> {
        self.truth_labels.as_deref()
    }

    pub fn truth_outliers(&self) -> Option<&[bool]> {
        self.truth_outliers.as_deref()
    }

    /// Mean squared distance to the global mean, divided by the dimension.
    pub fn variance_per_dim(&self) -> f64 {
        let (n, p) = (self.n_points(), self.dim());
        let mut total = 0.0;
        for j in 0..p {
            let col = self.x.column(j);
            let mean = col.sum() / n as f64;
            total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        total / (n * p) as f64
    }

    /// `‖x_n − m_c − o_n‖²`.
    #[inline]
    pub(crate) fn compensated_sq_dist(&self, n: usize, m: &DMatrix<f64>, c: usize, o: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim() {
            let d = self.x[(n, j)] - m[(j, c)] - o[(j, n)];
            acc += d * d;
        }
        acc
    }

    /// `N × C` matrix of `‖x_n − m_c − o_n‖²`.
    pub(crate) fn compensated_distances(&self, m: &DMatrix<f64>, o: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_points(), m.ncols(), |n, c| {
            self.compensated_sq_dist(n, m, c, o)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    Hard,
    Soft,
}

impl AssignmentMode {
    /// Hard assignments for `q == 1`, soft otherwise.
    pub fn for_exponent(q: f64) -> Self {
        if q == 1.0 {
            AssignmentMode::Hard
        } else {
            AssignmentMode::Soft
        }
    }
}

/// Constraint labels for membership matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Entries in {0, 1} (hard mode only).
    Binary,
    /// Every cluster receives some mass. Checked as a warning only.
    NonEmpty,
    /// Rows sum to one.
    RowSum,
    /// Entries in [0, 1].
    Box,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Binary => "c1 (binary entries)",
            Constraint::NonEmpty => "c2 (non-empty cluster)",
            Constraint::RowSum => "c3 (row sums to one)",
            Constraint::Box => "c4 (entries in [0,1])",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    /// Row index, or the column index for [`Constraint::NonEmpty`].
    pub index: usize,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constraint {
            Constraint::NonEmpty => write!(f, "{} violated by column {}", self.constraint, self.index),
            _ => write!(
                f,
                "{} violated at row {} (value {})",
                self.constraint, self.index, self.value
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MembershipReport {
    pub violations: Vec<Violation>,
    /// Empty clusters; these do not invalidate the matrix.
    pub warnings: Vec<Violation>,
}

impl MembershipReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks constraints c1, c3, c4 (violations) and c2 (warnings) on `u`.
pub fn validate_membership(u: &DMatrix<f64>, mode: AssignmentMode) -> MembershipReport {
    let mut report = MembershipReport::default();
    for n in 0..u.nrows() {
        let row = u.row(n);
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOL {
            report.violations.push(Violation {
                constraint: Constraint::RowSum,
                index: n,
                value: sum,
            });
        }
        for &v in row.iter() {
            if !(0.0..=1.0).contains(&v) {
                report.violations.push(Violation {
                    constraint: Constraint::Box,
                    index: n,
                    value: v,
                });
            } else if mode == AssignmentMode::Hard && v != 0.0 && v != 1.0 {
                report.violations.push(Violation {
                    constraint: Constraint::Binary,
                    index: n,
                    value: v,
                });
            }
        }
    }
    for c in 0..u.ncols() {
        if u.column(c).iter().all(|&v| v == 0.0) {
            report.warnings.push(Violation {
                constraint: Constraint::NonEmpty,
                index: c,
                value: 0.0,
            });
        }
    }
    report
}

/// `N × C` assignment matrix with its exponent `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    u: DMatrix<f64>,
    q: f64,
    mode: AssignmentMode,
}

impl Membership {
    pub fn new(u: DMatrix<f64>, q: f64, mode: AssignmentMode) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::InvalidConfig(format!("exponent q must be >= 1, got {q}")));
        }
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(Error::InvalidMembership("empty membership matrix".to_string()));
        }
        let report = validate_membership(&u, mode);
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidMembership(v.to_string()));
        }
        Ok(Self { u, q, mode })
    }

    /// Hard membership from cluster labels.
    pub fn from_labels(labels: &[usize], n_clusters: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_clusters) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {n_clusters} clusters"
            )));
        }
        let u = DMatrix::from_fn(
            labels.len(),
            n_clusters,
            |n, c| {
                if labels[n] == c {
                    1.0
                } else {
                    0.0
                }
            },
        );
        Self::new(u, 1.0, AssignmentMode::Hard)
    }

    pub(crate) fn from_parts(u: DMatrix<f64>, q: f64, mode: AssignmentMode) -> Self {
        debug_assert!(validate_membership(&u, mode).is_ok());
        Self { u, q, mode }
    }

    /// Same assignments with a different exponent. Hardens by argmax when
    /// `q == 1` and the matrix is not binary.
    pub fn with_exponent(&self, q: f64) -> Result<Self> {
        let mode = AssignmentMode::for_exponent(q);
        let u = if mode == AssignmentMode::Hard && self.mode == AssignmentMode::Soft {
            let labels = self.labels();
            return Self::from_labels(&labels, self.n_clusters());
        } else {
            self.u.clone()
        };
        Self::new(u, q, mode)
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.u.nrows()
    }

    #[inline]
    pub fn n_clusters(&self) -> usize {
        self.u.ncols()
    }

    /// `u_nc^q`.
    #[inline]
    pub fn weight(&self, n: usize, c: usize) -> f64 {
        let v = self.u[(n, c)];
        if self.q == 1.0 || v == 0.0 || v == 1.0 {
            v
        } else {
            math::powf(v, self.q)
        }
    }

    /// `N × C` matrix of `u_nc^q`.
    pub fn weights(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_points(), self.n_clusters(), |n, c| self.weight(n, c))
    }

    /// Argmax per row, ties to the lowest cluster index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n_points())
            .map(|n| {
                let row = self.u.row(n);
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// `p × C` centroid matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    m: DMatrix<f64>,
}

impl Centroids {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite centroid entry".to_string()));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_clusters(&self) -> usize {
        self.m.ncols()
    }
}

/// `p × N` outlier matrix with cached column norms.
///
/// A point is an outlier iff its cached norm is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierState {
    o: DMatrix<f64>,
    norms: Vec<f64>,
}

impl OutlierState {
    pub fn zeros(dim: usize, n_points: usize) -> Self {
        Self {
            o: DMatrix::zeros(dim, n_points),
            norms: alloc::vec![0.0; n_points],
        }
    }

    pub fn from_matrix(o: DMatrix<f64>) -> Result<Self> {
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite outlier entry".to_string()));
        }
        let norms = (0..o.ncols()).map(|n| o.column(n).norm()).collect();
        Ok(Self { o, norms })
    }

    pub(crate) fn from_parts(o: DMatrix<f64>, norms: Vec<f64>) -> Self {
        Self { o, norms }
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.o
    }

    #[inline]
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn dim(&self) -> usize {
        self.o.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.o.ncols()
    }

    pub fn flagged(&self) -> Vec<bool> {
        self.norms.iter().map(|&v| v > 0.0).collect()
    }

    pub fn n_flagged(&self) -> usize {
        self.norms.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Log-penalty reweighting of the outlier threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Reweight {
    #[default]
    Off,
    /// `ε = 1e-2 ×` median nonzero outlier norm of the warm start (floor `1e-6`).
    Auto,
    Epsilon(f64),
}

/// Run configuration shared by all algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Outlier-controlling parameter; `f64::INFINITY` disables outliers.
    pub lambda: f64,
    /// Membership exponent; `1` selects hard assignments.
    pub q: f64,
    pub max_iters: usize,
    /// Relative Frobenius change of the centroids that stops K-means style fits.
    pub eps_stop: f64,
    /// Relative objective change that stops EM style fits.
    pub objective_tol: f64,
    pub seed: u64,
    pub reweight: Reweight,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: f64::INFINITY,
            q: 1.0,
            max_iters: 300,
            eps_stop: 1e-6,
            objective_tol: 1e-8,
            seed: 0,
            reweight: Reweight::Off,
        }
    }
}

impl FitConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_eps_stop(mut self, eps: f64) -> Self {
        self.eps_stop = eps;
        self
    }

    pub fn with_objective_tol(mut self, tol: f64) -> Self {
        self.objective_tol = tol;
        self
    }

    pub fn with_reweight(mut self, reweight: Reweight) -> Self {
        self.reweight = reweight;
        self
    }

    pub fn mode(&self) -> AssignmentMode {
        AssignmentMode::for_exponent(self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(Error::InvalidConfig(format!("q must be >= 1, got {}", self.q)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".to_string()));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_stop must be > 0, got {}",
                self.eps_stop
            )));
        }
        if !(self.objective_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "objective_tol must be > 0, got {}",
                self.objective_tol
            )));
        }
        if let Reweight::Epsilon(eps) = self.reweight {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "reweight epsilon must be > 0, got {eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Starting point for a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Drawn from the configuration seed.
    Random,
    /// Explicit initial memberships.
    Memberships(Membership),
    /// One data point per cluster seeds the centroids.
    Points(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Rkm,
    Wrkm,
    Rpc,
    Wrpc,
    Krkm,
    Krpc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rkm => "rkm",
            Algorithm::Wrkm => "wrkm",
            Algorithm::Rpc => "rpc",
            Algorithm::Wrpc => "wrpc",
            Algorithm::Krkm => "krkm",
            Algorithm::Krpc => "krpc",
        }
    }

    pub fn is_kernel(self) -> bool {
        matches!(self, Algorithm::Krkm | Algorithm::Krpc)
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Algorithm::Wrkm | Algorithm::Wrpc)
    }

    pub fn is_probabilistic(self) -> bool {
        matches!(self, Algorithm::Rpc | Algorithm::Wrpc | Algorithm::Krpc)
    }
}

/// Outlier representation of a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Outliers {
    Explicit(OutlierState),
    /// Coefficients in the span of the mapped points.
    Kernel(KernelState),
}

impl Outliers {
    /// `‖o_n‖₂` for every point.
    pub fn norms(&self) -> &[f64] {
        match self {
            Outliers::Explicit(o) => o.norms(),
            Outliers::Kernel(k) => k.norms(),
        }
    }
}

/// Mixture weights and spherical deviation of a probabilistic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    pub pi: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub memberships: Membership,
    /// Absent for kernelized fits.
    pub centroids: Option<Centroids>,
    pub outliers: Outliers,
    pub mixture: Option<MixtureFit>,
    /// Log-penalty ε used by reweighted fits.
    pub epsilon: Option<f64>,
    /// Objective after every full cycle.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The deviation estimate hit its floor.
    pub degenerate: bool,
    pub empty_cluster_repairs: usize,
}

impl FitResult {
    pub fn labels(&self) -> Vec<usize> {
        self.memberships.labels()
    }

    pub fn outlier_norms(&self) -> &[f64] {
        self.outliers.norms()
    }

    pub fn flagged(&self) -> Vec<bool> {
        self.outlier_norms().iter().map(|&v| v > 0.0).collect()
    }

    pub fn n_outliers(&self) -> usize {
        self.outlier_norms().iter().filter(|&&v| v > 0.0).count()
    }

    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn n_clusters(&self) -> usize {
        self.memberships.n_clusters()
    }

    pub(crate) fn explicit_outliers(&self) -> Result<&OutlierState> {
        match &self.outliers {
            Outliers::Explicit(o) => Ok(o),
            Outliers::Kernel(_) => Err(Error::InvalidInput(
                "expected a fit with explicit outlier vectors".to_string(),
            )),
        }
    }

    pub(crate) fn kernel_state(&self) -> Result<&KernelState> {
        match &self.outliers {
            Outliers::Kernel(k) => Ok(k),
            Outliers::Explicit(_) => Err(Error::InvalidInput("expected a kernelized fit".to_string())),
        }
    }
}

/// `λ ‖o‖`, zero for a zero vector even when `λ` is infinite.
#[inline]
pub(crate) fn group_penalty(lambda: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        lambda * norm
    } else {
        0.0
    }
}

/// `λ log(1 + ‖o‖/ε)`: the log penalty shifted to vanish at zero.
#[inline]
pub(crate) fn log_penalty(lambda: f64, norm: f64, epsilon: f64) -> f64 {
    if norm > 0.0 {
        lambda * math::ln1p(norm / epsilon)
    } else {
        0.0
    }
}

pub(crate) fn check_rows(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn check_fit_inputs(x: &DataSet, u: &Membership, m: &Centroids, o: &OutlierState) -> Result<()> {
    check_rows("membership rows", x.n_points(), u.n_points())?;
    check_rows("centroid dimension", x.dim(), m.dim())?;
    check_rows("centroid count", u.n_clusters(), m.n_clusters())?;
    check_rows("outlier dimension", x.dim(), o.dim())?;
    check_rows("outlier count", x.n_points(), o.n_points())
}

/// Robust (soft) K-means objective
/// `Σ_n Σ_c u_nc^q (‖x_n − m_c − o_n‖² + λ‖o_n‖)`.
pub fn rkm_cost(x: &DataSet, u: &Membership, m: &Centroids, o: &OutlierState, lambda: f64) -> Result<f64> {
    check_fit_inputs(x, u, m, o)?;
    let mut cost = 0.0;
    for n in 0..x.n_points() {
        let pen = group_penalty(lambda, o.norms()[n]);
        for c in 0..u.n_clusters() {
            let w = u.weight(n, c);
            if w > 0.0 {
                cost += w * (x.compensated_sq_dist(n, m.matrix(), c, o.matrix()) + pen);
            }
        }
    }
    Ok(cost)
}

/// Regularized negative log-likelihood of a spherical mixture,
/// `−Σ_n log Σ_c π_c N(x_n; m_c + o_n, σ²I) + λ Σ_n ‖o_n‖/σ`.
pub fn rpc_objective(x: &DataSet, params: &MixtureParams, lambda: f64) -> Result<f64> {
    if !(params.sigma() > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma must be > 0, got {}",
            params.sigma()
        )));
    }
    check_rows("centroid dimension", x.dim(), params.centroids().dim())?;
    check_rows("outlier dimension", x.dim(), params.outliers().dim())?;
    check_rows("outlier count", x.n_points(), params.outliers().n_points())?;
    let d = x.compensated_distances(params.centroids().matrix(), params.outliers().matrix());
    let pen: f64 = params
        .outliers()
        .norms()
        .iter()
        .map(|&v| group_penalty(lambda, v))
        .sum();
    Ok(rpc::neg_log_likelihood(&d, params.pi(), params.sigma(), x.dim()) + pen / params.sigma())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(x: &[f64]) -> DataSet {
        DataSet::from_row_slice(1, x.len(), x).unwrap()
    }

    #[test]
    fn rejects_non_finite_data() {
        let err = DataSet::from_row_slice(2, 1, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(DataSet::new(DMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn truth_lengths_checked() {
        let x = DataSet::from_row_slice(2, 1, &[1.0, 2.0]).unwrap();
        assert!(x.clone().with_truth_labels(vec![0]).is_err());
        assert!(x.with_truth_outliers(vec![false, true]).is_ok());
    }

    #[test]
    fn rkm_cost_examples() {
        let u = Membership::from_labels(&[0], 1).unwrap();
        let m0 = Centroids::new(DMatrix::zeros(2, 1)).unwrap();
        let zero = OutlierState::zeros(2, 1);
        assert_eq!(rkm_cost(&single(&[0.0, 0.0]), &u, &m0, &zero, 7.0).unwrap(), 0.0);
        assert_eq!(rkm_cost(&single(&[1.0, 0.0]), &u, &m0, &zero, 5.0).unwrap(), 1.0);
        // ‖(3,0) − (2,0)‖² + 2·‖(2,0)‖ = 1 + 4
        let o = OutlierState::from_matrix(DMatrix::from_column_slice(2, 1, &[2.0, 0.0])).unwrap();
        assert_eq!(rkm_cost(&single(&[3.0, 0.0]), &u, &m0, &o, 2.0).unwrap(), 5.0);
    }

    #[test]
    fn rkm_cost_infinite_lambda_ignores_zero_outliers() {
        let u = Membership::from_labels(&[0], 1).unwrap();
        let m0 = Centroids::new(DMatrix::zeros(1, 1)).unwrap();
        let cost = rkm_cost(
            &single(&[2.0]),
            &u,
            &m0,
            &OutlierState::zeros(1, 1),
            f64::INFINITY,
        );
        assert_eq!(cost.unwrap(), 4.0);
    }

    #[test]
    fn rkm_cost_dimension_mismatch() {
        let u = Membership::from_labels(&[0, 0], 1).unwrap();
        let m0 = Centroids::new(DMatrix::zeros(2, 1)).unwrap();
        let err = rkm_cost(&single(&[0.0, 0.0]), &u, &m0, &OutlierState::zeros(2, 1), 1.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn validate_identity_ok() {
        let u = DMatrix::<f64>::identity(3, 3);
        assert!(validate_membership(&u, AssignmentMode::Hard).is_ok());
    }

    #[test]
    fn validate_row_sum_violation() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.4, 0.5]);
        let report = validate_membership(&u, AssignmentMode::Soft);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].constraint, Constraint::RowSum);
        assert_eq!(report.violations[0].index, 1);
    }

    #[test]
    fn validate_empty_column_warns() {
        let u = DMatrix::from_row_slice(2, 3, &[0.5, 0.5, 0.0, 0.25, 0.75, 0.0]);
        let report = validate_membership(&u, AssignmentMode::Soft);
        assert!(report.is_ok());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].constraint, Constraint::NonEmpty);
        assert_eq!(report.warnings[0].index, 2);
    }

    #[test]
    fn validate_binary_and_box() {
        let u = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.5, -0.5]);
        let report = validate_membership(&u, AssignmentMode::Hard);
        let kinds: Vec<_> = report.violations.iter().map(|v| v.constraint).collect();
        assert!(kinds.contains(&Constraint::Binary));
        assert!(kinds.contains(&Constraint::Box));
    }

    #[test]
    fn outlier_norms_cached() {
        let o = OutlierState::from_matrix(DMatrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 0.0])).unwrap();
        assert_eq!(o.norms(), &[5.0, 0.0]);
        assert_eq!(o.flagged(), vec![true, false]);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        assert!(FitConfig::new(-1.0).validate().is_err());
        assert!(FitConfig::new(f64::NAN).validate().is_err());
        assert!(FitConfig::new(1.0).with_q(0.5).validate().is_err());
        assert!(FitConfig::new(1.0)
            .with_reweight(Reweight::Epsilon(0.0))
            .validate()
            .is_err());
        assert!(FitConfig::new(1.0).with_eps_stop(0.0).validate().is_err());
    }

    #[test]
    fn labels_tie_to_lowest() {
        let u = Membership::new(
            DMatrix::from_row_slice(1, 3, &[0.25, 0.5, 0.25]),
            2.0,
            AssignmentMode::Soft,
        )
        .unwrap();
        assert_eq!(u.labels(), vec![1]);
        let tie = Membership::new(
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            2.0,
            AssignmentMode::Soft,
        )
        .unwrap();
        assert_eq!(tie.labels(), vec![0]);
    }
}
