//! Outlier-sparsity regularized clustering.
//!
//! Every point `x_n` is modelled as a cluster centroid plus noise plus an
//! outlier vector `o_n` that is zero for regular points. A group-lasso penalty
//! `λ Σ ‖o_n‖₂` keeps the outlier vectors row-sparse, so the clustering
//! algorithms flag outliers while they cluster.
//!
//! Algorithms:
//!
//! - [`rkm`]: robust hard/soft K-means by block coordinate descent, and the
//!   reweighted (log-penalty, majorization-minimization) variant.
//! - [`rpc`]: robust probabilistic clustering, an EM algorithm for a spherical
//!   Gaussian mixture with deterministic outlier vectors, and its reweighted
//!   variant.
//! - [`kernel`]: both families expressed purely through an `N × N` kernel
//!   matrix, plus kernel constructors, the normalized graph kernel and a
//!   spectral initializer.
//! - [`path`]: warm-started decreasing-λ paths that stop at a requested number
//!   of outliers.
//! - [`metrics`] and [`synth`]: evaluation and seeded benchmark generators.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line front end live in the `robclust` crate.
#![no_std]
// `!(v > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod path;
pub mod rkm;
pub mod rpc;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    rkm_cost, rpc_objective, validate_membership, Algorithm, AssignmentMode, Centroids, Constraint, DataSet,
    FitConfig, FitResult, Init, Membership, MembershipReport, MixtureFit, OutlierState, Outliers, Reweight,
    Violation,
};
pub use nalgebra::DMatrix;
