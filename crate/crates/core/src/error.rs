use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("cluster {cluster} has zero membership mass")]
    EmptyCluster { cluster: usize },

    #[error("invalid membership matrix: {0}")]
    InvalidMembership(String),

    /// Every residual vanished, so the variance estimate collapsed to zero.
    #[error("degenerate fit: standard deviation estimate collapsed to zero")]
    DegenerateSigma,

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("kernel matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("graph node {node} is isolated")]
    IsolatedNode { node: usize },

    #[error("all points are identical")]
    IdenticalPoints,

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
}
