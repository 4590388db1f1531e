//! Dense symmetric eigensolver (cyclic Jacobi rotations).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by ascending eigenvalue; column `i` of `vectors` is the
/// unit eigenvector for `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Checks symmetry within `tol · max(1, max |a_ij|)`.
pub fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let scale = a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if !((a[(i, j)] - a[(j, i)]).abs() <= tol * scale) {
                return Err(Error::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix. Only the upper triangle is read.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    jacobi(a, true)
}

/// Ascending eigenvalues only; skips accumulating the rotations.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(jacobi(a, false)?.values)
}

fn jacobi(a: &DMatrix<f64>, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns",
            expected: n,
            found: a.ncols(),
        });
    }
    // Row-major working copies.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            w[i * n + j] = a[(i, j)];
            w[j * n + i] = a[(i, j)];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = w.iter().map(|x| x * x).sum();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += w[i * n + j] * w[i * n + j];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);

                w[p * n + p] = app - t * apq;
                w[q * n + q] = aqq + t * apq;
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = w[r * n + p];
                        let arq = w[r * n + q];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        w[r * n + p] = new_rp;
                        w[p * n + r] = new_rp;
                        w[r * n + q] = new_rq;
                        w[q * n + r] = new_rq;
                    }
                }
                for r in 0..if want_vectors { n } else { 0 } {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].total_cmp(&w[j * n + j]));
    let values = order.iter().map(|&i| w[i * n + i]).collect();
    let vectors = if want_vectors {
        DMatrix::from_fn(n, n, |r, k| v[r * n + order[k]])
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(SymmetricEigen { values, vectors })
}
