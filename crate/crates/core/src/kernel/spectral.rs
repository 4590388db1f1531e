//! Spectral initialization for graph clustering.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{adjacency_degrees, normalized_adjacency};
use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, symmetric_eigen};
use crate::model::{DataSet, FitConfig, FitResult, Init, Membership};
use crate::rkm::rkm_fit;

const RANDOM_RESTARTS: u64 = 10;

/// Hard memberships from the `C` smallest eigenvectors of the symmetric
/// Laplacian `I − D^{-1/2} E D^{-1/2}`, clustered by plain K-means on the
/// row-normalized embedding.
pub fn spectral_init(adjacency: &DMatrix<f64>, n_clusters: usize) -> Result<Membership> {
    let deg = adjacency_degrees(adjacency)?;
    embed_and_cluster(adjacency, &deg, n_clusters)
}

/// Same as [`spectral_init`] on a weighted affinity, e.g. a Gaussian kernel
/// matrix. The diagonal is ignored.
pub fn spectral_init_affinity(affinity: &DMatrix<f64>, n_clusters: usize) -> Result<Membership> {
    check_symmetric(affinity, 1e-9)?;
    if let Some(v) = affinity.iter().find(|&&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(alloc::format!(
            "affinities must be finite and >= 0, got {v}"
        )));
    }
    let mut w = affinity.clone();
    w.fill_diagonal(0.0);
    let deg: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    if let Some(node) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedNode { node });
    }
    embed_and_cluster(&w, &deg, n_clusters)
}

fn embed_and_cluster(adjacency: &DMatrix<f64>, deg: &[f64], n_clusters: usize) -> Result<Membership> {
    let n = adjacency.nrows();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidInput(alloc::format!(
            "need 1 <= clusters <= nodes, got {n_clusters} for {n} nodes"
        )));
    }
    let lap = DMatrix::<f64>::identity(n, n) - normalized_adjacency(adjacency, deg);
    let eig = symmetric_eigen(&lap)?;
    let zero_modes = eig.values.iter().filter(|&&v| v.abs() < 1e-9).count();
    if zero_modes > 1 {
        log::warn!("graph has {zero_modes} connected components");
    }

    let mut emb = eig.vectors.columns(0, n_clusters).into_owned();
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let x = DataSet::new(emb)?;

    let mut best: Option<FitResult> = None;
    let mut consider = |fit: FitResult| {
        if best.as_ref().is_none_or(|b| fit.final_cost() < b.final_cost()) {
            best = Some(fit);
        }
    };
    consider(rkm_fit(
        &x,
        n_clusters,
        &FitConfig::default(),
        Init::Points(farthest_first(&x, n_clusters)),
    )?);
    for seed in 0..RANDOM_RESTARTS {
        consider(rkm_fit(
            &x,
            n_clusters,
            &FitConfig::default().with_seed(seed),
            Init::Random,
        )?);
    }
    Ok(best.expect("at least one fit").memberships)
}

/// Greedy seeding: start at point 0, then repeatedly take the point farthest
/// from those already chosen.
fn farthest_first(x: &DataSet, k: usize) -> Vec<usize> {
    let n = x.n_points();
    let sq = |i: usize, j: usize| (x.x().row(i) - x.x().row(j)).norm_squared();
    let mut chosen = vec![0];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq(i, 0)).collect();
    while chosen.len() < k {
        let mut next = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if next.is_none_or(|j: usize| nearest[i] > nearest[j]) {
                next = Some(i);
            }
        }
        let j = next.expect("k <= n");
        chosen.push(j);
        for i in 0..n {
            nearest[i] = nearest[i].min(sq(i, j));
        }
    }
    chosen
}
