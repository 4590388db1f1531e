//! Clustering and outlier-detection scores.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{check_rows, Centroids};

/// Cluster labels with an optional exclusion mask (`true` = drop the point).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionLabels {
    labels: Vec<usize>,
    excluded: Option<Vec<bool>>,
}

impl PartitionLabels {
    pub fn new(labels: Vec<usize>) -> Self {
        Self {
            labels,
            excluded: None,
        }
    }

    pub fn with_excluded(mut self, excluded: Vec<bool>) -> Result<Self> {
        check_rows("exclusion mask", self.labels.len(), excluded.len())?;
        self.excluded = Some(excluded);
        Ok(self)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn is_excluded(&self, i: usize) -> bool {
        self.excluded.as_ref().is_some_and(|e| e[i])
    }
}

fn pairs(n: i128) -> i128 {
    n * (n - 1) / 2
}

/// Adjusted Rand index over the points kept by both masks.
pub fn ari(a: &PartitionLabels, b: &PartitionLabels) -> Result<f64> {
    check_rows("partition lengths", a.labels.len(), b.labels.len())?;
    let mut table: BTreeMap<(usize, usize), i128> = BTreeMap::new();
    let mut rows: BTreeMap<usize, i128> = BTreeMap::new();
    let mut cols: BTreeMap<usize, i128> = BTreeMap::new();
    let mut total = 0i128;
    for i in 0..a.labels.len() {
        if a.is_excluded(i) || b.is_excluded(i) {
            continue;
        }
        let (la, lb) = (a.labels[i], b.labels[i]);
        *table.entry((la, lb)).or_default() += 1;
        *rows.entry(la).or_default() += 1;
        *cols.entry(lb).or_default() += 1;
        total += 1;
    }
    if total < 2 {
        return Err(Error::InvalidInput(format!(
            "adjusted Rand index needs at least 2 points, got {total}"
        )));
    }
    let index: i128 = table.values().map(|&v| pairs(v)).sum();
    let sa: i128 = rows.values().map(|&v| pairs(v)).sum();
    let sb: i128 = cols.values().map(|&v| pairs(v)).sum();
    let tp = pairs(total);
    // (index − sa·sb/tp) / ((sa+sb)/2 − sa·sb/tp), scaled by 2·tp
    let num = 2 * (index * tp - sa * sb);
    let den = (sa + sb) * tp - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// `sqrt(min_π Σ_c ‖est_c − truth_π(c)‖² / C)`.
pub fn rmse_centers(est: &Centroids, truth: &Centroids) -> Result<f64> {
    check_rows("centroid count", truth.n_clusters(), est.n_clusters())?;
    check_rows("centroid dimension", truth.dim(), est.dim())?;
    let k = est.n_clusters();
    if k == 0 {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (est.matrix().column(i) - truth.matrix().column(j)).norm_squared())
                .collect()
        })
        .collect();
    let best = if k <= 8 {
        brute_force_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    Ok(math::sqrt(best / k as f64))
}

/// Minimum total cost over all permutations (Heap's algorithm).
fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let k = cost.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Minimum-cost perfect matching on a square cost matrix (shortest
/// augmenting paths with potentials).
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[matched[j] - 1][j - 1]).sum()
}

/// Precision, recall and F1 of a flagged set against the true outliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn outlier_prf(flagged: &[bool], truth: &[bool]) -> Result<OutlierScores> {
    check_rows("outlier flags", truth.len(), flagged.len())?;
    let tp = flagged.iter().zip(truth).filter(|(f, t)| **f && **t).count() as f64;
    let n_flagged = flagged.iter().filter(|f| **f).count() as f64;
    let n_true = truth.iter().filter(|t| **t).count() as f64;
    if n_flagged == 0.0 && n_true == 0.0 {
        return Ok(OutlierScores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let precision = ratio(tp, n_flagged);
    let recall = ratio(tp, n_true);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Ok(OutlierScores {
        precision,
        recall,
        f1,
    })
}
