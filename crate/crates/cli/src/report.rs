//! JSON report shapes. Every report carries `"schema": 1`.

use serde::{Deserialize, Serialize};

use robclust_core::metrics::{ari, outlier_prf, rmse_centers, PartitionLabels};
use robclust_core::path::PathResult;
use robclust_core::{Centroids, FitResult};

use crate::args::FitArgs;
use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub label: usize,
    pub outlier: bool,
    /// `‖o_n‖₂`.
    pub norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memberships: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub pi: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_outliers: usize,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub empty_cluster_repairs: usize,
    pub final_cost: f64,
    pub cost_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub lambda: f64,
    pub n_outliers: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    /// Indices of the flagged points (only in `path` reports).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub target: usize,
    pub target_reached: bool,
    pub selected: usize,
    pub lambda_max: f64,
    pub steps: Vec<StepReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Adjusted Rand index over the points the fit did not flag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub algorithm: String,
    pub config: serde_json::Value,
    pub n_points: usize,
    pub n_clusters: usize,
    /// `null` when outliers are disabled (λ = ∞).
    pub lambda: Option<f64>,
    pub points: Vec<PointReport>,
    /// One coordinate vector per cluster; absent for kernel fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroids: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_names: Option<Vec<String>>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub n_points: usize,
    pub metrics: Metrics,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn centroid_rows(c: &Centroids) -> Vec<Vec<f64>> {
    c.matrix()
        .column_iter()
        .map(|col| col.iter().copied().collect())
        .collect()
}

impl RunReport {
    pub fn new(command: &str, args: &FitArgs, fit: &FitResult) -> Result<Self, CliError> {
        let labels = fit.labels();
        let norms = fit.outlier_norms();
        let u = fit.memberships.matrix();
        let points = (0..labels.len())
            .map(|n| PointReport {
                label: labels[n],
                outlier: norms[n] > 0.0,
                norm: norms[n],
                memberships: args.emit_soft.then(|| u.row(n).iter().copied().collect()),
            })
            .collect();
        Ok(Self {
            schema: SCHEMA,
            command: command.to_string(),
            algorithm: serde_json::to_value(args.algo)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            config: serde_json::to_value(args)?,
            n_points: labels.len(),
            n_clusters: fit.n_clusters(),
            lambda: finite(fit.lambda),
            points,
            centroids: fit.centroids.as_ref().map(centroid_rows),
            mixture: fit.mixture.as_ref().map(|m| MixtureReport {
                pi: m.pi.clone(),
                sigma: m.sigma,
            }),
            node_names: None,
            summary: Summary {
                n_outliers: fit.n_outliers(),
                iterations: fit.iterations,
                converged: fit.converged,
                degenerate: fit.degenerate,
                empty_cluster_repairs: fit.empty_cluster_repairs,
                final_cost: fit.final_cost(),
                cost_trace: fit.cost_trace.clone(),
                epsilon: fit.epsilon,
            },
            path: None,
            metrics: None,
        })
    }

    pub fn with_path(mut self, path: &PathResult, lambda_max: f64, per_step_flags: bool) -> Self {
        self.path = Some(PathReport {
            target: path.target,
            target_reached: path.target_reached,
            selected: path.selected,
            lambda_max,
            steps: path
                .steps
                .iter()
                .map(|s| StepReport {
                    lambda: s.lambda,
                    n_outliers: s.n_outliers,
                    iterations: s.iterations,
                    converged: s.converged,
                    final_cost: s.final_cost,
                    flagged: per_step_flags.then(|| {
                        s.flagged
                            .iter()
                            .enumerate()
                            .filter(|(_, f)| **f)
                            .map(|(i, _)| i)
                            .collect()
                    }),
                })
                .collect(),
        });
        self
    }

    pub fn labels(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.label).collect()
    }

    pub fn flagged(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.outlier).collect()
    }
}

/// Scores predicted labels and flags against whatever truth is available.
pub fn score(
    labels: &[usize],
    flagged: &[bool],
    centroids: Option<&Centroids>,
    truth_labels: Option<&[usize]>,
    truth_outliers: Option<&[bool]>,
    truth_centers: Option<&Centroids>,
) -> Result<Metrics, CliError> {
    let mut m = Metrics::default();
    if let Some(t) = truth_labels {
        let kept = flagged.iter().filter(|f| !**f).count();
        if kept >= 2 {
            let pred = PartitionLabels::new(labels.to_vec()).with_excluded(flagged.to_vec())?;
            m.ari = Some(ari(&pred, &PartitionLabels::new(t.to_vec()))?);
        }
    }
    if let Some(t) = truth_outliers {
        let s = outlier_prf(flagged, t)?;
        m.precision = Some(s.precision);
        m.recall = Some(s.recall);
        m.f1 = Some(s.f1);
    }
    if let (Some(est), Some(t)) = (centroids, truth_centers) {
        m.rmse = Some(rmse_centers(est, t)?);
    }
    Ok(m)
}
