//! Seeded synthetic benchmarks: Gaussian blobs with scattered outliers, and
//! two concentric noisy rings with outliers between and around them.
//!
//! Points are ordered inliers first (cluster by cluster), then outliers.
//! Outliers carry the label of the nearest true cluster.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{Centroids, DataSet};
use crate::rkm::rng_for;

const MAX_REJECTIONS: usize = 1_000_000;

/// Gaussian clusters with common variance plus uniform outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSpec {
    pub seed: u64,
    pub n_per_cluster: usize,
    pub n_outliers: usize,
    /// Per-coordinate variance of every cluster.
    pub cluster_var: f64,
    pub centers: Vec<[f64; 2]>,
    /// Relative growth of the inlier bounding box that outliers are drawn from.
    pub box_inflation: f64,
    /// Outlier draws closer than this many standard deviations to a center
    /// are rejected.
    pub reject_sd: f64,
}

impl Default for SphericalSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_per_cluster: 50,
            n_outliers: 80,
            cluster_var: 0.8,
            centers: alloc::vec![[3.0, 3.0], [-3.0, 3.0], [-3.0, -3.0], [3.0, -3.0]],
            box_inflation: 1.0,
            reject_sd: 4.5,
        }
    }
}

impl SphericalSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_outliers(mut self, n_outliers: usize) -> Self {
        self.n_outliers = n_outliers;
        self
    }

    pub fn n_points(&self) -> usize {
        self.centers.len() * self.n_per_cluster + self.n_outliers
    }

    /// Requested cluster means as a `2 × C` centroid matrix.
    pub fn true_centers(&self) -> Centroids {
        let flat: Vec<f64> = self.centers.iter().flat_map(|c| c.iter().copied()).collect();
        Centroids::from_matrix(DMatrix::from_column_slice(2, self.centers.len(), &flat))
    }

    fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.n_per_cluster == 0 {
            return Err(Error::InvalidConfig("need at least one non-empty cluster".into()));
        }
        if !(self.cluster_var > 0.0) || !(self.box_inflation >= 0.0) || !(self.reject_sd >= 0.0) {
            return Err(Error::InvalidConfig(
                "geometry parameters must be positive".into(),
            ));
        }
        for (i, a) in self.centers.iter().enumerate() {
            if self.centers[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("duplicate center {a:?}")));
            }
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centers.iter().enumerate() {
        let d = (p[0] - m[0]) * (p[0] - m[0]) + (p[1] - m[1]) * (p[1] - m[1]);
        if d < best.1 {
            best = (c, d);
        }
    }
    (best.0, math::sqrt(best.1))
}

fn assemble(points: Vec<[f64; 2]>, labels: Vec<usize>, n_inliers: usize) -> Result<DataSet> {
    let n = points.len();
    let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
    let outliers = (0..n).map(|i| i >= n_inliers).collect();
    DataSet::from_row_slice(n, 2, &flat)?
        .with_truth_labels(labels)?
        .with_truth_outliers(outliers)
}

pub fn gen_spherical(spec: &SphericalSpec) -> Result<DataSet> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let sd = math::sqrt(spec.cluster_var);
    let mut points = Vec::with_capacity(spec.n_points());
    let mut labels = Vec::with_capacity(spec.n_points());
    for (c, m) in spec.centers.iter().enumerate() {
        for _ in 0..spec.n_per_cluster {
            points.push([m[0] + sd * normal(&mut rng), m[1] + sd * normal(&mut rng)]);
            labels.push(c);
        }
    }
    let n_inliers = points.len();

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &points {
        for j in 0..2 {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    for j in 0..2 {
        let pad = 0.5 * spec.box_inflation * (hi[j] - lo[j]);
        lo[j] -= pad;
        hi[j] += pad;
    }
    let radius = spec.reject_sd * sd;
    for _ in 0..spec.n_outliers {
        let mut tries = 0;
        let p = loop {
            let p = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
            if nearest(p, &spec.centers).1 >= radius {
                break p;
            }
            tries += 1;
            if tries > MAX_REJECTIONS {
                return Err(Error::InvalidConfig("outlier region is empty".into()));
            }
        };
        labels.push(nearest(p, &spec.centers).0);
        points.push(p);
    }
    assemble(points, labels, n_inliers)
}

/// Two concentric rings centered at the origin with outliers in the annulus
/// between them and in a band outside the outer ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingsSpec {
    pub seed: u64,
    pub n_inner: usize,
    pub n_outer: usize,
    pub n_outliers: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    /// Radial noise deviation, truncated at three deviations.
    pub ring_sd: f64,
    /// Minimum radial distance from an outlier to either ring.
    pub outlier_gap: f64,
    /// Width of the outlier band outside the outer ring.
    pub outer_width: f64,
}

impl Default for RingsSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_inner: 50,
            n_outer: 150,
            n_outliers: 60,
            r_inner: 2.0,
            r_outer: 6.0,
            ring_sd: 0.2,
            outlier_gap: 1.0,
            outer_width: 2.0,
        }
    }
}

impl RingsSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_points(&self) -> usize {
        self.n_inner + self.n_outer + self.n_outliers
    }

    fn validate(&self) -> Result<()> {
        if self.n_inner == 0 || self.n_outer == 0 {
            return Err(Error::InvalidConfig("both rings need points".into()));
        }
        if !(self.r_inner > 0.0 && self.r_inner < self.r_outer) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        if !(self.ring_sd > 0.0 && self.outlier_gap > 0.0 && self.outer_width > 0.0) {
            return Err(Error::InvalidConfig(
                "geometry parameters must be positive".into(),
            ));
        }
        if self.r_inner + self.outlier_gap >= self.r_outer - self.outlier_gap {
            return Err(Error::InvalidConfig(
                "no room for outliers between the rings".into(),
            ));
        }
        Ok(())
    }
}

fn polar(r: f64, theta: f64) -> [f64; 2] {
    [r * libm::cos(theta), r * libm::sin(theta)]
}

pub fn gen_rings(spec: &RingsSpec) -> Result<DataSet> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let tau = 2.0 * core::f64::consts::PI;
    let mut points = Vec::with_capacity(spec.n_points());
    let mut labels = Vec::with_capacity(spec.n_points());
    for (label, (count, radius)) in [(spec.n_inner, spec.r_inner), (spec.n_outer, spec.r_outer)]
        .into_iter()
        .enumerate()
    {
        for _ in 0..count {
            let theta = rng.random_range(0.0..tau);
            let noise = loop {
                let z = normal(&mut rng);
                if z.abs() <= 3.0 {
                    break z * spec.ring_sd;
                }
            };
            points.push(polar(radius + noise, theta));
            labels.push(label);
        }
    }
    let n_inliers = points.len();

    // Uniform over the union of the two annuli, by area.
    let bands = [
        (spec.r_inner + spec.outlier_gap, spec.r_outer - spec.outlier_gap),
        (
            spec.r_outer + spec.outlier_gap,
            spec.r_outer + spec.outlier_gap + spec.outer_width,
        ),
    ];
    let areas: Vec<f64> = bands.iter().map(|(a, b)| b * b - a * a).collect();
    let share = areas[0] / (areas[0] + areas[1]);
    for _ in 0..spec.n_outliers {
        let (a, b) = if rng.random::<f64>() < share {
            bands[0]
        } else {
            bands[1]
        };
        let r = math::sqrt(rng.random_range(a * a..b * b));
        let theta = rng.random_range(0.0..tau);
        let label = if (r - spec.r_inner).abs() <= (r - spec.r_outer).abs() {
            0
        } else {
            1
        };
        points.push(polar(r, theta));
        labels.push(label);
    }
    assemble(points, labels, n_inliers)
}
