use serde::{Deserialize, Serialize};

use crate::geometry::PointCloud;
use crate::scalar::Real;

use super::MetricsError;

pub const DEFAULT_RESOLUTION: usize = 28;

/// Point counts on an `r x r x r` grid over the normalized cube `[-0.5, 0.5]^3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyHistogram {
    pub resolution: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl OccupancyHistogram {
    pub fn new(resolution: usize) -> Self {
        OccupancyHistogram { resolution, counts: vec![0; resolution.pow(3)], total: 0 }
    }

    fn cell<F: Real>(&self, c: F) -> usize {
        let r = self.resolution as f64;
        ((c.as_f64() + 0.5) * r).floor().clamp(0.0, r - 1.0) as usize
    }

    /// Adds points; coordinates outside the cube fall into the boundary cells.
    pub fn add<F: Real>(&mut self, points: &[[F; 3]]) {
        let r = self.resolution;
        for p in points {
            let (i, j, k) = (self.cell(p[0]), self.cell(p[1]), self.cell(p[2]));
            self.counts[(i * r + j) * r + k] += 1;
        }
        self.total += points.len() as u64;
    }

    /// Pooled histogram of a set of clouds.
    pub fn pooled<F: Real>(clouds: &[&PointCloud<F>], resolution: usize) -> Self {
        let mut h = OccupancyHistogram::new(resolution);
        for c in clouds {
            h.add(&c.points);
        }
        h
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total as f64;
        self.counts.iter().map(|&c| if self.total == 0 { 0.0 } else { c as f64 / total }).collect()
    }
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter().zip(m).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &mi)| pi * (pi / mi).log2()).sum()
}

/// Jensen-Shannon divergence in bits between two distributions over the same cells.
pub fn jsd_distributions(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DimensionMismatch { left: p.len(), right: q.len() });
    }
    if p.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m)).clamp(0.0, 1.0))
}

/// JSD between the pooled occupancy histograms of two cloud sets.
pub fn jsd<F: Real>(
    set_a: &[&PointCloud<F>],
    set_b: &[&PointCloud<F>],
    resolution: usize,
) -> Result<f64, MetricsError> {
    let (ha, hb) = (OccupancyHistogram::pooled(set_a, resolution), OccupancyHistogram::pooled(set_b, resolution));
    if ha.total == 0 || hb.total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    jsd_distributions(&ha.probabilities(), &hb.probabilities())
}
