//! Nested-sphere counting probes for local Boltzmann-Grad scaling.

use crate::densities::stats::{jackknife_vec, loo_sum, sum_arrays, Estimate};
use crate::model::ModelParams;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Volume of the intersection of a ball of radius `a` centred at distance
/// `c` from the origin with the ball of radius `big` at the origin.
pub fn lens_volume(a: f64, c: f64, big: f64) -> f64 {
    let ball = |r: f64| 4.0 * PI / 3.0 * r.powi(3);
    if c + a <= big {
        return ball(a);
    }
    if c + big <= a {
        return ball(big);
    }
    if c >= a + big {
        return 0.0;
    }
    PI * (big + a - c).powi(2) * (c * c + 2.0 * c * a - 3.0 * a * a + 2.0 * c * big + 6.0 * a * big - 3.0 * big * big)
        / (12.0 * c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanHoveAccumulator {
    pub radii: Vec<f64>,
    /// Probe centre `(offset, 0, 0)`.
    pub offset: f64,
    pub wall_radius: f64,
    pub counts: Vec<f64>,
    pub counts_sq: Vec<f64>,
    pub snapshots: u64,
}

impl VanHoveAccumulator {
    pub fn new(radii: Vec<f64>, offset: f64, wall_radius: f64) -> Self {
        let k = radii.len();
        VanHoveAccumulator { radii, offset, wall_radius, counts: vec![0.0; k], counts_sq: vec![0.0; k], snapshots: 0 }
    }

    pub fn volume(&self, k: usize) -> f64 {
        lens_volume(self.radii[k], self.offset.abs(), self.wall_radius)
    }

    pub fn accumulate_positions(&mut self, positions: &[Vec3]) {
        let centre = Vec3::new(self.offset, 0.0, 0.0);
        let mut n = vec![0.0; self.radii.len()];
        for p in positions {
            let r = (*p - centre).norm();
            for (k, &rk) in self.radii.iter().enumerate() {
                if r <= rk {
                    n[k] += 1.0;
                }
            }
        }
        for ((c, c2), x) in self.counts.iter_mut().zip(&mut self.counts_sq).zip(&n) {
            *c += x;
            *c2 += x * x;
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        for k in 0..self.counts.len() {
            self.counts[k] += o.counts[k];
            self.counts_sq[k] += o.counts_sq[k];
        }
        self.snapshots += o.snapshots;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanHoveRow {
    pub radius: f64,
    pub volume: f64,
    /// Time-averaged `N(r)`.
    pub count: Estimate,
    /// `N(r) / N(D)` with `D` the largest radius.
    pub count_ratio: Estimate,
    /// `N(r) d^2 / V(r)` divided by the global `N d^2 / V`.
    pub scaling_ratio: Estimate,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanHoveProbe {
    pub rows: Vec<VanHoveRow>,
}

impl VanHoveProbe {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }
}

/// Relative deviation of `N(r) d^2 / V(r)` from the global value above which
/// a radius is flagged.
pub const VAN_HOVE_TOLERANCE: f64 = 0.2;

/// Probe table from per-batch accumulators. With a single batch the error
/// bars come from the snapshot-to-snapshot spread.
pub fn van_hove_probe(batches: &[&VanHoveAccumulator], params: &ModelParams) -> VanHoveProbe {
    let proto = batches[0];
    let k = proto.radii.len();
    let flats: Vec<Vec<f64>> = batches
        .iter()
        .map(|b| {
            let mut v = b.counts.clone();
            v.push(b.snapshots as f64);
            v
        })
        .collect();
    let total = sum_arrays(&flats);
    let global = params.n as f64 / params.volume;
    let stat = |f: &[f64]| {
        let s = f[k].max(1.0);
        let mean: Vec<f64> = (0..k).map(|i| f[i] / s).collect();
        let mut out = mean.clone();
        out.extend((0..k).map(|i| mean[i] / mean[k - 1]));
        out.extend((0..k).map(|i| mean[i] / proto.volume(i) / global));
        out
    };
    let mut est = jackknife_vec(batches.len(), |skip| stat(&loo_sum(&flats, &total, skip)));
    if batches.len() < 2 {
        let s = total[k].max(1.0);
        let mut sq = vec![0.0; k];
        for b in batches {
            for (acc, x) in sq.iter_mut().zip(&b.counts_sq) {
                *acc += x;
            }
        }
        for i in 0..k {
            let m = total[i] / s;
            let se = ((sq[i] / s - m * m).max(0.0) / s).sqrt();
            est[i].se = se;
            est[k + i].se = if i == k - 1 { 0.0 } else { se / est[k - 1].value };
            est[2 * k + i].se = se / proto.volume(i) / global;
        }
    }
    let rows = (0..k)
        .map(|i| VanHoveRow {
            radius: proto.radii[i],
            volume: proto.volume(i),
            count: est[i],
            count_ratio: est[k + i],
            scaling_ratio: est[2 * k + i],
            flagged: (est[2 * k + i].value - 1.0).abs() > VAN_HOVE_TOLERANCE,
        })
        .collect();
    VanHoveProbe { rows }
}

/// Probe table from a stream of states.
pub fn van_hove_diagnostics<'a>(
    states: impl IntoIterator<Item = &'a crate::model::SystemState>,
    radii: &[f64],
    offset: f64,
    params: &ModelParams,
    wall_radius: f64,
) -> VanHoveProbe {
    let mut acc = VanHoveAccumulator::new(radii.to_vec(), offset, wall_radius);
    for s in states {
        acc.accumulate_positions(&s.positions());
    }
    van_hove_probe(&[&acc], params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lens_volume_limits() {
        let ball = |r: f64| 4.0 * PI / 3.0 * r.powi(3);
        assert!((lens_volume(0.5, 0.2, 1.0) - ball(0.5)).abs() < 1e-15);
        assert!((lens_volume(2.0, 0.5, 1.0) - ball(1.0)).abs() < 1e-15);
        assert_eq!(lens_volume(0.5, 2.0, 1.0), 0.0);
        // equal unit balls at distance 1: 5 pi / 12
        assert!((lens_volume(1.0, 1.0, 1.0) - 5.0 * PI / 12.0).abs() < 1e-14);
        // continuity at the internal tangency
        assert!((lens_volume(0.5, 0.5 + 1e-12, 1.0) - ball(0.5)).abs() < 1e-9);
    }
}
