//! Radial profiles of number density and local volume fraction.

use super::stats::{jackknife_vec, loo_sum, sum_arrays, Estimate};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    /// Shell edges over `[0, R_o]`.
    pub edges: Vec<f64>,
    pub d: f64,
    pub counts: Vec<f64>,
    pub snapshots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub centers: Vec<f64>,
    pub number_density: Vec<Estimate>,
    pub eta: Vec<Estimate>,
    /// Volume-weighted mean of `eta` over the whole ball.
    pub eta_mean: f64,
    pub eta_max: f64,
}

impl FieldGrid {
    pub fn new(wall_radius: f64, shells: usize, d: f64) -> Self {
        let edges = (0..=shells).map(|k| wall_radius * k as f64 / shells as f64).collect();
        FieldGrid { edges, d, counts: vec![0.0; shells], snapshots: 0 }
    }

    pub fn shells(&self) -> usize {
        self.counts.len()
    }

    pub fn shell_volume(&self, k: usize) -> f64 {
        4.0 * PI / 3.0 * (self.edges[k + 1].powi(3) - self.edges[k].powi(3))
    }

    pub fn accumulate_positions(&mut self, positions: &[Vec3]) {
        let r_max = *self.edges.last().expect("edges");
        let n = self.shells();
        for p in positions {
            let k = ((p.norm() / r_max * n as f64) as usize).min(n - 1);
            self.counts[k] += 1.0;
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
        self.snapshots += o.snapshots;
    }

    fn values(&self, flat: &[f64]) -> Vec<f64> {
        let s = flat[self.shells()];
        (0..self.shells()).map(|k| if s > 0.0 { flat[k] / (s * self.shell_volume(k)) } else { 0.0 }).collect()
    }

    /// Profile with jackknife errors over batches.
    pub fn profile(batches: &[&FieldGrid]) -> FieldProfile {
        let proto = batches[0];
        let flats: Vec<Vec<f64>> = batches
            .iter()
            .map(|b| {
                let mut v = b.counts.clone();
                v.push(b.snapshots as f64);
                v
            })
            .collect();
        let total = sum_arrays(&flats);
        let n = jackknife_vec(batches.len(), |skip| proto.values(&loo_sum(&flats, &total, skip)));
        let ball = 4.0 * PI / 3.0 * proto.d.powi(3);
        let eta: Vec<Estimate> = n.iter().map(|e| Estimate::new(ball * e.value, ball * e.se)).collect();
        let vol: f64 = (0..proto.shells()).map(|k| proto.shell_volume(k)).sum();
        let eta_mean = (0..proto.shells()).map(|k| eta[k].value * proto.shell_volume(k)).sum::<f64>() / vol;
        FieldProfile {
            centers: (0..proto.shells()).map(|k| 0.5 * (proto.edges[k] + proto.edges[k + 1])).collect(),
            eta_max: eta.iter().map(|e| e.value).fold(0.0, f64::max),
            number_density: n,
            eta,
            eta_mean,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_volumes_sum_to_ball() {
        let g = FieldGrid::new(1.5, 7, 0.1);
        let v: f64 = (0..7).map(|k| g.shell_volume(k)).sum();
        assert!((v - 4.0 * PI / 3.0 * 1.5f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn half_ball_placement_is_reflected() {
        let mut g = FieldGrid::new(1.0, 4, 0.1);
        // all particles in the inner two shells
        let p: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.05 * i as f64, 0.0, 0.0)).collect();
        g.accumulate_positions(&p);
        assert_eq!(g.counts, vec![5.0, 5.0, 0.0, 0.0]);
        let prof = FieldGrid::profile(&[&g]);
        assert_eq!(prof.number_density[3].value, 0.0);
        let total: f64 = (0..4).map(|k| prof.number_density[k].value * g.shell_volume(k)).sum();
        assert!((total - 10.0).abs() < 1e-12);
    }
}
