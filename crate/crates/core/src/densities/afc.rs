//! Factorization defect of the pair density for well-separated pairs, on
//! coarse speed classes.
//!
//! For pairs with separation above `r_split` the ratio
//! `r(s1, s2) = P(s1, s2 | far) / (P(s1) P(s2))` equals 1 under exact
//! factorization. The defect is reported as `D^2 = mean (r - 1)^2`, estimated
//! without noise bias as the cross product of two independent halves of the
//! batches.

use super::contact::{maxwell_quantile_edges, speed_class};
use super::stats::{split_half, sum_arrays, Estimate};
use crate::spatial::CellList;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfcStatistics {
    pub r_split: f64,
    pub speed_edges: Vec<f64>,
    /// Ordered far-pair counts `[s1][s2]`.
    pub far: Vec<f64>,
    /// Single-particle class counts.
    pub marginal: Vec<f64>,
    pub snapshots: u64,
}

impl AfcStatistics {
    pub fn new(r_split: f64, speed_edges: Vec<f64>) -> Self {
        let k = speed_edges.len() - 1;
        AfcStatistics { r_split, speed_edges, far: vec![0.0; k * k], marginal: vec![0.0; k], snapshots: 0 }
    }

    /// Quartiles of the Maxwell speed distribution.
    pub fn with_maxwell_classes(r_split: f64, classes: usize, temperature: f64) -> Self {
        Self::new(r_split, maxwell_quantile_edges(classes, temperature))
    }

    pub fn classes(&self) -> usize {
        self.marginal.len()
    }

    fn class(&self, v: Vec3) -> usize {
        speed_class(&self.speed_edges, v.norm())
    }

    pub fn add_marginal(&mut self, v: Vec3) {
        let c = self.class(v);
        self.marginal[c] += 1.0;
    }

    /// One far pair, counted in both orders.
    pub fn add_pair(&mut self, v1: Vec3, v2: Vec3) {
        let k = self.classes();
        let (a, b) = (self.class(v1), self.class(v2));
        self.far[a * k + b] += 1.0;
        self.far[b * k + a] += 1.0;
    }

    pub fn accumulate_state(&mut self, positions: &[Vec3], velocities: &[Vec3], half_extent: f64) {
        let k = self.classes();
        let class: Vec<usize> = velocities.iter().map(|&v| self.class(v)).collect();
        let mut n = vec![0.0; k];
        for &c in &class {
            n[c] += 1.0;
        }
        let mut far = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                far[a * k + b] = n[a] * n[b] - if a == b { n[a] } else { 0.0 };
            }
        }
        let cells = CellList::build(positions, half_extent, self.r_split);
        cells.for_each_pair_within(positions, self.r_split, |i, j, _| {
            far[class[i] * k + class[j]] -= 1.0;
            far[class[j] * k + class[i]] -= 1.0;
        });
        for (a, b) in self.far.iter_mut().zip(&far) {
            *a += b;
        }
        for (a, b) in self.marginal.iter_mut().zip(&n) {
            *a += b;
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        for (a, b) in self.far.iter_mut().zip(&o.far) {
            *a += b;
        }
        for (a, b) in self.marginal.iter_mut().zip(&o.marginal) {
            *a += b;
        }
        self.snapshots += o.snapshots;
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = self.far.clone();
        v.extend_from_slice(&self.marginal);
        v
    }
}

/// `r(s1, s2) - 1` per class pair from a flat sum array.
fn ratio_minus_one(flat: &[f64], k: usize) -> Vec<f64> {
    let far = &flat[..k * k];
    let m = &flat[k * k..];
    let tf: f64 = far.iter().sum();
    let tm: f64 = m.iter().sum();
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let p = m[a] * m[b] / (tm * tm);
            out.push(if p > 0.0 && tf > 0.0 { far[a * k + b] / tf / p - 1.0 } else { 0.0 });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfcDefect {
    /// Noise-debiased `mean (r - 1)^2`.
    pub squared: Estimate,
    /// `sqrt(max(squared, 0))`.
    pub defect: f64,
    /// Plug-in `mean |r - 1|` from the pooled counts (biased upward by noise).
    pub naive: f64,
}

/// Defect from per-batch statistics; needs at least four batches for an
/// error bar.
pub fn afc_defect(batches: &[&AfcStatistics]) -> AfcDefect {
    let k = batches[0].classes();
    let flats: Vec<Vec<f64>> = batches.iter().map(|b| b.flat()).collect();
    let pooled = sum_arrays(&flats);
    let sum_of = |idx: &[usize]| {
        let sel: Vec<Vec<f64>> = idx.iter().map(|&i| flats[i].clone()).collect();
        sum_arrays(&sel)
    };
    let squared = split_half(batches.len(), |a, b| {
        let ra = ratio_minus_one(&sum_of(a), k);
        let rb = ratio_minus_one(&sum_of(b), k);
        ra.iter().zip(&rb).map(|(x, y)| x * y).sum::<f64>() / (k * k) as f64
    });
    let naive = ratio_minus_one(&pooled, k).iter().map(|x| x.abs()).sum::<f64>() / (k * k) as f64;
    AfcDefect { squared, defect: squared.value.max(0.0).sqrt(), naive }
}
