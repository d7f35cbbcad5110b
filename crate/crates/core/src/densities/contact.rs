//! Near-contact pair statistics, the contact-constant continuation and the
//! `f1 = I1 - I2` split.
//!
//! Both contact estimators measure the number density of partners at
//! separation `d` around a particle of a given speed class:
//!
//! * shell: ordered pairs with gap in `[0, delta)`, split into sub-shells of
//!   equal thickness, each converted to a density and extrapolated linearly
//!   to zero gap;
//! * flux: for molecular-chaos contact statistics the collision rate of a
//!   particle with velocity `v` is `pi d^2 c <|v - v_j|>`, so
//!   `c = (collisions per unit time) / (pi d^2 sum_i <|v_i - v_j|>)`, the
//!   mean over partners taken from a fixed partner stencil at each snapshot.

use super::histogram::{PhaseHistogram, Projection};
use super::stats::{jackknife_vec, loo_sum, sum_arrays, Estimate};
use crate::dynamics::{EventRecord, LoggedKind};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spatial::CellList;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::PI;

/// Maxwell speed distribution function at temperature `t` (unit mass).
pub fn maxwell_speed_cdf(s: f64, t: f64) -> f64 {
    let x = s / (2.0 * t).sqrt();
    erf(x) - 2.0 / PI.sqrt() * x * (-x * x).exp()
}

pub fn maxwell_speed_pdf(s: f64, t: f64) -> f64 {
    (2.0 / PI).sqrt() * s * s / t.powf(1.5) * (-s * s / (2.0 * t)).exp()
}

/// Edges splitting the Maxwell speed distribution into `bins` classes of
/// equal probability; the last edge is infinite.
pub fn maxwell_quantile_edges(bins: usize, t: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    for k in 1..bins {
        let target = k as f64 / bins as f64;
        let (mut lo, mut hi) = (0.0, 20.0 * t.sqrt());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if maxwell_speed_cdf(mid, t) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    edges.push(f64::INFINITY);
    edges
}

pub fn speed_class(edges: &[f64], s: f64) -> usize {
    (edges.partition_point(|&e| e <= s).max(1) - 1).min(edges.len() - 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactStatistics {
    pub d: f64,
    pub delta: f64,
    pub subshells: usize,
    pub partners: usize,
    pub speed_edges: Vec<f64>,
    /// Ordered pair counts, `[class][subshell]`, by speed class of the first.
    pub shell_counts: Vec<f64>,
    /// Particles per class, summed over snapshots.
    pub occupancy: Vec<f64>,
    /// Per class, sum over snapshots and particles of the partner-mean
    /// relative speed.
    pub rel_speed: Vec<f64>,
    /// Colliding particles per class by pre-collision speed (two per event).
    pub flux_counts: Vec<f64>,
    pub snapshots: u64,
    /// Observed time summed over replicas.
    pub window: f64,
}

impl ContactStatistics {
    pub fn new(d: f64, delta: f64, subshells: usize, partners: usize, speed_edges: Vec<f64>) -> Self {
        let nb = speed_edges.len() - 1;
        ContactStatistics {
            d,
            delta,
            subshells,
            partners,
            speed_edges,
            shell_counts: vec![0.0; nb * subshells],
            occupancy: vec![0.0; nb],
            rel_speed: vec![0.0; nb],
            flux_counts: vec![0.0; nb],
            snapshots: 0,
            window: 0.0,
        }
    }

    pub fn classes(&self) -> usize {
        self.speed_edges.len() - 1
    }

    pub fn class_of(&self, v: Vec3) -> usize {
        speed_class(&self.speed_edges, v.norm())
    }

    /// Shell and occupancy statistics of one snapshot.
    pub fn accumulate_state(&mut self, positions: &[Vec3], velocities: &[Vec3], half_extent: f64) {
        let n = positions.len();
        let class: Vec<usize> = velocities.iter().map(|&v| self.class_of(v)).collect();
        for &c in &class {
            self.occupancy[c] += 1.0;
        }
        if n > 1 {
            let cutoff = self.d + self.delta;
            let cells = CellList::build(positions, half_extent, cutoff);
            let width = self.delta / self.subshells as f64;
            let ns = self.subshells;
            cells.for_each_pair_within(positions, cutoff, |i, j, r| {
                let gap = r - self.d;
                if gap >= 0.0 {
                    let k = ((gap / width) as usize).min(ns - 1);
                    self.shell_counts[class[i] * ns + k] += 1.0;
                    self.shell_counts[class[j] * ns + k] += 1.0;
                }
            });
            let k = self.partners.min(n - 1);
            // Partners i+1, i+1+step, ... (mod n), a fixed stencil spread
            // over the labels.
            let step = ((n - 1) / k).max(1);
            for i in 0..n {
                let mut s = 0.0;
                for m in 0..k {
                    let j = (i + 1 + m * step) % n;
                    s += (velocities[i] - velocities[j]).norm();
                }
                self.rel_speed[class[i]] += s / k as f64;
            }
        }
        self.snapshots += 1;
    }

    pub fn accumulate_event(&mut self, rec: &EventRecord) {
        if rec.kind == LoggedKind::Pair {
            let a = self.class_of(rec.pre_i);
            let b = self.class_of(rec.pre_j);
            self.flux_counts[a] += 1.0;
            self.flux_counts[b] += 1.0;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        for (a, b) in self
            .shell_counts
            .iter_mut()
            .chain(self.occupancy.iter_mut())
            .chain(self.rel_speed.iter_mut())
            .chain(self.flux_counts.iter_mut())
            .zip(o.shell_counts.iter().chain(&o.occupancy).chain(&o.rel_speed).chain(&o.flux_counts))
        {
            *a += b;
        }
        self.snapshots += o.snapshots;
        self.window += o.window;
    }

    /// All raw sums in one array, for resampling.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.shell_counts);
        v.extend_from_slice(&self.occupancy);
        v.extend_from_slice(&self.rel_speed);
        v.extend_from_slice(&self.flux_counts);
        v.push(self.snapshots as f64);
        v.push(self.window);
        v
    }

    fn sub_shell_volume(&self, k: usize) -> f64 {
        let w = self.delta / self.subshells as f64;
        let r0 = self.d + k as f64 * w;
        4.0 * PI / 3.0 * ((r0 + w).powi(3) - r0.powi(3))
    }

    /// Contact values `(shell, flux)` per class from a flat sum array.
    /// Classes with no occupancy give NaN.
    pub fn contact_from_flat(&self, flat: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nb = self.classes();
        let ns = self.subshells;
        let shell = &flat[..nb * ns];
        let occ = &flat[nb * ns..nb * ns + nb];
        let rel = &flat[nb * ns + nb..nb * ns + 2 * nb];
        let flux = &flat[nb * ns + 2 * nb..nb * ns + 3 * nb];
        let snaps = flat[nb * ns + 3 * nb];
        let window = flat[nb * ns + 3 * nb + 1];
        let w = self.delta / ns as f64;
        let mut c_shell = vec![f64::NAN; nb];
        let mut c_flux = vec![f64::NAN; nb];
        for c in 0..nb {
            if occ[c] <= 0.0 {
                continue;
            }
            // Least-squares line through (gap midpoint, density), evaluated
            // at zero gap.
            let xs: Vec<f64> = (0..ns).map(|k| (k as f64 + 0.5) * w).collect();
            let ys: Vec<f64> = (0..ns).map(|k| shell[c * ns + k] / (occ[c] * self.sub_shell_volume(k))).collect();
            c_shell[c] = if ns == 1 {
                ys[0]
            } else {
                let xm = xs.iter().sum::<f64>() / ns as f64;
                let ym = ys.iter().sum::<f64>() / ns as f64;
                let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
                let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
                ym - sxy / sxx * xm
            };
            if rel[c] > 0.0 && window > 0.0 && snaps > 0.0 {
                c_flux[c] = (flux[c] / window) / (PI * self.d * self.d * rel[c] / snaps);
            }
        }
        (c_shell, c_flux)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    pub speed_edges: Vec<f64>,
    pub shell: Vec<Estimate>,
    pub flux: Vec<Estimate>,
    /// `flux - shell` with a jointly resampled error bar.
    pub difference: Vec<Estimate>,
    pub shell_pairs: Vec<f64>,
    pub collisions: Vec<f64>,
}

/// Jackknife over batches of both contact estimators.
pub fn estimate_contact(batches: &[&ContactStatistics]) -> ContactEstimate {
    let proto = batches[0];
    let flats: Vec<Vec<f64>> = batches.iter().map(|b| b.flat()).collect();
    let total = sum_arrays(&flats);
    let nb = proto.classes();
    let est = jackknife_vec(batches.len(), |skip| {
        let f = loo_sum(&flats, &total, skip);
        let (s, fl) = proto.contact_from_flat(&f);
        let mut out = s.clone();
        out.extend_from_slice(&fl);
        out.extend(fl.iter().zip(&s).map(|(a, b)| a - b));
        out
    });
    let ns = proto.subshells;
    ContactEstimate {
        speed_edges: proto.speed_edges.clone(),
        shell: est[..nb].to_vec(),
        flux: est[nb..2 * nb].to_vec(),
        difference: est[2 * nb..].to_vec(),
        shell_pairs: (0..nb).map(|c| total[c * ns..(c + 1) * ns].iter().sum()).collect(),
        collisions: total[nb * ns + 2 * nb..nb * ns + 3 * nb].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContinuationRule {
    /// Inside the overlap ball the pair density equals its contact value for
    /// the matching speed class.
    ContactConstant,
}

impl ContinuationRule {
    pub fn name(&self) -> &'static str {
        match self {
            ContinuationRule::ContactConstant => "contact-constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationField {
    pub rule: ContinuationRule,
    /// Per f1 bin, in histogram order.
    pub f1: Vec<Estimate>,
    pub i2: Vec<Estimate>,
    /// Re-integrated `I1`: the exact marginal part (`f1`) plus the overlap
    /// integral evaluated with the flux contact estimate.
    pub i1: Vec<Estimate>,
    /// `f1 - (I1 - I2)` per bin.
    pub defect: Vec<Estimate>,
    /// Contact class used for each f1 bin.
    pub class_of_bin: Vec<usize>,
}

impl RepresentationField {
    /// Bins where `|f1 - (I1 - I2)| > k sigma`.
    pub fn violations(&self, k: f64) -> Vec<usize> {
        self.defect
            .iter()
            .enumerate()
            .filter(|(_, e)| !(e.value.abs() <= k * e.se || e.value == 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Contact class of every bin of a radial-speed histogram, by bin-centre
/// speed.
pub fn classes_for_histogram(f1: &PhaseHistogram, speed_edges: &[f64]) -> Result<Vec<usize>> {
    if f1.projection != Projection::RadialSpeed {
        return Err(Error::InvalidParam("I1/I2 need a radial-speed f1 histogram".into()));
    }
    let mut out = Vec::with_capacity(f1.len());
    for _a in 0..f1.bins_a() {
        for b in 0..f1.bins_b() {
            out.push(speed_class(speed_edges, f1.center_b(b)));
        }
    }
    Ok(out)
}

/// `I2(y) = (4 pi / 3) d^3 c(y) f1(y)` and the re-integrated `I1(y)`, with
/// joint jackknife errors. `f1` and `contact` are per-batch accumulators.
pub fn estimate_i1_i2(
    f1: &[&PhaseHistogram],
    contact: &[&ContactStatistics],
    rule: ContinuationRule,
    params: &ModelParams,
) -> Result<RepresentationField> {
    if f1.len() != contact.len() || f1.is_empty() {
        return Err(Error::InvalidParam("f1 and contact batches must match".into()));
    }
    let ContinuationRule::ContactConstant = rule;
    let proto_h = f1[0];
    let proto_c = contact[0];
    let class_of_bin = classes_for_histogram(proto_h, &proto_c.speed_edges)?;
    let ball = 4.0 * PI / 3.0 * params.d.powi(3);

    let hflat: Vec<Vec<f64>> = f1
        .iter()
        .map(|h| {
            let mut v = h.mass.clone();
            v.push(h.snapshots as f64);
            v
        })
        .collect();
    let htot = sum_arrays(&hflat);
    let cflat: Vec<Vec<f64>> = contact.iter().map(|c| c.flat()).collect();
    let ctot = sum_arrays(&cflat);

    let (cs_all, _) = proto_c.contact_from_flat(&ctot);
    let nb = proto_h.len();
    let missing: Vec<usize> = (0..proto_c.classes())
        .filter(|&c| cs_all[c].is_nan() && (0..nb).any(|k| class_of_bin[k] == c && htot[k] > 0.0))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Continuation { bins: missing });
    }

    let volumes: Vec<f64> = (0..proto_h.bins_a())
        .flat_map(|a| (0..proto_h.bins_b()).map(move |b| (a, b)))
        .map(|(a, b)| proto_h.bin_volume(a, b))
        .collect();
    let est = jackknife_vec(f1.len(), |skip| {
        let h = loo_sum(&hflat, &htot, skip);
        let c = loo_sum(&cflat, &ctot, skip);
        let (cs, cf) = proto_c.contact_from_flat(&c);
        let snaps = h[nb];
        let mut out = vec![0.0; 4 * nb];
        for k in 0..nb {
            let f = if snaps > 0.0 { h[k] / (snaps * volumes[k]) } else { 0.0 };
            let cl = class_of_bin[k];
            let zero_if_nan = |x: f64| if x.is_nan() { 0.0 } else { x };
            let i2 = ball * zero_if_nan(cs[cl]) * f;
            let i1 = f + ball * zero_if_nan(cf[cl]) * f;
            out[k] = f;
            out[nb + k] = i2;
            out[2 * nb + k] = i1;
            out[3 * nb + k] = f - (i1 - i2);
        }
        out
    });
    Ok(RepresentationField {
        rule,
        f1: est[..nb].to_vec(),
        i2: est[nb..2 * nb].to_vec(),
        i1: est[2 * nb..3 * nb].to_vec(),
        defect: est[3 * nb..].to_vec(),
        class_of_bin,
    })
}

/// Bound constant `k` in `I2(y) <= (N - 1)(d^3 / V) k f1(y)` implied by each
/// contact class, `(4 pi / 3) c V / (N - 1)`.
pub fn majorization_constants(contact: &ContactEstimate, params: &ModelParams) -> Vec<Estimate> {
    let n1 = params.n.saturating_sub(1).max(1) as f64;
    let f = 4.0 * PI / 3.0 * params.volume / n1;
    contact.shell.iter().map(|e| Estimate::new(e.value * f, e.se * f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_edges_split_mass_evenly() {
        let e = maxwell_quantile_edges(8, 1.0);
        assert_eq!(e.len(), 9);
        for (k, &edge) in e.iter().enumerate().take(8).skip(1) {
            assert!((maxwell_speed_cdf(edge, 1.0) - k as f64 / 8.0).abs() < 1e-12);
        }
        assert_eq!(speed_class(&e, 0.0), 0);
        assert_eq!(speed_class(&e, 100.0), 7);
    }

    #[test]
    fn pdf_integrates_to_cdf() {
        let h = 1e-4;
        let acc: f64 = (0..20_000).map(|k| maxwell_speed_pdf((k as f64 + 0.5) * h, 1.3) * h).sum();
        assert!((acc - maxwell_speed_cdf(2.0, 1.3)).abs() < 1e-8);
    }

    #[test]
    fn frozen_pair_in_shell_counts_two() {
        let d = 0.1;
        let mut c = ContactStatistics::new(d, d / 10.0, 4, 64, maxwell_quantile_edges(4, 1.0));
        let pos = [Vec3::ZERO, Vec3::new(d + 0.001, 0.0, 0.0)];
        let vel = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        c.accumulate_state(&pos, &vel, 1.0);
        assert_eq!(c.shell_counts.iter().sum::<f64>(), 2.0);
        let far = [Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0)];
        c.accumulate_state(&far, &vel, 1.0);
        assert_eq!(c.shell_counts.iter().sum::<f64>(), 2.0);
        assert_eq!(c.snapshots, 2);
    }

    #[test]
    fn contact_extrapolation_recovers_linear_profile() {
        let d = 0.1;
        let mut c = ContactStatistics::new(d, 0.01, 4, 1, vec![0.0, f64::INFINITY]);
        c.occupancy[0] = 1.0;
        // density 2 + 50 * gap, integrated exactly over each sub-shell
        for k in 0..4 {
            let (r0, r1) = (d + k as f64 * 0.0025, d + (k + 1) as f64 * 0.0025);
            let n = |r: f64| 4.0 * PI * (2.0 * r.powi(3) / 3.0 + 50.0 * (r.powi(4) / 4.0 - d * r.powi(3) / 3.0));
            c.shell_counts[k] = n(r1) - n(r0);
        }
        c.snapshots = 1;
        let (s, _) = c.contact_from_flat(&c.flat());
        assert!((s[0] - 2.0).abs() < 1e-3, "{}", s[0]);
    }
}
