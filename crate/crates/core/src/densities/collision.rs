//! Monte Carlo evaluation of the hard-sphere Boltzmann collision integral
//! with a factorized pair density.
//!
//! For a spatially homogeneous `f1(r, v) = rho phi(v)` the gain-minus-loss
//! term is
//!
//! ```text
//! C(v) = d^2 N rho^2 \int dv2 \int_{g.n > 0} dn [phi(v') phi(v2') - phi(v) phi(v2)] (g.n)
//! ```
//!
//! with `g = v - v2`, `v' = v - (g.n) n`, `v2' = v2 + (g.n) n`. The loss term
//! samples `v2 ~ phi`; the gain term samples `v2` from a Gaussian proposal.
//! Both draw `n` uniformly on the hemisphere `g.n > 0`.

use super::histogram::{PhaseHistogram, Projection};
use super::stats::Estimate;
use crate::error::{Error, Result};
use crate::vec3::Vec3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Velocity probability density normalized to 1.
pub trait VelocityDensity: Sync {
    fn density(&self, v: Vec3) -> f64;
    fn sample(&self, rng: &mut dyn rand::RngCore) -> Vec3;
}

fn gaussian3(rng: &mut dyn rand::RngCore, sigma: f64) -> Vec3 {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    Vec3::new(sigma * g(), sigma * g(), sigma * g())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maxwellian {
    pub temperature: f64,
    pub drift: Vec3,
}

impl Maxwellian {
    pub fn new(temperature: f64) -> Self {
        Maxwellian { temperature, drift: Vec3::ZERO }
    }
}

impl VelocityDensity for Maxwellian {
    fn density(&self, v: Vec3) -> f64 {
        let t = self.temperature;
        (2.0 * PI * t).powf(-1.5) * (-(v - self.drift).norm_sq() / (2.0 * t)).exp()
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> Vec3 {
        self.drift + gaussian3(rng, self.temperature.sqrt())
    }
}

/// Weighted superposition of Maxwellians.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub components: Vec<(f64, Maxwellian)>,
}

impl Mixture {
    pub fn two_temperature(w_cold: f64, t_cold: f64, t_hot: f64) -> Self {
        Mixture { components: vec![(w_cold, Maxwellian::new(t_cold)), (1.0 - w_cold, Maxwellian::new(t_hot))] }
    }
}

impl VelocityDensity for Mixture {
    fn density(&self, v: Vec3) -> f64 {
        self.components.iter().map(|(w, m)| w * m.density(v)).sum()
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> Vec3 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, m) in &self.components {
            acc += w;
            if u < acc {
                return m.sample(rng);
            }
        }
        self.components.last().expect("empty mixture").1.sample(rng)
    }
}

/// All mass at one velocity. The point density is zero everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monokinetic {
    pub velocity: Vec3,
}

impl VelocityDensity for Monokinetic {
    fn density(&self, _v: Vec3) -> f64 {
        0.0
    }

    fn sample(&self, _rng: &mut dyn rand::RngCore) -> Vec3 {
        self.velocity
    }
}

/// Isotropic density built from a histogram of speeds. Bin averages
/// `p_k / shell_volume_k` are placed at the bin-centre speeds and `ln phi`
/// is interpolated linearly in `s^2` between them, which is exact for any
/// Maxwellian and avoids the spurious gain-loss imbalance of a piecewise
/// constant density. Sampling draws from the histogram itself.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicSpeedHistogram {
    pub edges: Vec<f64>,
    /// Probability per speed bin, summing to 1.
    pub probs: Vec<f64>,
    /// `(s^2, ln phi)` knots over the populated bins.
    knots: Vec<(f64, f64)>,
}

impl IsotropicSpeedHistogram {
    pub fn new(edges: Vec<f64>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if edges.len() != weights.len() + 1 || !(total > 0.0) {
            return Err(Error::InvalidParam("speed histogram needs positive mass and matching edges".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let knots = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| {
                let (a, b) = (edges[k], edges[k + 1]);
                let c = 0.5 * (a + b);
                (c * c, (p / (4.0 * PI / 3.0 * (b.powi(3) - a.powi(3)))).ln())
            })
            .collect();
        Ok(IsotropicSpeedHistogram { edges, probs, knots })
    }

    /// Speed marginal of a radial-speed f1 histogram.
    pub fn from_f1(f1: &PhaseHistogram) -> Result<Self> {
        if f1.projection != Projection::RadialSpeed {
            return Err(Error::InvalidParam("collision integral needs a radial-speed f1 histogram".into()));
        }
        Self::new(f1.edges_b.clone(), &f1.marginal_b())
    }
}

impl VelocityDensity for IsotropicSpeedHistogram {
    fn density(&self, v: Vec3) -> f64 {
        let s = v.norm();
        if s >= *self.edges.last().expect("edges") || s < self.edges[0] {
            return 0.0;
        }
        let x = s * s;
        let kn = &self.knots;
        if kn.len() == 1 {
            return kn[0].1.exp();
        }
        // segment containing x, extended linearly beyond the outer knots
        let k = kn.partition_point(|&(xk, _)| xk <= x).clamp(1, kn.len() - 1);
        let ((x0, y0), (x1, y1)) = (kn[k - 1], kn[k]);
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp()
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> Vec3 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.probs.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let w: f64 = rng.random();
        let s = (a.powi(3) + w * (b.powi(3) - a.powi(3))).cbrt();
        let dir = loop {
            let g = gaussian3(rng, 1.0);
            let n = g.norm();
            if n > 1e-12 {
                break g.unit_with_norm(n);
            }
        };
        dir.scale(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionIntegral {
    pub v_query: Vec3,
    /// Gain minus loss.
    pub value: Estimate,
    pub gain: Estimate,
    pub loss: Estimate,
}

/// Uniform unit vector on the hemisphere `g.n > 0`. For `g = 0` any
/// direction is returned (the integrand vanishes).
fn hemisphere(g: Vec3, rng: &mut dyn rand::RngCore) -> Vec3 {
    let n = loop {
        let x = gaussian3(rng, 1.0);
        let m = x.norm();
        if m > 1e-12 {
            break x.unit_with_norm(m);
        }
    };
    if n.dot(g) < 0.0 {
        -n
    } else {
        n
    }
}

fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate::new(m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate::new(m, (var / n).sqrt())
}

/// Gain, loss and their difference at `v_query`, scaled by `prefactor`
/// (`d^2 N rho^2` for the hard-sphere term).
pub fn boltzmann_collision_integral<R: Rng>(
    phi: &dyn VelocityDensity,
    prefactor: f64,
    v_query: Vec3,
    mc_samples: usize,
    rng: &mut R,
) -> Result<CollisionIntegral> {
    if mc_samples == 0 {
        return Err(Error::InvalidParam("mc_samples must be >= 1".into()));
    }
    // Proposal width from the second moment of phi.
    let probe = 256;
    let m2 = (0..probe).map(|_| phi.sample(rng).norm_sq()).sum::<f64>() / probe as f64;
    let sigma = (2.0 * m2 / 3.0).max(1e-12).sqrt();
    let q = |v: Vec3| (2.0 * PI * sigma * sigma).powf(-1.5) * (-v.norm_sq() / (2.0 * sigma * sigma)).exp();

    let f_v = phi.density(v_query);
    let mut loss = Vec::with_capacity(mc_samples);
    let mut gain = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let v2 = phi.sample(rng);
        let g = v_query - v2;
        let n = hemisphere(g, rng);
        loss.push(2.0 * PI * f_v * g.dot(n).max(0.0));

        let v2 = gaussian3(rng, sigma);
        let g = v_query - v2;
        let n = hemisphere(g, rng);
        let gn = g.dot(n).max(0.0);
        let w = if gn > 0.0 {
            let vp = v_query - n.scale(gn);
            let v2p = v2 + n.scale(gn);
            2.0 * PI * gn * phi.density(vp) * phi.density(v2p) / q(v2)
        } else {
            0.0
        };
        gain.push(w);
    }
    let l = mean_se(&loss);
    let gn = mean_se(&gain);
    let s = prefactor;
    Ok(CollisionIntegral {
        v_query,
        value: Estimate::new(s * (gn.value - l.value), s * (gn.se.powi(2) + l.se.powi(2)).sqrt()),
        gain: Estimate::new(s * gn.value, s * gn.se),
        loss: Estimate::new(s * l.value, s * l.se),
    })
}

/// Probe velocities along a fixed set of directions at speeds spanning the
/// thermal range.
pub fn default_probes(count: usize, temperature: f64) -> Vec<Vec3> {
    let dirs = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.6, 0.8, 0.0),
        Vec3::new(0.0, 0.6, -0.8),
        Vec3::new(-0.8, 0.0, 0.6),
    ];
    let st = temperature.sqrt();
    (0..count)
        .map(|k| {
            let s = st * (0.25 + 2.75 * k as f64 / (count.max(2) - 1) as f64);
            dirs[k % dirs.len()].scale(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maxwellian_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = Maxwellian::new(1.0);
        for v in default_probes(8, 1.0) {
            let c = boltzmann_collision_integral(&phi, 1.0, v, 50_000, &mut rng).unwrap();
            assert!(c.value.value.abs() <= 3.0 * c.value.se, "{c:?}");
            assert!(c.loss.value > 0.0);
        }
    }

    #[test]
    fn loss_matches_closed_form_at_rest() {
        // For v = 0 and unit temperature, loss = phi(0) pi <|v2|> = phi(0) pi sqrt(8/pi).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = Maxwellian::new(1.0);
        let c = boltzmann_collision_integral(&phi, 1.0, Vec3::ZERO, 100_000, &mut rng).unwrap();
        let exact = phi.density(Vec3::ZERO) * PI * (8.0 / PI).sqrt();
        assert!(c.loss.within(exact, 4.0), "{:?} vs {exact}", c.loss);
    }

    #[test]
    fn monokinetic_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = Monokinetic { velocity: Vec3::new(0.3, 0.0, 0.0) };
        let c = boltzmann_collision_integral(&phi, 2.0, Vec3::new(0.3, 0.0, 0.0), 1000, &mut rng).unwrap();
        assert_eq!(c.value.value, 0.0);
        assert_eq!(c.loss.value, 0.0);
    }

    #[test]
    fn speed_histogram_density_hits_bin_averages_and_samples_bins() {
        let h = IsotropicSpeedHistogram::new(vec![0.0, 1.0, 2.0], &[1.0, 3.0]).unwrap();
        let inner = h.density(Vec3::new(0.5, 0.0, 0.0)) * 4.0 * PI / 3.0;
        let outer = h.density(Vec3::new(0.0, 1.5, 0.0)) * 4.0 * PI / 3.0 * 7.0;
        assert!((inner - 0.25).abs() < 1e-14);
        assert!((outer - 0.75).abs() < 1e-14);
        assert_eq!(h.density(Vec3::new(2.5, 0.0, 0.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inside = (0..4000).filter(|_| h.sample(&mut rng).norm() < 1.0).count();
        assert!((inside as f64 / 4000.0 - 0.25).abs() < 0.03);
    }

    #[test]
    fn speed_histogram_of_maxwellian_tracks_it() {
        let edges: Vec<f64> = (0..=32).map(|k| 5.0 * k as f64 / 32.0).collect();
        let w: Vec<f64> = edges
            .windows(2)
            .map(|e| {
                super::super::contact::maxwell_speed_cdf(e[1], 1.0)
                    - super::super::contact::maxwell_speed_cdf(e[0], 1.0)
            })
            .collect();
        let h = IsotropicSpeedHistogram::new(edges, &w).unwrap();
        let m = Maxwellian::new(1.0);
        for s in [0.3, 0.9, 1.7, 2.6, 3.4] {
            let v = Vec3::new(0.0, s, 0.0);
            assert!((h.density(v) / m.density(v) - 1.0).abs() < 0.01, "s={s}");
        }
    }
}
