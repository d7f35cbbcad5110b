//! Log-log least-squares power-law fits with residual-bootstrap intervals.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// `value = amplitude * N^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub amplitude: f64,
    /// 95% percentile interval for `beta`.
    pub ci: (f64, f64),
    /// Coefficient of determination in log space.
    pub r_squared: f64,
    /// Root-mean-square log residual.
    pub rms_residual: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn ci_contains(&self, beta: f64) -> bool {
        self.ci.0 <= beta && beta <= self.ci.1
    }
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, ym - slope * xm)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_power_law(points: &[(f64, f64)], seed: u64) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::Fit(format!("non-positive or non-finite point ({}, {})", p.0, p.1)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Fit("all abscissae are equal".into()));
    }
    let (beta, a) = ols(&x, &y);
    let fitted: Vec<f64> = x.iter().map(|xi| a + beta * xi).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut betas = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut yb = vec![0.0; y.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (k, v) in yb.iter_mut().enumerate() {
            *v = fitted[k] + resid[rng.random_range(0..resid.len())];
        }
        betas.push(ols(&x, &yb).0);
    }
    betas.sort_by(f64::total_cmp);
    Ok(PowerLawFit {
        beta,
        amplitude: a.exp(),
        ci: (percentile(&betas, 0.025).min(beta), percentile(&betas, 0.975).max(beta)),
        r_squared,
        rms_residual: (ss_res / y.len() as f64).sqrt(),
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let f = fit_power_law(&[(100.0, 0.1), (400.0, 0.05), (1600.0, 0.025)], 1).unwrap();
        assert!((f.beta + 0.5).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
        assert!((f.amplitude - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_values() {
        let f = fit_power_law(&[(10.0, 3.0), (20.0, 3.0), (40.0, 3.0)], 1).unwrap();
        assert!(f.beta.abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_power_law(&[(1.0, 1.0), (2.0, 1.0)], 0), Err(Error::Fit(_))));
        assert!(matches!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], 0), Err(Error::Fit(_))));
    }
}
