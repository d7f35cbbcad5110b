//! Resampling error estimates over replica batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }

    /// `|value - target| <= k se`, treating a zero error bar as exact.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Elementwise sum of per-batch arrays.
pub fn sum_arrays(batches: &[Vec<f64>]) -> Vec<f64> {
    let mut total = vec![0.0; batches.first().map_or(0, Vec::len)];
    for b in batches {
        for (t, x) in total.iter_mut().zip(b) {
            *t += x;
        }
    }
    total
}

/// Delete-one jackknife. `stat(None)` is the full-sample statistic and
/// `stat(Some(k))` the statistic with batch `k` removed.
pub fn jackknife(nb: usize, stat: impl Fn(Option<usize>) -> f64) -> Estimate {
    let value = stat(None);
    if nb < 2 {
        return Estimate::new(value, f64::NAN);
    }
    let reps: Vec<f64> = (0..nb).map(|k| stat(Some(k))).collect();
    let mean = reps.iter().sum::<f64>() / nb as f64;
    let ss: f64 = reps.iter().map(|r| (r - mean).powi(2)).sum();
    Estimate::new(value, ((nb as f64 - 1.0) / nb as f64 * ss).sqrt())
}

/// Vector-valued jackknife; every call of `stat` must return the same length.
pub fn jackknife_vec(nb: usize, stat: impl Fn(Option<usize>) -> Vec<f64>) -> Vec<Estimate> {
    let value = stat(None);
    if nb < 2 {
        return value.into_iter().map(|v| Estimate::new(v, f64::NAN)).collect();
    }
    let reps: Vec<Vec<f64>> = (0..nb).map(|k| stat(Some(k))).collect();
    let f = (nb as f64 - 1.0) / nb as f64;
    value
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mean = reps.iter().map(|r| r[i]).sum::<f64>() / nb as f64;
            let ss: f64 = reps.iter().map(|r| (r[i] - mean).powi(2)).sum();
            Estimate::new(v, (f * ss).sqrt())
        })
        .collect()
}

/// Sum of per-batch arrays, optionally leaving one batch out.
pub fn loo_sum(batches: &[Vec<f64>], total: &[f64], skip: Option<usize>) -> Vec<f64> {
    match skip {
        None => total.to_vec(),
        Some(k) => total.iter().zip(&batches[k]).map(|(t, b)| t - b).collect(),
    }
}

/// Standard deviation of `stat` over bootstrap resamples of batch indices.
pub fn bootstrap_se(nb: usize, resamples: usize, seed: u64, stat: impl Fn(&[usize]) -> f64) -> f64 {
    if nb < 2 || resamples < 2 {
        return f64::NAN;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; nb];
    let vals: Vec<f64> = (0..resamples)
        .map(|_| {
            for x in idx.iter_mut() {
                *x = rng.random_range(0..nb);
            }
            stat(&idx)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / resamples as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resamples as f64 - 1.0)).sqrt()
}

/// Split-half cross product: `stat(a, b)` evaluated on the even and odd
/// batches, with a jackknife over consecutive batch pairs. Requires at least
/// four batches.
pub fn split_half(nb: usize, stat: impl Fn(&[usize], &[usize]) -> f64) -> Estimate {
    let pairs = nb / 2;
    let build = |skip: Option<usize>| {
        let mut a = Vec::with_capacity(pairs);
        let mut b = Vec::with_capacity(pairs);
        for p in (0..pairs).filter(|&p| Some(p) != skip) {
            a.push(2 * p);
            b.push(2 * p + 1);
        }
        (a, b)
    };
    if pairs < 2 {
        let (a, b) = build(None);
        return Estimate::new(if pairs == 1 { stat(&a, &b) } else { f64::NAN }, f64::NAN);
    }
    jackknife(pairs, |skip| {
        let (a, b) = build(skip);
        stat(&a, &b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        let n = x.len() as f64;
        let est = jackknife(x.len(), |skip| {
            let v: Vec<f64> = x.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, v)| *v).collect();
            v.iter().sum::<f64>() / v.len() as f64
        });
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((est.value - 5.0).abs() < 1e-15);
        assert!((est.se - sd / n.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_sane() {
        let x: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let f = |idx: &[usize]| idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64;
        let a = bootstrap_se(32, 500, 9, f);
        assert_eq!(a, bootstrap_se(32, 500, 9, f));
        let mean = x.iter().sum::<f64>() / 32.0;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0).sqrt();
        assert!((a / (sd / 32f64.sqrt()) - 1.0).abs() < 0.2);
    }

    #[test]
    fn split_half_uses_disjoint_halves() {
        let e = split_half(8, |a, b| {
            assert!(a.iter().all(|i| i % 2 == 0) && b.iter().all(|i| i % 2 == 1));
            (a.len() + b.len()) as f64
        });
        assert_eq!(e.value, 8.0);
    }
}
