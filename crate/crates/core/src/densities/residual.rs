//! Free-streaming residual `dt f1 + v dx f1` on the `(x, v_x)` projection.

use super::histogram::{PhaseHistogram, Projection};
use super::stats::{bootstrap_se, split_half, Estimate};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub x_bins: usize,
    pub v_bins: usize,
    /// Residual per interior `(x, v)` bin averaged over interior times, for
    /// x bins `1..x_bins-1` (row-major, `v` fastest).
    pub field: Vec<f64>,
    /// Mean over interior times of `sum |R| dx dv`.
    pub norm: Estimate,
    /// Same for the time derivative alone.
    pub dt_norm: Estimate,
    /// Expected norm of a pure-noise residual with the measured bin errors.
    pub noise_floor: f64,
    /// Split-half estimate of `sum R^2 dx dv`: unbiased, zero in expectation
    /// when the true residual vanishes.
    pub squared: Estimate,
    pub dt_squared: Estimate,
}

impl ResidualReport {
    /// True when the squared residual is within `k` error bars of zero.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.squared.value <= k * self.squared.se
    }

    pub fn dt_consistent_with_zero(&self, k: f64) -> bool {
        self.dt_squared.value <= k * self.dt_squared.se
    }
}

struct Layout {
    nx: usize,
    nv: usize,
    dx: f64,
    dv: f64,
    dt: f64,
    vc: Vec<f64>,
}

/// Residual and its time-derivative part at each interior time, for interior
/// x bins, from summed series masses. Returns `(full, dt_only)`.
fn residual_fields(series: &[Vec<f64>], snaps: &[f64], lay: &Layout) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = series.len();
    let dens: Vec<Vec<f64>> = series
        .iter()
        .zip(snaps)
        .map(|(m, &s)| m.iter().map(|x| if s > 0.0 { x / (s * lay.dx * lay.dv) } else { 0.0 }).collect())
        .collect();
    let mut full = Vec::with_capacity(k - 2);
    let mut tonly = Vec::with_capacity(k - 2);
    for t in 1..k - 1 {
        let mut r = Vec::with_capacity((lay.nx - 2) * lay.nv);
        let mut rt = Vec::with_capacity((lay.nx - 2) * lay.nv);
        for a in 1..lay.nx - 1 {
            for b in 0..lay.nv {
                let i = a * lay.nv + b;
                let ft = (dens[t + 1][i] - dens[t - 1][i]) / (2.0 * lay.dt);
                let fx = (dens[t][i + lay.nv] - dens[t][i - lay.nv]) / (2.0 * lay.dx);
                r.push(ft + lay.vc[b] * fx);
                rt.push(ft);
            }
        }
        full.push(r);
        tonly.push(rt);
    }
    (full, tonly)
}

fn uniform(edges: &[f64]) -> bool {
    let w = edges[1] - edges[0];
    edges.windows(2).all(|p| ((p[1] - p[0]) - w).abs() <= 1e-9 * w.abs())
}

/// `batches[b][k]` is the `(x, v_x)` histogram of batch `b` at `times[k]`.
pub fn free_streaming_residual(batches: &[Vec<PhaseHistogram>], times: &[f64], seed: u64) -> Result<ResidualReport> {
    let k = times.len();
    if k < 3 || batches.is_empty() {
        return Err(Error::InsufficientSamples(format!("need >= 3 times and >= 1 batch, got {k} times")));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::InvalidParam("residual times must be uniformly spaced".into()));
    }
    let proto = &batches[0][0];
    if !matches!(proto.projection, Projection::XVx { .. }) {
        return Err(Error::InvalidParam("residual needs the (x, v_x) projection".into()));
    }
    if batches.iter().any(|s| s.len() != k || s.iter().any(|h| !h.same_binning(proto))) {
        return Err(Error::InvalidParam("residual series must share binning and length".into()));
    }
    if proto.bins_a() < 3 || !uniform(&proto.edges_a) || !uniform(&proto.edges_b) {
        return Err(Error::InvalidParam("residual needs >= 3 uniform spatial bins".into()));
    }
    let lay = Layout {
        nx: proto.bins_a(),
        nv: proto.bins_b(),
        dx: proto.edges_a[1] - proto.edges_a[0],
        dv: proto.edges_b[1] - proto.edges_b[0],
        dt,
        vc: (0..proto.bins_b()).map(|b| proto.center_b(b)).collect(),
    };
    let cell = lay.dx * lay.dv;
    let nb = batches.len();

    let summed = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut m = vec![vec![0.0; proto.len()]; k];
        let mut s = vec![0.0; k];
        for &b in idx {
            for t in 0..k {
                for (acc, x) in m[t].iter_mut().zip(&batches[b][t].mass) {
                    *acc += x;
                }
                s[t] += batches[b][t].snapshots as f64;
            }
        }
        (m, s)
    };
    let l1 =
        |f: &[Vec<f64>]| f.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>() * cell).sum::<f64>() / f.len() as f64;
    let dot = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() * cell).sum::<f64>()
            / a.len() as f64
    };

    let all: Vec<usize> = (0..nb).collect();
    let (m, s) = summed(&all);
    let (full, tonly) = residual_fields(&m, &s, &lay);
    let inner = full[0].len();
    let mut field = vec![0.0; inner];
    for r in &full {
        for (f, x) in field.iter_mut().zip(r) {
            *f += x / full.len() as f64;
        }
    }

    let norm_se = bootstrap_se(nb, 200, seed, |idx| {
        let (m, s) = summed(idx);
        l1(&residual_fields(&m, &s, &lay).0)
    });
    let dt_se = bootstrap_se(nb, 200, seed ^ 1, |idx| {
        let (m, s) = summed(idx);
        l1(&residual_fields(&m, &s, &lay).1)
    });

    // Per-bin error of the pooled residual from the spread of per-batch
    // residuals.
    let noise_floor = if nb >= 2 {
        let per: Vec<Vec<Vec<f64>>> = (0..nb)
            .map(|b| {
                let (m, s) = summed(&[b]);
                residual_fields(&m, &s, &lay).0
            })
            .collect();
        let mut floor = 0.0;
        for t in 0..full.len() {
            for i in 0..inner {
                let mean = per.iter().map(|p| p[t][i]).sum::<f64>() / nb as f64;
                let var = per.iter().map(|p| (p[t][i] - mean).powi(2)).sum::<f64>() / (nb as f64 - 1.0);
                floor += (var / nb as f64).sqrt() * (2.0 / std::f64::consts::PI).sqrt() * cell;
            }
        }
        floor / full.len() as f64
    } else {
        f64::NAN
    };

    let squared = split_half(nb, |a, b| {
        let (ma, sa) = summed(a);
        let (mb, sb) = summed(b);
        dot(&residual_fields(&ma, &sa, &lay).0, &residual_fields(&mb, &sb, &lay).0)
    });
    let dt_squared = split_half(nb, |a, b| {
        let (ma, sa) = summed(a);
        let (mb, sb) = summed(b);
        dot(&residual_fields(&ma, &sa, &lay).1, &residual_fields(&mb, &sb, &lay).1)
    });

    Ok(ResidualReport {
        times: times.to_vec(),
        x_bins: lay.nx,
        v_bins: lay.nv,
        field,
        norm: Estimate::new(l1(&full), norm_se),
        dt_norm: Estimate::new(l1(&tonly), dt_se),
        noise_floor,
        squared,
        dt_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::Vec3;

    fn hist() -> PhaseHistogram {
        PhaseHistogram::x_vx(1.0, 10, 10.0, 2.0, 8)
    }

    #[test]
    fn exact_translation_has_small_residual() {
        // f(x, v, t) = g(x - v t) with g linear in x: central differences are
        // exact, up to the use of bin-centre velocities within each bin.
        let times = [0.0, 0.1, 0.2];
        let series: Vec<PhaseHistogram> = times
            .iter()
            .map(|&t| {
                let mut h = hist();
                for a in 0..h.bins_a() {
                    for b in 0..h.bins_b() {
                        let (x, v) = (h.center_a(a), h.center_b(b));
                        let k = h.index(a, b);
                        h.mass[k] = (2.0 + 0.5 * (x - v * t)) * h.bin_volume(a, b);
                    }
                }
                h.snapshots = 1;
                h
            })
            .collect();
        let r = free_streaming_residual(&[series], &times, 0).unwrap();
        assert!(r.field.iter().all(|x| x.abs() < 1e-9), "{:?}", r.field);
        assert!(r.norm.value < 1e-9);
    }

    #[test]
    fn stationary_gradient_is_detected() {
        let times = [0.0, 0.1, 0.2];
        let series: Vec<PhaseHistogram> = times
            .iter()
            .map(|_| {
                let mut h = hist();
                for a in 0..h.bins_a() {
                    h.add_point(Vec3::new(h.center_a(a), 0.0, 0.0), Vec3::new(1.1, 0.0, 0.0), a as f64);
                }
                h.snapshots = 1;
                h
            })
            .collect();
        let r = free_streaming_residual(&[series], &times, 0).unwrap();
        assert!(r.norm.value > 0.0);
        assert_eq!(r.dt_norm.value, 0.0);
    }

    #[test]
    fn too_few_times() {
        let e = free_streaming_residual(&[vec![hist(), hist()]], &[0.0, 1.0], 0);
        assert!(matches!(e, Err(Error::InsufficientSamples(_))));
    }
}
