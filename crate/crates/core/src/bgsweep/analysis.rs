//! Per-`N` diagnostics, sweep-level fits and the term-comparison table. Pure
//! functions of the stored accumulators; every random draw is seeded from the
//! plan.

use super::estimators::EstimatorConfig;
use super::execute::{NRun, SweepData};
use super::fit::{fit_power_law, PowerLawFit};
use super::vanhove::{van_hove_probe, VanHoveProbe};
use crate::densities::stats::{jackknife, jackknife_vec, loo_sum, sum_arrays};
use crate::densities::{
    afc_defect, boltzmann_collision_integral, default_probes, estimate_contact, free_streaming_residual, AfcDefect,
    CollisionIntegral, ContactEstimate, Estimate, FieldGrid, IsotropicSpeedHistogram, PhaseHistogram, ResidualReport,
};
use crate::ensemble::derive_seed;
use crate::error::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Contact classes with fewer shell pairs than this are left out of `k_sup`.
pub const MIN_SHELL_PAIRS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionTerm {
    /// Root mean square of gain minus loss over the probes.
    pub rms: Estimate,
    /// Mean loss over the probes; the natural scale of the term.
    pub loss_scale: f64,
    /// Largest `|C| / se` over the probes.
    pub max_z: f64,
    pub probes: Vec<CollisionIntegral>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub d: f64,
    pub c: f64,
    pub scaling_residual: f64,
    pub eta_bar: f64,
    pub eta_max: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub manifest: String,
    pub collision_rate: Estimate,
    pub rate_oracle: f64,
    pub free_fraction: Estimate,
    pub i2_proxy: Estimate,
    pub contact: ContactEstimate,
    /// Per contact class `(4 pi / 3) c V / (N - 1)`.
    pub k_class: Vec<Estimate>,
    pub k_sup: Estimate,
    /// Every populated f1 bin satisfies the bound with `k_sup`.
    pub majorized: bool,
    pub afc: AfcDefect,
    pub residual: Option<ResidualReport>,
    pub collision: CollisionTerm,
    pub vanhove: VanHoveProbe,
    pub max_energy_drift: f64,
    pub min_contact_gap: f64,
    pub min_wall_clearance: f64,
    pub overflow_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub c: f64,
    pub records: Vec<SweepRecord>,
    pub i2_fit: Option<PowerLawFit>,
    pub i2_fit_error: Option<String>,
    /// `(max - min) / mean` of the per-particle collision rate.
    pub rate_variation: f64,
    /// `max / min` of `k_sup` over `N`.
    pub k_sup_spread: f64,
    /// `D^2(N)` non-increasing within three combined error bars.
    pub afc_non_increasing: bool,
    pub free_fraction_increasing: bool,
}

fn collision_rate(run: &NRun) -> Estimate {
    let r: Vec<f64> = run.replicas.iter().map(|r| r.collision_rate).collect();
    let m = r.len() as f64;
    let mean = r.iter().sum::<f64>() / m;
    let var = if r.len() > 1 { r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { f64::NAN };
    Estimate::new(mean, (var / m).sqrt())
}

pub fn analyze_run(run: &NRun, cfg: &EstimatorConfig, probe_seed: u64) -> Result<SweepRecord> {
    let p = &run.entry.params;
    let batches = &run.batches;
    let nb = batches.len();
    let vol = p.volume;

    let kflat: Vec<Vec<f64>> = batches.iter().map(|b| vec![b.klimontovich_mass, b.snapshots() as f64]).collect();
    let ktot = sum_arrays(&kflat);
    let free_fraction = jackknife(nb, |skip| {
        let f = loo_sum(&kflat, &ktot, skip);
        f[0] / f[1]
    });

    let contacts: Vec<_> = batches.iter().map(|b| &b.contact).collect();
    let contact = estimate_contact(&contacts);
    let proto = contacts[0];
    let cflat: Vec<Vec<f64>> = contacts.iter().map(|c| c.flat()).collect();
    let ctot = sum_arrays(&cflat);
    let ncls = proto.classes();
    let ball = 4.0 * PI / 3.0 * p.d.powi(3);
    let i2_proxy = jackknife(nb, |skip| {
        let f = loo_sum(&cflat, &ctot, skip);
        let (shell, _) = proto.contact_from_flat(&f);
        let occ = &f[ncls * proto.subshells..ncls * proto.subshells + ncls];
        let tot: f64 = occ.iter().sum();
        ball * (0..ncls).filter(|&s| occ[s] > 0.0).map(|s| shell[s] * occ[s] / tot).sum::<f64>()
    });

    let n1 = (p.n.saturating_sub(1)).max(1) as f64;
    let kf = 4.0 * PI / 3.0 * vol / n1;
    let k_class: Vec<Estimate> = contact.shell.iter().map(|e| Estimate::new(kf * e.value, kf * e.se)).collect();
    let qualified: Vec<usize> = (0..ncls)
        .filter(|&s| contact.shell_pairs[s] >= MIN_SHELL_PAIRS && contact.shell[s].value.is_finite())
        .collect();
    let k_sup = qualified
        .iter()
        .map(|&s| k_class[s])
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap_or(Estimate::new(f64::NAN, f64::NAN));

    // Bin-wise bound I2(y) <= (N - 1)(d^3 / V) k_sup f1(y) over qualified classes.
    let mut f1 = batches[0].f1.clone();
    for b in &batches[1..] {
        f1.merge(&b.f1)?;
    }
    let bound = n1 * p.d.powi(3) / vol * k_sup.value;
    let mut majorized = k_sup.value.is_finite();
    for a in 0..f1.bins_a() {
        for b in 0..f1.bins_b() {
            let s = crate::densities::contact::speed_class(&proto.speed_edges, f1.center_b(b));
            if !qualified.contains(&s) {
                continue;
            }
            let f = f1.density(a, b);
            let i2 = ball * contact.shell[s].value * f;
            majorized &= i2 <= bound * f * (1.0 + 1e-12);
        }
    }

    let afcs: Vec<_> = batches.iter().map(|b| &b.afc).collect();
    let afc = afc_defect(&afcs);

    let series: Vec<Vec<_>> = batches.iter().map(|b| b.xvx.clone()).collect();
    let residual = free_streaming_residual(&series, &batches[0].residual_times, probe_seed ^ 0x5e51).ok();

    let fields: Vec<&FieldGrid> = batches.iter().map(|b| &b.field).collect();
    let profile = FieldGrid::profile(&fields);

    let vh: Vec<_> = batches.iter().map(|b| &b.vanhove).collect();
    let vanhove = van_hove_probe(&vh, p);

    let collision = collision_term(run, &f1, cfg, probe_seed)?;

    let fold = |f: fn(&crate::ensemble::ReplicaResult) -> f64, init: f64, op: fn(f64, f64) -> f64| {
        run.replicas.iter().map(f).fold(init, op)
    };
    Ok(SweepRecord {
        n: p.n,
        d: p.d,
        c: p.c().unwrap_or((p.n as f64).sqrt() * p.d),
        scaling_residual: p.n as f64 * p.d * p.d - p.c().map_or(p.n as f64 * p.d * p.d, |c| c * c),
        eta_bar: p.eta_bar(),
        eta_max: profile.eta_max,
        replicas: run.replicas.len(),
        horizon: run.entry.horizon,
        manifest: format!("manifest.toml#n={}", p.n),
        collision_rate: collision_rate(run),
        rate_oracle: p.dilute_collision_rate(),
        free_fraction,
        i2_proxy,
        contact,
        k_class,
        k_sup,
        majorized,
        afc,
        residual,
        collision,
        vanhove,
        max_energy_drift: fold(|r| r.energy_drift.abs(), 0.0, f64::max),
        min_contact_gap: fold(|r| r.min_contact_gap, f64::INFINITY, f64::min),
        min_wall_clearance: fold(|r| r.min_wall_clearance, f64::INFINITY, f64::min),
        overflow_warning: f1.overflow_warning(),
    })
}

fn collision_term(run: &NRun, f1: &PhaseHistogram, cfg: &EstimatorConfig, seed: u64) -> Result<CollisionTerm> {
    let p = &run.entry.params;
    let mass = f1.binned_mass();
    let probes_v = default_probes(cfg.probes, p.temperature);
    if !(mass > 0.0) {
        return Ok(CollisionTerm { rms: Estimate::exact(0.0), loss_scale: 0.0, max_z: 0.0, probes: Vec::new() });
    }
    let phi = IsotropicSpeedHistogram::from_f1(f1)?;
    let rho = mass / p.volume;
    let pref = p.d * p.d * p.n as f64 * rho * rho;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<CollisionIntegral> = probes_v
        .into_iter()
        .map(|v| boltzmann_collision_integral(&phi, pref, v, cfg.mc_samples, &mut rng))
        .collect::<Result<_>>()?;
    let k = probes.len() as f64;
    let ms: f64 = probes.iter().map(|c| c.value.value.powi(2)).sum::<f64>() / k;
    let rms = ms.sqrt();
    // delta method: d(rms) = sum(C dC) / (k rms)
    let se = if rms > 0.0 {
        (probes.iter().map(|c| (c.value.value * c.value.se).powi(2)).sum::<f64>()).sqrt() / (k * rms)
    } else {
        0.0
    };
    Ok(CollisionTerm {
        rms: Estimate::new(rms, se),
        loss_scale: probes.iter().map(|c| c.loss.value).sum::<f64>() / k,
        max_z: probes.iter().map(|c| (c.value.value / c.value.se).abs()).fold(0.0, f64::max),
        probes,
    })
}

pub fn analyze_sweep(data: &SweepData) -> Result<SweepResult> {
    let records = data
        .runs
        .iter()
        .map(|r| analyze_run(r, &data.config, derive_seed(data.plan.plan.base_seed ^ 0xA11A, r.entry.n as u64)))
        .collect::<Result<Vec<_>>>()?;
    summarize(data.plan.plan.c, records, data.plan.plan.base_seed)
}

pub fn summarize(c: f64, records: Vec<SweepRecord>, seed: u64) -> Result<SweepResult> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.i2_proxy.value)).collect();
    let (i2_fit, i2_fit_error) = match fit_power_law(&points, seed) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rates: Vec<f64> = records.iter().map(|r| r.collision_rate.value).collect();
    let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let ks: Vec<f64> = records.iter().map(|r| r.k_sup.value).collect();
    let k_sup_spread =
        ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let afc_non_increasing = records.windows(2).all(|w| {
        let (a, b) = (w[0].afc.squared, w[1].afc.squared);
        b.value <= a.value + 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt()
    });
    let free_fraction_increasing = records.windows(2).all(|w| {
        let (a, b) = (w[0].free_fraction, w[1].free_fraction);
        // the fraction sits at 1 up to rounding when overlaps never occur
        b.value >= a.value - 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt() - 1e-12
    });
    Ok(SweepResult {
        c,
        rate_variation: spread(&rates) / mean,
        k_sup_spread,
        afc_non_increasing,
        free_fraction_increasing,
        i2_fit,
        i2_fit_error,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub n: usize,
    /// (a) free-streaming residual norm and its time-derivative part.
    pub residual_norm: Estimate,
    pub residual_dt_norm: Estimate,
    pub residual_consistent_with_zero: bool,
    pub residual_dt_consistent_with_zero: bool,
    /// (b) collision-term magnitude and its loss scale.
    pub collision_rms: Estimate,
    pub collision_loss_scale: f64,
    pub collision_max_z: f64,
    /// (c) I2-proxy.
    pub i2_proxy: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub rows: Vec<TermRow>,
    pub i2_beta: Option<PowerLawFit>,
    pub residual_beta: Option<PowerLawFit>,
    pub collision_beta: Option<PowerLawFit>,
}

pub fn compare_terms(result: &SweepResult, seed: u64) -> TermReport {
    let rows: Vec<TermRow> = result
        .records
        .iter()
        .map(|r| {
            let (rn, rdt, rc, rdc) = match &r.residual {
                Some(x) => (x.norm, x.dt_norm, x.consistent_with_zero(3.0), x.dt_consistent_with_zero(3.0)),
                None => (Estimate::new(f64::NAN, f64::NAN), Estimate::new(f64::NAN, f64::NAN), false, false),
            };
            TermRow {
                n: r.n,
                residual_norm: rn,
                residual_dt_norm: rdt,
                residual_consistent_with_zero: rc,
                residual_dt_consistent_with_zero: rdc,
                collision_rms: r.collision.rms,
                collision_loss_scale: r.collision.loss_scale,
                collision_max_z: r.collision.max_z,
                i2_proxy: r.i2_proxy,
            }
        })
        .collect();
    let fit = |f: fn(&TermRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, f(r))).collect();
        fit_power_law(&pts, seed).ok()
    };
    TermReport {
        i2_beta: result.i2_fit,
        residual_beta: fit(|r| r.residual_norm.value),
        collision_beta: fit(|r| r.collision_rms.value),
        rows,
    }
}

/// Per-class contact values across the sweep, for plotting.
pub fn contact_table(result: &SweepResult) -> Vec<(usize, usize, Estimate, Estimate, Estimate)> {
    let mut out = Vec::new();
    for r in &result.records {
        for s in 0..r.contact.shell.len() {
            out.push((r.n, s, r.contact.shell[s], r.contact.flux[s], r.k_class[s]));
        }
    }
    out
}

/// Jackknife of the radial-speed f1 density bins over batches.
pub fn f1_density(run: &NRun) -> Vec<Estimate> {
    let flats: Vec<Vec<f64>> = run
        .batches
        .iter()
        .map(|b| {
            let mut v = b.f1.mass.clone();
            v.push(b.f1.snapshots as f64);
            v
        })
        .collect();
    let total = sum_arrays(&flats);
    let h = &run.batches[0].f1;
    let nbins = h.len();
    jackknife_vec(flats.len(), |skip| {
        let f = loo_sum(&flats, &total, skip);
        let s = f[nbins];
        (0..nbins).map(|k| f[k] / (s * h.bin_volume(k / h.bins_b(), k % h.bins_b()))).collect()
    })
}
