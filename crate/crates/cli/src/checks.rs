//! Property checks shared by `hsbg verify` and the acceptance harness.

use hsbg::bgsweep::report::{I2_BETA_RANGE, K_SUP_FACTOR, RATE_PLATEAU};
use hsbg::bgsweep::{EstimatorConfig, EstimatorSet, SweepResult};
use hsbg::codec::Encoder;
use hsbg::densities::{boltzmann_collision_integral, default_probes, estimate_i1_i2, ContinuationRule, Maxwellian};
use hsbg::dynamics::{reverse_velocities, EngineConfig, EventLog, Simulation};
use hsbg::ensemble::{derive_seed, initial_state, replica_rng, run_ensemble, run_replica, EnsembleSpec};
use hsbg::{DomainSpec, ModelParams, ParamsBuilder, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct CheckContext {
    pub seed: u64,
    pub workers: usize,
    pub engine: EngineConfig,
}

impl Default for CheckContext {
    fn default() -> Self {
        CheckContext { seed: 1, workers: 0, engine: EngineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: &'static str,
    /// Acceptance criterion the check covers, 0 for supporting checks.
    pub criterion: u32,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(id: &'static str, criterion: u32, passed: bool, value: f64, threshold: f64, detail: String) -> Self {
        CheckOutcome { id, criterion, passed, value, threshold, detail }
    }

    fn error(id: &'static str, criterion: u32, threshold: f64, e: impl std::fmt::Display) -> Self {
        let msg = e.to_string();
        let first = msg.lines().next().unwrap_or_default().to_string();
        Self::new(id, criterion, false, f64::NAN, threshold, format!("error: {first}"))
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

/// Unit ball with the diameter giving average volume fraction `eta`.
pub fn params_at_eta(n: usize, eta: f64) -> Result<(ModelParams, DomainSpec)> {
    let domain = DomainSpec::new(1.0)?;
    let d = (eta * domain.volume() * 3.0 / (4.0 * PI * n as f64)).cbrt();
    Ok((ParamsBuilder::new(n, domain).diameter(d).build()?, domain))
}

fn spec(
    ctx: &CheckContext,
    params: &ModelParams,
    domain: DomainSpec,
    replicas: usize,
    horizon: f64,
    salt: u64,
) -> EnsembleSpec {
    let mut s = EnsembleSpec::new(*params, domain, replicas, horizon, derive_seed(ctx.seed, salt));
    s.engine = ctx.engine;
    s.workers = ctx.workers;
    s
}

/// One long run: per-event and cumulative conservation,
/// and the smallest pair gap and wall clearance seen at any event.
pub fn conservation_and_overlap(ctx: &CheckContext) -> Vec<CheckOutcome> {
    const EVENTS: u64 = 100_000;
    let run = || -> Result<Simulation> {
        let (p, dom) = params_at_eta(216, 0.05)?;
        let s = spec(ctx, &p, dom, 1, 0.0, 1);
        let mut sim = Simulation::new(&initial_state(&s, 0)?, &p, &dom, ctx.engine)?;
        while sim.pair_events() < EVENTS {
            sim.run_events(10_000, &mut ())?;
        }
        Ok(sim)
    };
    match run() {
        Err(e) => {
            vec![CheckOutcome::error("conservation", 1, 1e-12, &e), CheckOutcome::error("no_overlap", 2, -1e-9, &e)]
        }
        Ok(sim) => {
            let g = sim.diagnostics();
            let per_event = g.max_momentum_drift.max(g.max_pair_energy_drift).max(g.max_wall_energy_drift);
            let cumulative = sim.energy_drift();
            let gap = g.min_contact_gap.min(g.min_wall_clearance);
            vec![
                CheckOutcome::new(
                    "conservation",
                    1,
                    per_event <= 1e-12 && cumulative <= 1e-9,
                    per_event,
                    1e-12,
                    format!(
                        "{} pair events; momentum {:.2e}, pair energy {:.2e}, wall energy {:.2e}, cumulative energy {:.2e} (limit 1e-9)",
                        sim.pair_events(),
                        g.max_momentum_drift,
                        g.max_pair_energy_drift,
                        g.max_wall_energy_drift,
                        cumulative
                    ),
                ),
                CheckOutcome::new(
                    "no_overlap",
                    2,
                    gap >= -1e-9,
                    gap,
                    -1e-9,
                    format!(
                        "min pair gap {:.3e} d, min wall clearance {:.3e} d",
                        g.min_contact_gap, g.min_wall_clearance
                    ),
                ),
            ]
        }
    }
}

/// 50 events forward, velocities reversed, same duration back.
pub fn reversibility(ctx: &CheckContext) -> CheckOutcome {
    let run = || -> Result<f64> {
        let (p, dom) = params_at_eta(27, 0.05)?;
        let s = spec(ctx, &p, dom, 1, 0.0, 3);
        let start = initial_state(&s, 0)?;
        let mut fwd = Simulation::new(&start, &p, &dom, ctx.engine)?;
        fwd.run_events(50, &mut ())?;
        let t1 = fwd.time();
        let mut back_state = reverse_velocities(&fwd.snapshot());
        back_state.time = 0.0;
        let mut back = Simulation::new(&back_state, &p, &dom, ctx.engine)?;
        back.advance_to(t1, &mut ())?;
        let end = back.snapshot();
        Ok(start
            .particles
            .iter()
            .zip(&end.particles)
            .map(|(a, b)| (a.position - b.position).norm())
            .fold(0.0, f64::max))
    };
    match run() {
        Ok(err) => {
            CheckOutcome::new("reversibility", 3, err <= 1e-6, err, 1e-6, format!("max position error {err:.3e}"))
        }
        Err(e) => CheckOutcome::error("reversibility", 3, 1e-6, e),
    }
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Speeds at t = 0 against speeds after 10 mean collision
/// times, pooled over a few replicas.
pub fn equilibrium_ks(ctx: &CheckContext) -> CheckOutcome {
    const ALPHA: f64 = 0.01;
    let run = || -> Result<(f64, f64, usize)> {
        let (p, dom) = params_at_eta(500, 0.02)?;
        let s = spec(ctx, &p, dom, 4, 10.0 * p.mean_collision_time(), 4);
        let (mut before, mut after) = (Vec::new(), Vec::new());
        for r in 0..s.replicas {
            let st = initial_state(&s, r)?;
            before.extend(st.particles.iter().map(|q| q.velocity.norm()));
            let mut sim = Simulation::new(&st, &p, &dom, ctx.engine)?;
            sim.advance_to(s.horizon, &mut ())?;
            after.extend(sim.snapshot().particles.iter().map(|q| q.velocity.norm()));
        }
        let (d, pv) = ks_two_sample(&before, &after);
        Ok((d, pv, before.len()))
    };
    match run() {
        Ok((d, pv, n)) => CheckOutcome::new(
            "equilibrium_ks",
            4,
            pv >= ALPHA,
            pv,
            ALPHA,
            format!("KS D = {d:.4} over {n} speeds per sample, p = {pv:.3}"),
        ),
        Err(e) => CheckOutcome::error("equilibrium_ks", 4, ALPHA, e),
    }
}

/// Measured per-particle collision rate against the dilute
/// kinetic-theory rate.
pub fn dilute_rate(ctx: &CheckContext) -> CheckOutcome {
    const TOL: f64 = 0.05;
    let run = || -> Result<(f64, f64, f64)> {
        let (p, dom) = params_at_eta(1000, 0.005)?;
        let tau = p.mean_collision_time();
        let mut s = spec(ctx, &p, dom, 8, 10.0 * tau, 5);
        s.burn_in = tau;
        let out = run_ensemble(&s, |_| ())?;
        Ok((out.mean_collision_rate(), p.dilute_collision_rate(), p.eta_bar()))
    };
    match run() {
        Ok((rate, oracle, eta)) => {
            let dev = (rate / oracle - 1.0).abs();
            CheckOutcome::new(
                "dilute_rate",
                5,
                dev < TOL,
                dev,
                TOL,
                format!("eta_bar {eta:.4}: rate {rate:.5} vs dilute oracle {oracle:.5}"),
            )
        }
        Err(e) => CheckOutcome::error("dilute_rate", 5, TOL, e),
    }
}

/// Estimator settings of the representation-identity check.
pub fn representation_config() -> EstimatorConfig {
    EstimatorConfig { snapshots: 64, residual_times: 3, ..EstimatorConfig::default() }
}

/// `f1 = I1 - I2` bin-wise within 3 standard errors under the
/// contact-constant continuation.
pub fn representation_identity(ctx: &CheckContext) -> CheckOutcome {
    const K: f64 = 3.0;
    let run = || -> Result<(f64, usize, usize)> {
        let (p, dom) = params_at_eta(500, 0.02)?;
        let tau = p.mean_collision_time();
        let cfg = representation_config();
        let horizon = 10.0 * tau;
        let mut s = spec(ctx, &p, dom, 32, horizon, 8);
        s.burn_in = tau;
        s.sample_times = cfg.sample_times(horizon);
        let out = run_ensemble(&s, |_| EstimatorSet::for_replica(&cfg, &p, &dom, horizon))?;
        let f1: Vec<_> = out.batches.iter().map(|b| &b.f1).collect();
        let contact: Vec<_> = out.batches.iter().map(|b| &b.contact).collect();
        let field = estimate_i1_i2(&f1, &contact, ContinuationRule::ContactConstant, &p)?;
        let worst = field.defect.iter().filter(|e| e.value != 0.0).map(|e| e.value.abs() / e.se).fold(0.0, f64::max);
        let populated = field.f1.iter().filter(|e| e.value > 0.0).count();
        Ok((worst, field.violations(K).len(), populated))
    };
    match run() {
        Ok((worst, bad, populated)) => CheckOutcome::new(
            "representation_identity",
            8,
            bad == 0,
            worst,
            K,
            format!(
                "{bad} of {populated} populated bins outside {K} standard errors; largest |defect| / se = {worst:.2}"
            ),
        ),
        Err(e) => CheckOutcome::error("representation_identity", 8, K, e),
    }
}

/// The collision integral of a Maxwellian vanishes at every
/// probe velocity within 3 standard errors.
pub fn collision_null(ctx: &CheckContext) -> CheckOutcome {
    const K: f64 = 3.0;
    const PROBES: usize = 8;
    let phi = Maxwellian::new(1.0);
    let mut rng = replica_rng(ctx.seed, 10);
    let mut worst = 0.0f64;
    for v in default_probes(PROBES, 1.0) {
        match boltzmann_collision_integral(&phi, 1.0, v, 50_000, &mut rng) {
            Ok(ci) => worst = worst.max(ci.value.value.abs() / ci.value.se),
            Err(e) => return CheckOutcome::error("collision_null", 10, K, e),
        }
    }
    CheckOutcome::new(
        "collision_null",
        10,
        worst <= K,
        worst,
        K,
        format!("largest |C(v)| / se over {PROBES} probes = {worst:.2}"),
    )
}

/// Identical seeds give byte-identical event logs, and ensemble
/// accumulators do not depend on the worker count.
pub fn determinism(ctx: &CheckContext) -> CheckOutcome {
    let run = || -> Result<(bool, bool)> {
        let (p, dom) = params_at_eta(27, 0.05)?;
        let s = spec(ctx, &p, dom, 1, 5.0 * p.mean_collision_time(), 12);
        let log_bytes = || -> Result<Vec<u8>> {
            let mut log = EventLog::new();
            run_replica(&s, 0, &mut log)?;
            let mut buf = Vec::new();
            log.write_binary(&mut buf)?;
            Ok(buf)
        };
        let logs_equal = log_bytes()? == log_bytes()?;

        let cfg = EstimatorConfig { snapshots: 4, residual_times: 3, ..EstimatorConfig::default() };
        let mut es = spec(ctx, &p, dom, 6, s.horizon, 13);
        es.sample_times = cfg.sample_times(es.horizon);
        let encoded = |workers: usize| -> Result<Vec<u8>> {
            let mut e2 = es.clone();
            e2.workers = workers;
            let out = run_ensemble(&e2, |_| EstimatorSet::for_replica(&cfg, &p, &dom, e2.horizon))?;
            let mut enc = Encoder::new();
            for b in &out.batches {
                b.encode(&mut enc);
            }
            Ok(enc.finish())
        };
        let acc_equal = encoded(1)? == encoded(2)?;
        Ok((logs_equal, acc_equal))
    };
    match run() {
        Ok((logs, acc)) => CheckOutcome::new(
            "determinism",
            12,
            logs && acc,
            if logs && acc { 0.0 } else { 1.0 },
            0.0,
            format!("event logs identical: {logs}; accumulators identical across worker counts: {acc}"),
        ),
        Err(e) => CheckOutcome::error("determinism", 12, 0.0, e),
    }
}

/// Every check run by `hsbg verify`, in a fixed order.
pub fn verify_suite(ctx: &CheckContext) -> Vec<CheckOutcome> {
    let mut out = conservation_and_overlap(ctx);
    out.push(reversibility(ctx));
    out.push(equilibrium_ks(ctx));
    out.push(dilute_rate(ctx));
    out.push(representation_identity(ctx));
    out.push(collision_null(ctx));
    out.push(determinism(ctx));
    out
}

/// Scaling plateau, I2 decay, majorization and factorization trend of an
/// analysed sweep.
pub fn sweep_checks(result: &SweepResult) -> Vec<CheckOutcome> {
    let exact = result.records.iter().all(|r| r.scaling_residual.abs() <= 8.0 * f64::EPSILON * r.c * r.c);
    let worst_residual = result.records.iter().map(|r| r.scaling_residual.abs()).fold(0.0, f64::max);
    let mut out = vec![CheckOutcome::new(
        "bg_plateau",
        6,
        exact && result.rate_variation < RATE_PLATEAU,
        result.rate_variation,
        RATE_PLATEAU,
        format!(
            "max |N d^2 - c^2| = {worst_residual:.1e}; rates {}",
            result.records.iter().map(|r| format!("{:.4}", r.collision_rate.value)).collect::<Vec<_>>().join(" ")
        ),
    )];
    out.push(match &result.i2_fit {
        Some(f) => CheckOutcome::new(
            "i2_decay",
            7,
            (I2_BETA_RANGE.0..=I2_BETA_RANGE.1).contains(&f.beta),
            f.beta,
            -0.5,
            format!("beta {:.3}, 95% CI [{:.3}, {:.3}], R^2 {:.4}", f.beta, f.ci.0, f.ci.1, f.r_squared),
        ),
        None => CheckOutcome::new(
            "i2_decay",
            7,
            false,
            f64::NAN,
            -0.5,
            result.i2_fit_error.clone().unwrap_or_else(|| "no fit".into()),
        ),
    });
    let all_majorized = result.records.iter().all(|r| r.majorized);
    out.push(CheckOutcome::new(
        "majorization",
        9,
        all_majorized && result.k_sup_spread <= K_SUP_FACTOR,
        result.k_sup_spread,
        K_SUP_FACTOR,
        format!(
            "bounds hold: {all_majorized}; k_sup {}",
            result.records.iter().map(|r| format!("{:.3}", r.k_sup.value)).collect::<Vec<_>>().join(" ")
        ),
    ));
    out.push(CheckOutcome::new(
        "afc_trend",
        11,
        result.afc_non_increasing,
        result.records.last().map_or(f64::NAN, |r| r.afc.squared.value),
        0.0,
        format!(
            "D^2 {}",
            result
                .records
                .iter()
                .map(|r| format!("{:.3e}+-{:.1e}", r.afc.squared.value, r.afc.squared.se))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    ));
    out
}

/// Plain-text table of check outcomes.
pub fn format_table(outcomes: &[CheckOutcome]) -> String {
    let mut s =
        format!("{:<26} {:>9} {:>6} {:>12} {:>12}  detail\n", "check", "criterion", "status", "value", "threshold");
    for o in outcomes {
        s += &format!(
            "{:<26} {:>9} {:>6} {:>12.4e} {:>12.4e}  {}\n",
            o.id,
            o.criterion,
            o.status(),
            o.value,
            o.threshold,
            o.detail
        );
    }
    s
}

/// CSV with one row per check; identical outcomes give identical bytes.
pub fn write_results_csv(path: &std::path::Path, outcomes: &[CheckOutcome]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "criterion", "status", "value", "threshold", "detail"])?;
    for o in outcomes {
        w.write_record([
            o.id.to_string(),
            o.criterion.to_string(),
            o.status().to_string(),
            format!("{:e}", o.value),
            format!("{:e}", o.threshold),
            o.detail.clone(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_table_values() {
        // P(K > 1) and P(K > 1.36) from standard tables.
        assert!((kolmogorov_survival(1.0) - 0.26999967).abs() < 1e-6);
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn ks_statistic_by_hand() {
        let (d, _) = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5, 4.5, 5.5]);
        // after 2.0: 0.5 vs 0, after 3.0: 0.75 vs 0.25
        assert!((d - 0.5).abs() < 1e-15);
        let (d0, p0) = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d0, 0.0);
        assert_eq!(p0, 1.0);
    }

    #[test]
    fn collision_null_passes_on_pristine_build() {
        let o = collision_null(&CheckContext::default());
        assert!(o.passed, "{o:?}");
    }

    #[test]
    fn reversibility_passes_and_flipped_law_is_detected() {
        let ctx = CheckContext::default();
        assert!(reversibility(&ctx).passed);
        let bad = CheckContext {
            engine: EngineConfig { law: hsbg::dynamics::CollisionLaw::Flipped, ..Default::default() },
            ..ctx
        };
        let c = conservation_and_overlap(&bad);
        assert!(!c[0].passed, "{:?}", c[0]);
    }
}
