//! Sweep plans under `d = c / sqrt(N)` and their validation.

use crate::ensemble::derive_seed;
use crate::error::{Error, Result};
use crate::model::{DomainSpec, ModelParams, ParamsBuilder, DEFAULT_PACKING_CAP};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub n: usize,
    /// Explicit diameter; must equal `c / sqrt(N)`. Derived when absent.
    pub d: Option<f64>,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub c: f64,
    pub entries: Vec<PlanEntry>,
    pub wall_radius: f64,
    pub temperature: f64,
    /// Horizon in mean collision times.
    pub horizon: f64,
    /// Burn-in in mean collision times.
    pub burn_in: f64,
    pub base_seed: u64,
    pub packing_cap: f64,
}

impl SweepPlan {
    /// Plan with replica counts `max(16, particle_samples / N)`.
    pub fn standard(c: f64, ns: &[usize], wall_radius: f64, particle_samples: usize) -> Self {
        SweepPlan {
            c,
            entries: ns
                .iter()
                .map(|&n| PlanEntry { n, d: None, replicas: default_replicas(n, particle_samples) })
                .collect(),
            wall_radius,
            temperature: 1.0,
            horizon: 4.0,
            burn_in: 1.0,
            base_seed: 1,
            packing_cap: DEFAULT_PACKING_CAP,
        }
    }
}

pub fn default_replicas(n: usize, particle_samples: usize) -> usize {
    (particle_samples / n.max(1)).max(16)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedEntry {
    pub n: usize,
    pub params: ModelParams,
    pub replicas: usize,
    /// Horizon and burn-in in time units.
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Expected pair collisions summed over replicas.
    pub predicted_events: f64,
    pub predicted_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedPlan {
    pub plan: SweepPlan,
    pub domain: DomainSpec,
    pub entries: Vec<CheckedEntry>,
}

impl CheckedPlan {
    pub fn predicted_seconds(&self) -> f64 {
        self.entries.iter().map(|e| e.predicted_seconds).sum()
    }
}

/// Single-core cost per predicted pair collision, including the wall and
/// cell-crossing events that accompany it. Crossings per collision grow as
/// the spheres shrink, which the empirical `N^(1/8) c^(-1.8)` factor tracks.
fn seconds_per_collision(n: usize, c: f64) -> f64 {
    8.3e-6 * (n as f64).powf(0.125) * c.powf(-1.8)
}

/// `N d^2 = c^2` to within a few units of rounding.
fn scaling_exact(n: usize, d: f64, c: f64) -> bool {
    let lhs = n as f64 * d * d;
    (lhs - c * c).abs() <= 8.0 * f64::EPSILON * c * c
}

pub fn validate_plan(plan: &SweepPlan) -> Result<CheckedPlan> {
    let plan_err = |entry: usize, reason: String| Error::Plan { entry, reason };
    if !(plan.c > 0.0 && plan.c.is_finite()) {
        return Err(plan_err(0, format!("c must be positive, got {}", plan.c)));
    }
    if plan.entries.is_empty() {
        return Err(plan_err(0, "empty N list".into()));
    }
    if !(plan.horizon > 0.0 && plan.burn_in >= 0.0) {
        return Err(plan_err(0, "horizon must be positive and burn-in non-negative".into()));
    }
    let domain = DomainSpec::new(plan.wall_radius).map_err(|e| plan_err(0, e.to_string()))?;
    let mut entries = Vec::with_capacity(plan.entries.len());
    let mut last_eta = f64::INFINITY;
    for (k, e) in plan.entries.iter().enumerate() {
        if e.replicas == 0 {
            return Err(plan_err(k, "replicas must be positive".into()));
        }
        let mut b = ParamsBuilder::new(e.n, domain).temperature(plan.temperature).packing_cap(plan.packing_cap);
        b = match e.d {
            None => b.boltzmann_grad(plan.c),
            Some(d) => {
                if !scaling_exact(e.n, d, plan.c) {
                    return Err(plan_err(k, format!("d = {d} violates N d^2 = c^2 (N d^2 = {})", e.n as f64 * d * d)));
                }
                b.diameter(d)
            }
        };
        let params = b.build().map_err(|err| plan_err(k, format!("make_params: {err}")))?;
        if !scaling_exact(params.n, params.d, plan.c) {
            return Err(plan_err(k, "N d^2 differs from c^2".into()));
        }
        let eta = params.eta_bar();
        if !(eta < last_eta) {
            return Err(plan_err(k, format!("eta_bar {eta:.4e} does not decrease along the plan")));
        }
        last_eta = eta;
        let tau = params.mean_collision_time();
        let horizon = plan.horizon * tau;
        let events = e.replicas as f64 * 0.5 * e.n as f64 * (plan.horizon + plan.burn_in);
        entries.push(CheckedEntry {
            n: e.n,
            replicas: e.replicas,
            horizon,
            burn_in: plan.burn_in * tau,
            seed: derive_seed(plan.base_seed, e.n as u64),
            predicted_events: events,
            predicted_seconds: events * seconds_per_collision(e.n, plan.c),
            params,
        });
    }
    Ok(CheckedPlan { plan: plan.clone(), domain, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(c: f64, ns: &[usize]) -> SweepPlan {
        SweepPlan::standard(c, ns, 1.0, 1000)
    }

    #[test]
    fn forced_arithmetic() {
        let p = validate_plan(&plan(1.0, &[100, 400])).unwrap();
        assert!((p.entries[0].params.d - 0.1).abs() < 1e-15);
        assert!((p.entries[1].params.d - 0.05).abs() < 1e-15);
        for e in &p.entries {
            assert!(scaling_exact(e.n, e.params.d, 1.0));
        }
        assert!(p.entries[1].params.eta_bar() < p.entries[0].params.eta_bar());
    }

    #[test]
    fn hand_edited_diameter_is_rejected() {
        let mut p = plan(1.0, &[100, 400]);
        p.entries[1].d = Some(0.051);
        assert!(matches!(validate_plan(&p), Err(Error::Plan { entry: 1, .. })));
        p.entries[1].d = Some(0.05);
        assert!(validate_plan(&p).is_ok());
    }

    #[test]
    fn dense_plan_cites_make_params() {
        // c = 3, N = 10: d ~ 0.95 in a unit ball
        let Err(Error::Plan { entry: 0, reason }) = validate_plan(&plan(3.0, &[10, 40])) else {
            panic!("expected plan error");
        };
        assert!(reason.contains("make_params"), "{reason}");
    }

    #[test]
    fn unordered_list_is_rejected() {
        assert!(matches!(validate_plan(&plan(0.5, &[500, 125])), Err(Error::Plan { entry: 1, .. })));
    }
}
