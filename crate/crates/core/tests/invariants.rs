//! Property tests: Boltzmann-Grad scaling of the parameters, invariance
//! under particle relabelling, and conservation over random systems.

use hsbg::dynamics::{EngineConfig, EventLog, LoggedKind, Simulation};
use hsbg::ensemble::{initial_state, EnsembleSpec};
use hsbg::{make_params, DomainSpec, ParamsBuilder, SystemState};
use proptest::prelude::*;

fn small_system(n: usize, eta: f64, seed: u64) -> (SystemState, hsbg::ModelParams, DomainSpec) {
    let domain = DomainSpec::new(1.0).unwrap();
    let d = (eta * domain.volume() * 3.0 / (4.0 * std::f64::consts::PI * n as f64)).cbrt();
    let params = ParamsBuilder::new(n, domain).diameter(d).build().unwrap();
    let spec = EnsembleSpec::new(params, domain, 1, 1.0, seed);
    (initial_state(&spec, 0).unwrap(), params, domain)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn boltzmann_grad_scaling_is_exact(n in 8usize..200_000, c in 0.01..1.5f64) {
        let domain = DomainSpec::new(1.0).unwrap();
        let p = make_params(n, c, &domain, 1.0);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        prop_assert!((n as f64 * p.d * p.d - c * c).abs() <= 8.0 * f64::EPSILON * c * c);
        let q = make_params(2 * n, c, &domain, 1.0).unwrap();
        prop_assert!(q.eta_bar() < p.eta_bar());
        // the dilute rate depends on N only through N d^2
        prop_assert!((q.dilute_collision_rate() / p.dilute_collision_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relabelling_permutes_the_trajectory(seed in 0u64..1000, shift in 1usize..11) {
        let (state, params, domain) = small_system(12, 0.08, seed);
        let n = state.particles.len();
        let perm: Vec<usize> = (0..n).map(|k| (k * 5 + shift) % n).collect();
        let mut permuted = state.clone();
        for (k, &src) in perm.iter().enumerate() {
            permuted.particles[k] = state.particles[src];
        }
        let run = |s: &SystemState| {
            let mut sim = Simulation::new(s, &params, &domain, EngineConfig::default()).unwrap();
            let mut log = EventLog::new();
            sim.run_events(60, &mut log).unwrap();
            (log, sim.snapshot())
        };
        let (a, sa) = run(&state);
        let (b, sb) = run(&permuted);
        for (x, y) in a.records.iter().zip(&b.records) {
            prop_assert!((x.time - y.time).abs() <= 1e-9 * (1.0 + x.time));
            prop_assert_eq!(x.kind, y.kind);
            let ids = |r: &hsbg::dynamics::EventRecord, map: &dyn Fn(u32) -> usize| {
                let mut v = vec![map(r.i)];
                if r.kind == LoggedKind::Pair {
                    v.push(map(r.j.unwrap()));
                }
                v.sort();
                v
            };
            prop_assert_eq!(ids(x, &|i| i as usize), ids(y, &|i| perm[i as usize]));
        }
        for (k, &src) in perm.iter().enumerate() {
            prop_assert!((sb.particles[k].position - sa.particles[src].position).norm() < 1e-8);
        }
    }

    #[test]
    fn conservation_over_random_systems(n in 4usize..40, eta in 0.005..0.15f64, seed in 0u64..10_000) {
        let (state, params, domain) = small_system(n, eta, seed);
        let mut sim = Simulation::new(&state, &params, &domain, EngineConfig::default()).unwrap();
        sim.run_events(300, &mut ()).unwrap();
        let g = sim.diagnostics();
        prop_assert!(g.max_momentum_drift <= 1e-12);
        prop_assert!(g.max_pair_energy_drift <= 1e-12 && g.max_wall_energy_drift <= 1e-12);
        prop_assert!(sim.energy_drift() <= 1e-10);
        prop_assert!(g.min_contact_gap >= -1e-9 && g.min_wall_clearance >= -1e-9);
    }
}
