//! Initial-state sampling and replica execution.

use crate::dynamics::{EngineConfig, Observer, Simulation};
use crate::error::{Error, Result};
use crate::model::{DomainSpec, ModelParams, ParticleState, SystemState};
use crate::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_BATCHES: usize = 32;
const CHUNK: usize = 256;

/// splitmix64 finalizer; a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const REPLICA_SALT: u64 = 0x6A09_E667_F3BC_C908;

/// Seed for replica `r`: `splitmix64(base ^ splitmix64(r + SALT))`. A
/// composition of bijections, hence injective in `r`.
pub fn derive_seed(base: u64, replica: u64) -> u64 {
    splitmix64(base ^ splitmix64(replica.wrapping_add(REPLICA_SALT)))
}

pub fn replica_rng(base: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, replica))
}

/// Independent zero-mean Gaussian components of variance `T` (unit mass).
pub fn sample_maxwellian_velocities<R: Rng + ?Sized>(n: usize, temperature: f64, rng: &mut R) -> Result<Vec<Vec3>> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParam(format!("temperature must be positive, got {temperature}")));
    }
    let normal = Normal::new(0.0, temperature.sqrt()).map_err(|e| Error::Sampling(e.to_string()))?;
    Ok((0..n).map(|_| Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingOptions {
    pub retry_cap: u32,
    pub max_restarts: u32,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { retry_cap: 10_000, max_restarts: 20 }
    }
}

/// Uniform point in the ball of radius `r`.
pub fn uniform_in_ball<R: Rng + ?Sized>(r: f64, rng: &mut R) -> Vec3 {
    loop {
        let p = Vec3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        if p.norm_sq() <= 1.0 {
            return p * r;
        }
    }
}

/// Insertion grid for sequential rejection sampling.
struct InsertGrid {
    lo: f64,
    edge: f64,
    per_axis: usize,
    cells: Vec<Vec<u32>>,
}

impl InsertGrid {
    fn new(half: f64, d: f64) -> Self {
        let per_axis = ((2.0 * half / d).floor() as usize).clamp(1, 96);
        InsertGrid { lo: -half, edge: 2.0 * half / per_axis as f64, per_axis, cells: vec![Vec::new(); per_axis.pow(3)] }
    }

    fn coord(&self, x: f64) -> usize {
        (((x - self.lo) / self.edge).floor().max(0.0) as usize).min(self.per_axis - 1)
    }

    fn clear(&mut self) {
        self.cells.iter_mut().for_each(Vec::clear);
    }

    fn fits(&self, p: Vec3, pts: &[Vec3], d: f64) -> bool {
        let c = [self.coord(p[0]), self.coord(p[1]), self.coord(p[2])];
        let span = |k: usize| c[k].saturating_sub(1)..=(c[k] + 1).min(self.per_axis - 1);
        for x in span(0) {
            for y in span(1) {
                for z in span(2) {
                    for &j in &self.cells[(x * self.per_axis + y) * self.per_axis + z] {
                        if (p - pts[j as usize]).norm_sq() < d * d {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: Vec3, idx: usize) {
        let c = [self.coord(p[0]), self.coord(p[1]), self.coord(p[2])];
        self.cells[(c[0] * self.per_axis + c[1]) * self.per_axis + c[2]].push(idx as u32);
    }
}

/// Sequential insertion of centres uniform over `|r| <= R_o - d/2`, each
/// retried up to `retry_cap` times; the whole configuration restarts on
/// failure, at most `max_restarts` times.
pub fn sample_admissible_positions<R: Rng + ?Sized>(
    params: &ModelParams,
    domain: &DomainSpec,
    opts: &SamplingOptions,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if params.eta_bar() >= params.packing_cap {
        return Err(Error::Packing { eta_bar: params.eta_bar(), cap: params.packing_cap });
    }
    let d = params.d;
    let rc = domain.contact_radius(d);
    let mut grid = InsertGrid::new(domain.wall_radius(), d);
    let mut pts = Vec::with_capacity(params.n);
    'restart: for _ in 0..=opts.max_restarts {
        grid.clear();
        pts.clear();
        for i in 0..params.n {
            let mut placed = false;
            for _ in 0..=opts.retry_cap {
                let p = uniform_in_ball(rc, rng);
                if grid.fits(p, &pts, d) {
                    grid.insert(p, i);
                    pts.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        return Ok(pts);
    }
    Err(Error::Sampling(format!(
        "no admissible configuration of {} spheres after {} restarts",
        params.n, opts.max_restarts
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub domain: DomainSpec,
    pub replicas: usize,
    pub horizon: f64,
    pub base_seed: u64,
    /// Observer sampling times, sorted, within `[0, horizon]`.
    pub sample_times: Vec<f64>,
    /// Length of event-driven evolution applied to the sampled state before
    /// the clock is reset to zero.
    pub burn_in: f64,
    #[serde(skip)]
    pub engine: EngineConfig,
    pub sampling: SamplingOptions,
    /// Worker threads; 0 means the rayon default.
    pub workers: usize,
}

impl EnsembleSpec {
    pub fn new(params: ModelParams, domain: DomainSpec, replicas: usize, horizon: f64, base_seed: u64) -> Self {
        EnsembleSpec {
            params,
            domain,
            replicas,
            horizon,
            base_seed,
            sample_times: Vec::new(),
            burn_in: 0.0,
            engine: EngineConfig::default(),
            sampling: SamplingOptions::default(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidParam("at least one replica is required".into()));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::InvalidParam(format!("horizon must be non-negative, got {}", self.horizon)));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(Error::InvalidParam(format!("burn-in must be non-negative, got {}", self.burn_in)));
        }
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParam("sampling times must be sorted".into()));
        }
        if self.sample_times.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(Error::InvalidParam("sampling times must lie within [0, horizon]".into()));
        }
        Ok(())
    }

    /// Number of accumulator batches, `min(M, 32)`.
    pub fn batches(&self) -> usize {
        self.replicas.min(MAX_BATCHES)
    }

    /// Batch receiving replica `r`; contiguous blocks in replica order.
    pub fn batch_of(&self, r: usize) -> usize {
        r * self.batches() / self.replicas
    }
}

/// Initial state of replica `r`: admissible uniform positions, Maxwellian
/// velocities, then the configured burn-in.
pub fn initial_state(spec: &EnsembleSpec, replica: usize) -> Result<SystemState> {
    let mut rng = replica_rng(spec.base_seed, replica as u64);
    let positions = sample_admissible_positions(&spec.params, &spec.domain, &spec.sampling, &mut rng)?;
    let velocities = sample_maxwellian_velocities(spec.params.n, spec.params.temperature, &mut rng)?;
    let particles = positions.into_iter().zip(velocities).map(|(r, v)| ParticleState::new(r, v)).collect();
    let mut state = SystemState::new(particles, 0.0);
    if spec.burn_in > 0.0 {
        let mut sim = Simulation::new(&state, &spec.params, &spec.domain, spec.engine)?;
        sim.advance_to(spec.burn_in, &mut ())?;
        state = sim.snapshot();
        state.time = 0.0;
        state.collision_counter.iter_mut().for_each(|c| *c = 0);
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: usize,
    pub seed: u64,
    pub pair_events: u64,
    pub wall_events: u64,
    /// Pair collisions per particle per unit time, `2 P / (N T)`.
    pub collision_rate: f64,
    pub energy_drift: f64,
    pub max_momentum_drift: f64,
    pub min_contact_gap: f64,
    pub min_wall_clearance: f64,
}

/// An observer whose partial results can be combined.
pub trait Accumulator: Observer + Send {
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

impl Accumulator for () {
    fn merge(&mut self, _: ()) {}
}

pub struct EnsembleOutcome<A> {
    pub replicas: Vec<ReplicaResult>,
    /// One accumulator per batch, each the in-order merge of its replicas.
    pub batches: Vec<A>,
}

impl<A> EnsembleOutcome<A> {
    pub fn mean_collision_rate(&self) -> f64 {
        self.replicas.iter().map(|r| r.collision_rate).sum::<f64>() / self.replicas.len() as f64
    }

    pub fn total_pair_events(&self) -> u64 {
        self.replicas.iter().map(|r| r.pair_events).sum()
    }
}

impl<A: Accumulator + Clone> EnsembleOutcome<A> {
    /// All batches merged in order.
    pub fn merged(&self) -> Option<A> {
        let mut it = self.batches.iter().cloned();
        let mut acc = it.next()?;
        for b in it {
            acc.merge(b);
        }
        Some(acc)
    }
}

/// Runs one replica to the horizon, feeding `acc`.
pub fn run_replica<A: Observer>(spec: &EnsembleSpec, replica: usize, acc: &mut A) -> Result<ReplicaResult> {
    let state = initial_state(spec, replica)?;
    let mut sim = Simulation::new(&state, &spec.params, &spec.domain, spec.engine)?;
    sim.run(spec.horizon, &spec.sample_times, acc)?;
    let diag = sim.diagnostics();
    let n = spec.params.n as f64;
    Ok(ReplicaResult {
        replica,
        seed: derive_seed(spec.base_seed, replica as u64),
        pair_events: sim.pair_events(),
        wall_events: sim.wall_events(),
        collision_rate: if spec.horizon > 0.0 { 2.0 * sim.pair_events() as f64 / (n * spec.horizon) } else { 0.0 },
        energy_drift: sim.energy_drift(),
        max_momentum_drift: diag.max_momentum_drift,
        min_contact_gap: diag.min_contact_gap,
        min_wall_clearance: diag.min_wall_clearance,
    })
}

/// Runs all replicas, concurrently up to `spec.workers`, and folds their
/// accumulators into batches strictly in replica-index order. Replicas are
/// scheduled in chunks so that at most `CHUNK` unmerged accumulators exist.
pub fn run_ensemble<A, F>(spec: &EnsembleSpec, make: F) -> Result<EnsembleOutcome<A>>
where
    A: Accumulator,
    F: Fn(usize) -> A + Sync,
{
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let nb = spec.batches();
    let mut replicas = Vec::with_capacity(spec.replicas);
    let mut folded: Vec<Option<A>> = (0..nb).map(|_| None).collect();
    let all: Vec<usize> = (0..spec.replicas).collect();
    for chunk in all.chunks(CHUNK) {
        let results: Vec<Result<(ReplicaResult, A)>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&r| {
                    let mut acc = make(r);
                    run_replica(spec, r, &mut acc)
                        .map(|res| (res, acc))
                        .map_err(|e| Error::Replica { replica: r, source: Box::new(e) })
                })
                .collect()
        });
        for (&r, res) in chunk.iter().zip(results) {
            let (rr, acc) = res?;
            replicas.push(rr);
            match &mut folded[spec.batch_of(r)] {
                slot @ None => *slot = Some(acc),
                Some(f) => f.merge(acc),
            }
        }
    }
    let batches = folded.into_iter().map(|b| b.expect("every batch has at least one replica")).collect();
    Ok(EnsembleOutcome { replicas, batches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_admissible, ParamsBuilder};

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for r in 0..10_000 {
            assert!(seen.insert(derive_seed(42, r)));
        }
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn maxwellian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let v = sample_maxwellian_velocities(n, 1.0, &mut rng).unwrap();
        for k in 0..3 {
            let mean = v.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // se(mean) = 1/sqrt(n), se(var) = sqrt(2/(n-1))
            assert!(mean.abs() < 4.0 / (n as f64).sqrt());
            assert!((var - 1.0).abs() < 4.0 * (2.0 / (n - 1) as f64).sqrt());
        }
    }

    #[test]
    fn cold_maxwellian_and_determinism() {
        let a = sample_maxwellian_velocities(1000, 1e-12, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(a.iter().all(|v| v.norm() <= 1e-5));
        let b = sample_maxwellian_velocities(1000, 1e-12, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert!(sample_maxwellian_velocities(3, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn admissible_sampling() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(216, dom).diameter(0.0614).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = sample_admissible_positions(&p, &dom, &SamplingOptions::default(), &mut rng).unwrap();
        let s = SystemState::new(pts.iter().map(|&r| ParticleState::new(r, Vec3::ZERO)).collect(), 0.0);
        assert!(is_admissible(&s, &p, &dom));
    }

    #[test]
    fn batch_assignment_is_contiguous() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(1, dom).diameter(0.1).build().unwrap();
        let spec = EnsembleSpec::new(p, dom, 100, 1.0, 0);
        assert_eq!(spec.batches(), 32);
        let b: Vec<usize> = (0..100).map(|r| spec.batch_of(r)).collect();
        assert!(b.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        assert_eq!(b[99], 31);
        let spec = EnsembleSpec::new(p, dom, 5, 1.0, 0);
        assert_eq!((0..5).map(|r| spec.batch_of(r)).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn invalid_specs() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(1, dom).diameter(0.1).build().unwrap();
        let mut spec = EnsembleSpec::new(p, dom, 0, 1.0, 0);
        assert!(spec.validate().is_err());
        spec.replicas = 1;
        spec.sample_times = vec![0.5, 0.2];
        assert!(spec.validate().is_err());
        spec.sample_times = vec![0.5, 2.0];
        assert!(spec.validate().is_err());
    }
}
