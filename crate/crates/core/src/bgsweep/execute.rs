//! Running a validated plan, one `N` at a time, with per-`N` checkpoints.

use super::estimators::{EstimatorConfig, EstimatorSet};
use super::plan::{CheckedEntry, CheckedPlan};
use crate::codec::{Decoder, Encoder, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
use crate::dynamics::EngineConfig;
use crate::ensemble::{run_ensemble, EnsembleSpec, ReplicaResult};
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub workers: usize,
    pub engine: EngineConfig,
    /// Directory for per-`N` checkpoints; existing matching checkpoints are
    /// loaded instead of recomputed.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop with `Error::Interrupted` once this many entries are complete.
    pub stop_after: Option<usize>,
    /// Checked between entries; when set the sweep stops with
    /// `Error::Interrupted`.
    pub cancel: Option<Arc<AtomicBool>>,
}

/// Raw accumulators of one `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NRun {
    pub entry: CheckedEntry,
    pub replicas: Vec<ReplicaResult>,
    pub batches: Vec<EstimatorSet>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepData {
    pub plan: CheckedPlan,
    pub config: EstimatorConfig,
    pub engine: EngineConfig,
    pub runs: Vec<NRun>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash identifying everything that determines the accumulators of an entry.
pub fn entry_fingerprint(entry: &CheckedEntry, cfg: &EstimatorConfig, engine: &EngineConfig) -> String {
    let mut h = Sha256::new();
    h.update(toml::to_string(entry).unwrap_or_default().as_bytes());
    h.update(toml::to_string(cfg).unwrap_or_default().as_bytes());
    h.update(format!("{engine:?}").as_bytes());
    hex(&h.finalize())
}

pub fn checkpoint_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("n{n:06}.ckpt"))
}

pub fn template_for(entry: &CheckedEntry, plan: &CheckedPlan, cfg: &EstimatorConfig) -> EstimatorSet {
    EstimatorSet::new(cfg, &entry.params, &plan.domain, entry.horizon)
}

fn encode_replica(r: &ReplicaResult, e: &mut Encoder) {
    e.usize(r.replica);
    e.u64(r.seed);
    e.u64(r.pair_events);
    e.u64(r.wall_events);
    e.f64(r.collision_rate);
    e.f64(r.energy_drift);
    e.f64(r.max_momentum_drift);
    e.f64(r.min_contact_gap);
    e.f64(r.min_wall_clearance);
}

fn decode_replica(d: &mut Decoder) -> Result<ReplicaResult> {
    Ok(ReplicaResult {
        replica: d.usize()?,
        seed: d.u64()?,
        pair_events: d.u64()?,
        wall_events: d.u64()?,
        collision_rate: d.f64()?,
        energy_drift: d.f64()?,
        max_momentum_drift: d.f64()?,
        min_contact_gap: d.f64()?,
        min_wall_clearance: d.f64()?,
    })
}

/// Checkpoint layout after the header: fingerprint (string), `N` (u64),
/// replica results (count then 9 fields each), estimator batches (count then
/// each set).
pub fn encode_run(run: &NRun) -> Vec<u8> {
    let mut e = Encoder::with_header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    e.str(&run.fingerprint);
    e.usize(run.entry.n);
    e.usize(run.replicas.len());
    for r in &run.replicas {
        encode_replica(r, &mut e);
    }
    e.usize(run.batches.len());
    for b in &run.batches {
        b.encode(&mut e);
    }
    e.finish()
}

pub fn decode_run(bytes: &[u8], entry: &CheckedEntry, template: &EstimatorSet, fingerprint: &str) -> Result<NRun> {
    let (mut d, version) = Decoder::with_header(bytes, CHECKPOINT_MAGIC)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let fp = d.str()?;
    if fp != fingerprint {
        return Err(Error::Format(format!("checkpoint for N={} was written for a different configuration", entry.n)));
    }
    if d.usize()? != entry.n {
        return Err(Error::Format("checkpoint N does not match the plan".into()));
    }
    let nr = d.usize()?;
    let replicas = (0..nr).map(|_| decode_replica(&mut d)).collect::<Result<Vec<_>>>()?;
    let nb = d.usize()?;
    let batches = (0..nb).map(|_| EstimatorSet::decode(template, &mut d)).collect::<Result<Vec<_>>>()?;
    d.expect_end()?;
    Ok(NRun { entry: entry.clone(), replicas, batches, fingerprint: fp })
}

/// Writes via a temporary file and rename so a crash never leaves a
/// truncated checkpoint behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn run_entry(plan: &CheckedPlan, entry: &CheckedEntry, cfg: &EstimatorConfig, opts: &SweepOptions) -> Result<NRun> {
    let mut spec = EnsembleSpec::new(entry.params, plan.domain, entry.replicas, entry.horizon, entry.seed);
    spec.burn_in = entry.burn_in;
    spec.sample_times = cfg.sample_times(entry.horizon);
    spec.engine = opts.engine;
    spec.workers = opts.workers;
    let out = run_ensemble(&spec, |_| EstimatorSet::for_replica(cfg, &entry.params, &plan.domain, entry.horizon))?;
    Ok(NRun {
        entry: entry.clone(),
        replicas: out.replicas,
        batches: out.batches,
        fingerprint: entry_fingerprint(entry, cfg, &opts.engine),
    })
}

/// Loads the checkpoint of `entry` if one exists for this configuration.
pub fn load_checkpoint(
    dir: &Path,
    plan: &CheckedPlan,
    entry: &CheckedEntry,
    cfg: &EstimatorConfig,
    engine: &EngineConfig,
) -> Result<Option<NRun>> {
    let path = checkpoint_path(dir, entry.n);
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(&path)?;
    let fp = entry_fingerprint(entry, cfg, engine);
    decode_run(&bytes, entry, &template_for(entry, plan, cfg), &fp).map(Some)
}

pub fn execute_sweep(plan: &CheckedPlan, cfg: &EstimatorConfig, opts: &SweepOptions) -> Result<SweepData> {
    cfg.validate()?;
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut runs = Vec::with_capacity(plan.entries.len());
    let mut failures = Vec::new();
    for (k, entry) in plan.entries.iter().enumerate() {
        if opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
            return Err(Error::Interrupted { completed: k });
        }
        let loaded = match &opts.checkpoint_dir {
            Some(dir) => load_checkpoint(dir, plan, entry, cfg, &opts.engine)?,
            None => None,
        };
        let run = match loaded {
            Some(r) => r,
            None => match run_entry(plan, entry, cfg, opts) {
                Ok(r) => {
                    if let Some(dir) = &opts.checkpoint_dir {
                        write_atomic(&checkpoint_path(dir, entry.n), &encode_run(&r))?;
                    }
                    r
                }
                Err(e) => {
                    failures.push((entry.n, e.to_string()));
                    continue;
                }
            },
        };
        runs.push(run);
        if opts.stop_after == Some(k + 1) && k + 1 < plan.entries.len() {
            return Err(Error::Interrupted { completed: k + 1 });
        }
    }
    if !failures.is_empty() {
        return Err(Error::Sweep { failures });
    }
    Ok(SweepData { plan: plan.clone(), config: cfg.clone(), engine: opts.engine, runs })
}

/// Rebuilds sweep data purely from checkpoints.
pub fn load_sweep(dir: &Path, plan: &CheckedPlan, cfg: &EstimatorConfig, engine: &EngineConfig) -> Result<SweepData> {
    let mut runs = Vec::with_capacity(plan.entries.len());
    for entry in &plan.entries {
        match load_checkpoint(dir, plan, entry, cfg, engine)? {
            Some(r) => runs.push(r),
            None => return Err(Error::Format(format!("no checkpoint for N={} in {}", entry.n, dir.display()))),
        }
    }
    Ok(SweepData { plan: plan.clone(), config: cfg.clone(), engine: *engine, runs })
}
