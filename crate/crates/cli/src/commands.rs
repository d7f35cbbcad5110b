//! The four subcommands. Each returns the process exit code.

use crate::checks::{self, CheckContext};
use crate::config::RunConfig;
use crate::manifest::{Manifest, Status};
use hsbg::bgsweep::execute::checkpoint_path;
use hsbg::bgsweep::{
    analyze_sweep, execute_sweep, load_sweep, validate_plan, write_reports, EstimatorSet, SweepOptions, SweepResult,
};
use hsbg::densities::PhaseHistogram;
use hsbg::dynamics::{EngineConfig, EventLog};
use hsbg::ensemble::{run_ensemble, run_replica, EnsembleSpec};
use hsbg::Error;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const VERIFY_FILE: &str = "verify_results.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Options that are not part of the scientific configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub engine: EngineConfig,
    pub fault_injected: bool,
    pub stop_after: Option<usize>,
    pub cancel: Option<Arc<AtomicBool>>,
}

/// Validation problems exit with 1, everything else with 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Plan { .. } | Error::Packing { .. } | Error::InvalidParam(_) | Error::Domain(_) => EXIT_CHECK,
        _ => EXIT_RUNTIME,
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn file_names(dir: &Path, paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned()).collect()
}

fn write_manifest(cfg: &RunConfig, dir: &Path, status: Status, opts: &RunOptions, files: Vec<String>) -> i32 {
    match Manifest::new(cfg, status, opts.fault_injected, files).write(dir) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&Error::Io(e)),
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Bin table of a phase-space histogram.
pub fn write_histogram(path: &Path, h: &PhaseHistogram, meta: &[(&str, String)]) -> hsbg::Result<()> {
    let mut buf = Vec::new();
    for (k, v) in meta {
        buf.extend_from_slice(format!("# {k},{v}\n").as_bytes());
    }
    buf.extend_from_slice(format!("# projection,{}\n# snapshots,{}\n", h.projection.name(), h.snapshots).as_bytes());
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["a_lo", "a_hi", "b_lo", "b_hi", "mass", "count", "density"]).map_err(csv_io)?;
        for a in 0..h.bins_a() {
            for b in 0..h.bins_b() {
                let k = h.index(a, b);
                w.write_record([
                    h.edges_a[a].to_string(),
                    h.edges_a[a + 1].to_string(),
                    h.edges_b[b].to_string(),
                    h.edges_b[b + 1].to_string(),
                    h.mass[k].to_string(),
                    h.counts[k].to_string(),
                    h.density(a, b).to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
        w.flush()?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, opts: &RunOptions) -> i32 {
    let params = match cfg.params() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let domain = match cfg.domain() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let dir = match cfg.prepare_output() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let e = &cfg.ensemble;
    let tau = params.mean_collision_time();
    let horizon = e.horizon * tau;
    let mut spec = EnsembleSpec::new(params, domain, e.replicas, horizon, e.seed);
    spec.burn_in = e.burn_in * tau;
    spec.engine = opts.engine;
    spec.workers = cfg.output.workers;
    spec.sample_times = cfg.estimators.sample_times(horizon);
    eprintln!(
        "simulate: N={} d={:.5} eta_bar={:.4e} replicas={} horizon={:.4} ({} mean collision times)",
        params.n,
        params.d,
        params.eta_bar(),
        e.replicas,
        horizon,
        e.horizon
    );

    let result = (|| -> hsbg::Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        let out = run_ensemble(&spec, |_| EstimatorSet::for_replica(&cfg.estimators, &params, &domain, horizon))?;
        for r in 0..e.logged_replicas.min(e.replicas) {
            let mut log = EventLog::new();
            run_replica(&spec, r, &mut log)?;
            let p = dir.join(format!("events_r{r:04}.csv"));
            let mut f = std::io::BufWriter::new(std::fs::File::create(&p)?);
            log.write_csv(&mut f)?;
            std::io::Write::flush(&mut f)?;
            files.push(p);
        }

        let mut w = csv::Writer::from_path(dir.join("replicas.csv")).map_err(csv_io)?;
        w.write_record([
            "replica",
            "seed",
            "pair_events",
            "wall_events",
            "collision_rate",
            "energy_drift",
            "max_momentum_drift",
            "min_contact_gap",
            "min_wall_clearance",
        ])
        .map_err(csv_io)?;
        for r in &out.replicas {
            w.write_record([
                r.replica.to_string(),
                r.seed.to_string(),
                r.pair_events.to_string(),
                r.wall_events.to_string(),
                r.collision_rate.to_string(),
                r.energy_drift.to_string(),
                r.max_momentum_drift.to_string(),
                r.min_contact_gap.to_string(),
                r.min_wall_clearance.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        files.push(dir.join("replicas.csv"));

        let merged = out.merged().expect("at least one replica");
        let meta = [("n", params.n.to_string()), ("d", params.d.to_string()), ("replicas", e.replicas.to_string())];
        let p = dir.join("f1_radial_speed.csv");
        write_histogram(&p, &merged.f1, &meta)?;
        files.push(p);
        for (k, (h, t)) in merged.xvx.iter().zip(&merged.residual_times).enumerate() {
            let mut m = meta.to_vec();
            m.push(("time", t.to_string()));
            let p = dir.join(format!("f1_x_vx_t{k:02}.csv"));
            write_histogram(&p, h, &m)?;
            files.push(p);
        }
        Ok(files)
    })();
    match result {
        Ok(files) => {
            let names = file_names(&dir, &files);
            eprintln!("simulate: wrote {} files to {}", names.len() + 1, dir.display());
            write_manifest(cfg, &dir, Status::Complete, opts, names)
        }
        Err(err) => {
            write_manifest(cfg, &dir, Status::Failed, opts, Vec::new());
            fail(&err)
        }
    }
}

fn finish_sweep(cfg: &RunConfig, dir: &Path, opts: &RunOptions, result: &SweepResult, mut files: Vec<PathBuf>) -> i32 {
    match write_reports(dir, result, cfg.ensemble.seed) {
        Ok(mut written) => {
            written.append(&mut files);
            eprint!("{}", checks::format_table(&checks::sweep_checks(result)));
            write_manifest(cfg, dir, Status::Complete, opts, file_names(dir, &written))
        }
        Err(e) => {
            write_manifest(cfg, dir, Status::Failed, opts, file_names(dir, &files));
            fail(&e)
        }
    }
}

fn checkpoint_files(cfg: &RunConfig, dir: &Path) -> Vec<PathBuf> {
    let ck = dir.join(CHECKPOINT_DIR);
    cfg.sweep.n.iter().map(|&n| checkpoint_path(&ck, n)).filter(|p| p.exists()).collect()
}

pub fn sweep(cfg: &RunConfig, opts: &RunOptions) -> i32 {
    let plan = match cfg.sweep_plan() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let checked = match validate_plan(&plan) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = match cfg.prepare_output() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    for e in &checked.entries {
        eprintln!(
            "plan: N={:>6} d={:.5} eta_bar={:.3e} replicas={:>5} predicted {:.1} s",
            e.n,
            e.params.d,
            e.params.eta_bar(),
            e.replicas,
            e.predicted_seconds
        );
    }
    let sweep_opts = SweepOptions {
        workers: cfg.output.workers,
        engine: opts.engine,
        checkpoint_dir: Some(dir.join(CHECKPOINT_DIR)),
        stop_after: opts.stop_after,
        cancel: opts.cancel.clone(),
    };
    match execute_sweep(&checked, &cfg.estimators, &sweep_opts) {
        Ok(data) => match analyze_sweep(&data) {
            Ok(result) => finish_sweep(cfg, &dir, opts, &result, checkpoint_files(cfg, &dir)),
            Err(e) => {
                write_manifest(cfg, &dir, Status::Failed, opts, file_names(&dir, &checkpoint_files(cfg, &dir)));
                fail(&e)
            }
        },
        Err(e) => {
            let status = if matches!(e, Error::Interrupted { .. }) { Status::Interrupted } else { Status::Failed };
            write_manifest(cfg, &dir, status, opts, file_names(&dir, &checkpoint_files(cfg, &dir)));
            fail(&e)
        }
    }
}

pub fn report(cfg: &RunConfig, opts: &RunOptions) -> i32 {
    let checked = match cfg.sweep_plan().map(|p| validate_plan(&p)) {
        Ok(Ok(c)) => c,
        Ok(Err(e)) => return fail(&e),
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let dir = match cfg.prepare_output() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let data = match load_sweep(&dir.join(CHECKPOINT_DIR), &checked, &cfg.estimators, &opts.engine) {
        Ok(d) => d,
        Err(e) => return fail(&e),
    };
    match analyze_sweep(&data) {
        Ok(result) => finish_sweep(cfg, &dir, opts, &result, checkpoint_files(cfg, &dir)),
        Err(e) => fail(&e),
    }
}

pub fn verify(cfg: &RunConfig, opts: &RunOptions) -> i32 {
    let dir = match cfg.prepare_output() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CHECK;
        }
    };
    let ctx = CheckContext { seed: cfg.ensemble.seed, workers: cfg.output.workers, engine: opts.engine };
    let outcomes = checks::verify_suite(&ctx);
    let path = dir.join(VERIFY_FILE);
    if let Err(e) = checks::write_results_csv(&path, &outcomes) {
        return fail(&Error::Io(e));
    }
    let all_pass = outcomes.iter().all(|o| o.passed);
    let table = checks::format_table(&outcomes);
    if all_pass {
        eprint!("{table}");
        eprintln!("verify: all {} checks pass", outcomes.len());
    } else {
        let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).cloned().collect();
        eprint!("{table}");
        eprintln!("verify: {} of {} checks failed", failed.len(), outcomes.len());
        eprint!("{}", checks::format_table(&failed));
    }
    let code = write_manifest(cfg, &dir, Status::Complete, opts, vec![VERIFY_FILE.to_string()]);
    if code != EXIT_OK {
        return code;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}
