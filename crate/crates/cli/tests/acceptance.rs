//! Acceptance run: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use hsbg::bgsweep::{analyze_sweep, execute_sweep, validate_plan, SweepOptions, SweepPlan};
use hsbg_cli::checks::{self, CheckContext, CheckOutcome};
use hsbg_cli::config::{parse_config, CliOverrides, Mode};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_hsbg");

struct Line {
    criterion: u32,
    passed: bool,
    text: String,
}

fn from_outcome(o: &CheckOutcome) -> Line {
    Line {
        criterion: o.criterion,
        passed: o.passed,
        text: format!("{} (value {:.4e}, threshold {:.4e}): {}", o.id, o.value, o.threshold, o.detail),
    }
}

fn hsbg(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().expect("hsbg binary runs").status.code().unwrap_or(-1)
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((name, std::fs::read(&p).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}

/// Standard sweep: c = 0.5, N from 125 to 2000, 8000 particle samples per
/// entry, 4 mean collision times after 1 of burn-in.
fn sweep_criteria() -> Vec<Line> {
    let cli = CliOverrides { set: vec!["model.c=0.5".into(), "estimators.snapshots=256".into()], ..Default::default() };
    let cfg = parse_config(None, Mode::Sweep, &cli).expect("standard sweep config");
    let plan: SweepPlan = cfg.sweep_plan().expect("plan");
    let checked = validate_plan(&plan).expect("valid plan");
    let data = execute_sweep(&checked, &cfg.estimators, &SweepOptions::default()).expect("sweep runs");
    let result = analyze_sweep(&data).expect("sweep analysis");
    checks::sweep_checks(&result).iter().map(from_outcome).collect()
}

fn determinism_and_resume(tmp: &Path) -> Line {
    let sim = [
        "--set",
        "model.n=27",
        "--set",
        "model.c=0.5",
        "--set",
        "ensemble.replicas=2",
        "--set",
        "ensemble.logged_replicas=2",
    ];
    let (a, b) = (tmp.join("sim_a"), tmp.join("sim_b"));
    let ok_a = hsbg(&[&["simulate", "--out", a.to_str().unwrap()][..], &sim[..]].concat()) == 0;
    let ok_b = hsbg(&[&["simulate", "--out", b.to_str().unwrap()][..], &sim[..]].concat()) == 0;
    let logs_equal = ok_a && ok_b && dir_files(&a) == dir_files(&b);

    let sw = [
        "--set",
        "model.c=0.5",
        "--set",
        "sweep.n=[27, 64, 125, 216]",
        "--set",
        "sweep.replicas=8",
        "--set",
        "estimators.snapshots=32",
    ];
    let (full, resumed, again) = (tmp.join("sweep_full"), tmp.join("sweep_resumed"), tmp.join("sweep_again"));
    let run = |d: &Path, extra: &[&str]| hsbg(&[&["sweep", "--out", d.to_str().unwrap()][..], &sw[..], extra].concat());
    let full_ok = run(&full, &[]) == 0;
    let again_ok = run(&again, &[]) == 0;
    let interrupted = run(&resumed, &["--stop-after", "2"]) != 0 && resumed.join("INCOMPLETE").exists();
    let resumed_ok = run(&resumed, &[]) == 0 && !resumed.join("INCOMPLETE").exists();
    let reports_equal = full_ok && again_ok && dir_files(&full) == dir_files(&again);
    let resume_equal = resumed_ok && dir_files(&full) == dir_files(&resumed);

    let suite = checks::determinism(&CheckContext::default());
    Line {
        criterion: 12,
        passed: logs_equal && reports_equal && interrupted && resume_equal && suite.passed,
        text: format!(
            "simulate outputs identical: {logs_equal}; sweep reports identical: {reports_equal}; \
             interrupt marked: {interrupted}; resumed equals uninterrupted: {resume_equal}; {}",
            suite.detail
        ),
    }
}

fn verify_runtime(tmp: &Path) -> Line {
    let out = tmp.join("verify");
    let t = Instant::now();
    let code = hsbg(&["verify", "--out", out.to_str().unwrap()]);
    let secs = t.elapsed().as_secs_f64();
    let rows = std::fs::read_to_string(out.join("verify_results.csv"))
        .map(|s| s.lines().count().saturating_sub(1))
        .unwrap_or(0);
    Line {
        criterion: 13,
        passed: code == 0 && secs < 300.0,
        text: format!("hsbg verify exit {code} after {secs:.1} s (limit 300 s), {rows} checks recorded"),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let ctx = CheckContext::default();
    let mut lines = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Vec<Line>| {
        let t = Instant::now();
        let mut l = f();
        eprintln!("  ({name}: {:.1} s)", t.elapsed().as_secs_f64());
        lines.append(&mut l);
    };
    timed("conservation", &mut || checks::conservation_and_overlap(&ctx).iter().map(from_outcome).collect());
    timed("reversibility", &mut || vec![from_outcome(&checks::reversibility(&ctx))]);
    timed("equilibrium", &mut || vec![from_outcome(&checks::equilibrium_ks(&ctx))]);
    timed("dilute rate", &mut || vec![from_outcome(&checks::dilute_rate(&ctx))]);
    timed("sweep", &mut sweep_criteria);
    timed("representation", &mut || vec![from_outcome(&checks::representation_identity(&ctx))]);
    timed("collision null", &mut || vec![from_outcome(&checks::collision_null(&ctx))]);
    timed("determinism", &mut || vec![determinism_and_resume(tmp.path())]);
    timed("verify", &mut || vec![verify_runtime(tmp.path())]);

    lines.sort_by_key(|l| l.criterion);
    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2}: {}  {}", l.criterion, if l.passed { "PASS" } else { "FAIL" }, l.text);
        failed += usize::from(!l.passed);
    }
    println!("acceptance: {} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
