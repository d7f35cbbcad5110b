//! End-to-end behaviour of the `hsbg` binary and its configuration layer.

use hsbg_cli::config::{parse_config, CliOverrides, Mode};
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hsbg");

fn hsbg(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn config_file_unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[model]\nn = 27\nc = 0.5\n\n[ensemble]\nreplicass = 3\n").unwrap();
    let e = parse_config(Some(&path), Mode::Simulate, &CliOverrides::default()).unwrap_err();
    assert_eq!(e.key, "ensemble.replicass");
    assert!(e.reason.contains("replicass"));

    let out = hsbg(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicass"));
}

#[test]
fn config_file_values_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[model]\nn = 64\nd = 0.05\n\n[ensemble]\nreplicas = 3\nseed = 9\n").unwrap();
    let cli = CliOverrides { set: vec!["ensemble.replicas=5".into()], seed: Some(4), ..Default::default() };
    let cfg = parse_config(Some(&path), Mode::Simulate, &cli).unwrap();
    assert_eq!(cfg.ensemble.replicas, 5);
    assert_eq!(cfg.ensemble.seed, 4);
    assert_eq!(cfg.params().unwrap().d, 0.05);
}

#[test]
fn simulate_writes_log_histograms_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = hsbg(&[
        "simulate",
        "--set",
        "model.n=27",
        "--set",
        "model.c=0.5",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let log = csv_rows(&out.join("events_r0000.csv"));
    assert!(!log.is_empty());
    assert!(log.iter().all(|r| r[2] == "pair" || r[2] == "wall"));
    assert!(!csv_rows(&out.join("f1_radial_speed.csv")).is_empty());
    assert!(out.join("f1_x_vx_t00.csv").exists());
    let manifest: toml::Table = std::fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(7));
    assert_eq!(manifest["status"].as_str(), Some("complete"));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest.contains_key("code_version"));
    for f in manifest["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn sweep_resume_report_and_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let set = [
        "--set",
        "model.c=0.4",
        "--set",
        "sweep.n=[8, 27, 64]",
        "--set",
        "sweep.replicas=4",
        "--set",
        "estimators.snapshots=8",
    ];
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let args: Vec<&str> = [&["sweep", "--out", out.to_str().unwrap()][..], &set[..], extra].concat();
        (hsbg(&args), out)
    };
    let (full, full_dir) = run("full", &[]);
    assert_eq!(full.status.code(), Some(0), "{}", String::from_utf8_lossy(&full.stderr));

    let (stopped, part_dir) = run("part", &["--stop-after", "1"]);
    assert_eq!(stopped.status.code(), Some(2));
    assert!(part_dir.join("INCOMPLETE").exists());
    let manifest = std::fs::read_to_string(part_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"interrupted\""));
    let (resumed, _) = run("part", &[]);
    assert_eq!(resumed.status.code(), Some(0));
    assert!(!part_dir.join("INCOMPLETE").exists());
    for f in ["summary.csv", "contact.csv", "vanhove.csv", "terms.csv", "summary.toml", "manifest.toml"] {
        assert_eq!(std::fs::read(full_dir.join(f)).unwrap(), std::fs::read(part_dir.join(f)).unwrap(), "{f}");
    }

    let before = std::fs::read(full_dir.join("summary.csv")).unwrap();
    let args: Vec<&str> = [&["report", "--out", full_dir.to_str().unwrap()][..], &set[..]].concat();
    let rep = hsbg(&args);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    assert_eq!(before, std::fs::read(full_dir.join("summary.csv")).unwrap());
    assert_eq!(csv_rows(&full_dir.join("summary.csv")).len(), 3);
}

#[test]
fn report_refuses_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let base = [
        "--set",
        "model.c=0.4",
        "--set",
        "sweep.n=[8, 27, 64]",
        "--set",
        "sweep.replicas=2",
        "--set",
        "estimators.snapshots=4",
    ];
    let args: Vec<&str> = [&["sweep", "--out", out.to_str().unwrap()][..], &base[..]].concat();
    assert_eq!(hsbg(&args).status.code(), Some(0));
    let mut other = base.to_vec();
    other[5] = "sweep.replicas=3";
    let args: Vec<&str> = [&["report", "--out", out.to_str().unwrap()][..], &other[..]].concat();
    assert_ne!(hsbg(&args).status.code(), Some(0));
}

#[test]
fn invalid_plan_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = hsbg(&["sweep", "--set", "model.c=0.5", "--set", "sweep.n=[500, 125]", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta_bar"));
}

#[test]
fn injected_sign_fault_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = hsbg(&["verify", "--inject-fault", "collision-sign", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let rows = csv_rows(&out.join("verify_results.csv"));
    let conservation = rows.iter().find(|r| r[0] == "conservation").unwrap();
    assert_eq!(conservation[2], "fail");
    // the Monte Carlo collision check does not touch the dynamics
    assert_eq!(rows.iter().find(|r| r[0] == "collision_null").unwrap()[2], "pass");
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("fault_injected = true"));
}

#[test]
fn unknown_subcommand_flag_is_rejected() {
    let o = hsbg(&["simulate", "--bogus"]);
    assert_ne!(o.status.code(), Some(0));
}
