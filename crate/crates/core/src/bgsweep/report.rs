//! Sweep report files: one CSV per diagnostic family and a TOML summary.

use super::analysis::{compare_terms, contact_table, SweepResult, TermReport};
use super::fit::PowerLawFit;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// CSV with `#`-prefixed metadata lines before the header row.
fn write_table(path: &Path, meta: &[(&str, String)], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    for (k, v) in meta {
        writeln!(buf, "# {k},{v}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    beta: f64,
    amplitude: f64,
    ci_low: f64,
    ci_high: f64,
    r_squared: f64,
}

impl From<&PowerLawFit> for FitSummary {
    fn from(f: &PowerLawFit) -> Self {
        FitSummary { beta: f.beta, amplitude: f.amplitude, ci_low: f.ci.0, ci_high: f.ci.1, r_squared: f.r_squared }
    }
}

#[derive(Serialize)]
struct Flags {
    scaling_exact: bool,
    rate_plateau: bool,
    i2_decay: bool,
    k_sup_stable: bool,
    afc_non_increasing: bool,
    free_fraction_increasing: bool,
    van_hove_clean: bool,
}

#[derive(Serialize)]
struct Summary {
    c: f64,
    n: Vec<usize>,
    rate_variation: f64,
    k_sup_spread: f64,
    flags: Flags,
    #[serde(skip_serializing_if = "Option::is_none")]
    i2_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i2_fit_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collision_fit: Option<FitSummary>,
}

/// Pass/fail thresholds of the sweep-level checks.
pub const RATE_PLATEAU: f64 = 0.10;
pub const I2_BETA_RANGE: (f64, f64) = (-0.6, -0.4);
pub const K_SUP_FACTOR: f64 = 2.0;

pub fn write_reports(dir: &Path, result: &SweepResult, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let terms: TermReport = compare_terms(result, seed);
    let meta = [("c", num(result.c)), ("entries", result.records.len().to_string())];
    let mut written = Vec::new();

    let summary_rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.d),
                num(r.scaling_residual),
                num(r.eta_bar),
                num(r.eta_max),
                r.replicas.to_string(),
                num(r.horizon),
                num(r.collision_rate.value),
                num(r.collision_rate.se),
                num(r.rate_oracle),
                num(r.free_fraction.value),
                num(r.free_fraction.se),
                num(r.i2_proxy.value),
                num(r.i2_proxy.se),
                num(r.k_sup.value),
                num(r.k_sup.se),
                r.majorized.to_string(),
                num(r.afc.squared.value),
                num(r.afc.squared.se),
                num(r.residual.as_ref().map_or(f64::NAN, |x| x.norm.value)),
                num(r.residual.as_ref().map_or(f64::NAN, |x| x.norm.se)),
                num(r.collision.rms.value),
                num(r.collision.rms.se),
                num(r.max_energy_drift),
                num(r.min_contact_gap),
                num(r.min_wall_clearance),
                r.manifest.clone(),
            ]
        })
        .collect();
    let p = dir.join("summary.csv");
    write_table(
        &p,
        &meta,
        &[
            "n",
            "d",
            "nd2_minus_c2",
            "eta_bar",
            "eta_max",
            "replicas",
            "horizon",
            "collision_rate",
            "collision_rate_se",
            "rate_oracle",
            "free_fraction",
            "free_fraction_se",
            "i2_proxy",
            "i2_proxy_se",
            "k_sup",
            "k_sup_se",
            "majorized",
            "afc_d2",
            "afc_d2_se",
            "residual_norm",
            "residual_norm_se",
            "collision_rms",
            "collision_rms_se",
            "max_energy_drift",
            "min_contact_gap",
            "min_wall_clearance",
            "manifest",
        ],
        &summary_rows,
    )?;
    written.push(p);

    let contact_rows: Vec<Vec<String>> = contact_table(result)
        .into_iter()
        .map(|(n, s, sh, fl, k)| {
            vec![
                n.to_string(),
                s.to_string(),
                num(sh.value),
                num(sh.se),
                num(fl.value),
                num(fl.se),
                num(k.value),
                num(k.se),
            ]
        })
        .collect();
    let p = dir.join("contact.csv");
    write_table(&p, &meta, &["n", "speed_class", "shell", "shell_se", "flux", "flux_se", "k", "k_se"], &contact_rows)?;
    written.push(p);

    let mut vh_rows = Vec::new();
    for r in &result.records {
        for row in &r.vanhove.rows {
            vh_rows.push(vec![
                r.n.to_string(),
                num(row.radius),
                num(row.volume),
                num(row.count.value),
                num(row.count.se),
                num(row.count_ratio.value),
                num(row.count_ratio.se),
                num(row.scaling_ratio.value),
                num(row.scaling_ratio.se),
                row.flagged.to_string(),
            ]);
        }
    }
    let p = dir.join("vanhove.csv");
    write_table(
        &p,
        &meta,
        &[
            "n",
            "radius",
            "volume",
            "count",
            "count_se",
            "count_ratio",
            "count_ratio_se",
            "scaling_ratio",
            "scaling_ratio_se",
            "flagged",
        ],
        &vh_rows,
    )?;
    written.push(p);

    let term_rows: Vec<Vec<String>> = terms
        .rows
        .iter()
        .map(|t| {
            vec![
                t.n.to_string(),
                num(t.residual_norm.value),
                num(t.residual_norm.se),
                num(t.residual_dt_norm.value),
                num(t.residual_dt_norm.se),
                t.residual_consistent_with_zero.to_string(),
                t.residual_dt_consistent_with_zero.to_string(),
                num(t.collision_rms.value),
                num(t.collision_rms.se),
                num(t.collision_loss_scale),
                num(t.collision_max_z),
                num(t.i2_proxy.value),
                num(t.i2_proxy.se),
            ]
        })
        .collect();
    let p = dir.join("terms.csv");
    write_table(
        &p,
        &meta,
        &[
            "n",
            "residual_norm",
            "residual_norm_se",
            "residual_dt_norm",
            "residual_dt_norm_se",
            "residual_zero",
            "residual_dt_zero",
            "collision_rms",
            "collision_rms_se",
            "collision_loss_scale",
            "collision_max_z",
            "i2_proxy",
            "i2_proxy_se",
        ],
        &term_rows,
    )?;
    written.push(p);

    let beta_ok = result.i2_fit.is_some_and(|f| (I2_BETA_RANGE.0..=I2_BETA_RANGE.1).contains(&f.beta));
    let summary = Summary {
        c: result.c,
        n: result.records.iter().map(|r| r.n).collect(),
        rate_variation: result.rate_variation,
        k_sup_spread: result.k_sup_spread,
        flags: Flags {
            scaling_exact: result.records.iter().all(|r| r.scaling_residual.abs() <= 8.0 * f64::EPSILON * r.c * r.c),
            rate_plateau: result.rate_variation < RATE_PLATEAU,
            i2_decay: beta_ok,
            k_sup_stable: result.k_sup_spread <= K_SUP_FACTOR,
            afc_non_increasing: result.afc_non_increasing,
            free_fraction_increasing: result.free_fraction_increasing,
            van_hove_clean: result.records.iter().all(|r| !r.vanhove.any_flagged()),
        },
        i2_fit: result.i2_fit.as_ref().map(FitSummary::from),
        i2_fit_error: result.i2_fit_error.clone(),
        residual_fit: terms.residual_beta.as_ref().map(FitSummary::from),
        collision_fit: terms.collision_beta.as_ref().map(FitSummary::from),
    };
    let p = dir.join("summary.toml");
    std::fs::write(&p, toml::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?)?;
    written.push(p);
    Ok(written)
}
