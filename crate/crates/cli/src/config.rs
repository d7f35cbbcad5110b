//! Run configuration: a TOML file with `[model]`, `[ensemble]`, `[sweep]`,
//! `[estimators]` and `[output]` tables, plus `section.key=value` overrides.

use hsbg::bgsweep::{default_replicas, EstimatorConfig, PlanEntry, SweepPlan};
use hsbg::model::DEFAULT_PACKING_CAP;
use hsbg::{DomainSpec, ModelParams, ParamsBuilder};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("config error at `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { key: key.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Sweep,
    Verify,
    Report,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
            Mode::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Particle count for `simulate`.
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub wall_radius: f64,
    pub temperature: f64,
    pub packing_cap: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { n: None, c: None, d: None, wall_radius: 1.0, temperature: 1.0, packing_cap: DEFAULT_PACKING_CAP }
    }
}

/// Times are in mean collision times of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub replicas: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Replicas whose full event log is written by `simulate`.
    pub logged_replicas: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { replicas: 1, horizon: 10.0, burn_in: 0.0, seed: 1, logged_replicas: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n: Vec<usize>,
    /// Target particle samples per entry; replicas are `max(16, samples / N)`.
    pub particle_samples: usize,
    /// Fixed replica count for every entry, overriding `particle_samples`.
    pub replicas: Option<usize>,
    pub horizon: f64,
    pub burn_in: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n: vec![125, 250, 500, 1000, 2000],
            particle_samples: 8000,
            replicas: None,
            horizon: 4.0,
            burn_in: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("hsbg-out"), workers: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub model: ModelSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub estimators: EstimatorConfig,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: ModelSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub estimators: EstimatorConfig,
    pub output: OutputSection,
}

/// Command-line values applied after the file and `--set` overrides.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub set: Vec<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies one `a.b.c=value` override to the raw table.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| ConfigError::new(spec, "override must look like section.key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::new(key, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Reads the file (if any), applies overrides and validates for `mode`.
pub fn parse_config(path: Option<&Path>, mode: Mode, cli: &CliOverrides) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| ConfigError::new(p.display().to_string(), e.to_string()))?;
            text.parse::<toml::Table>()
                .map_err(|e| ConfigError::new(p.display().to_string(), e.message().to_string()))?
        }
        None => toml::Table::new(),
    };
    for s in &cli.set {
        apply_override(&mut table, s)?;
    }
    let text = toml::to_string(&table).map_err(|e| ConfigError::new("<root>", e.to_string()))?;
    let de = toml::Deserializer::parse(&text).map_err(|e| ConfigError::new("<root>", e.message().to_string()))?;
    let file: FileConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        ConfigError::new(key, e.into_inner().message().to_string())
    })?;
    let mut cfg = RunConfig {
        mode,
        model: file.model,
        ensemble: file.ensemble,
        sweep: file.sweep,
        estimators: file.estimators,
        output: file.output,
    };
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.output.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.ensemble.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        positive("model.wall_radius", m.wall_radius)?;
        positive("model.temperature", m.temperature)?;
        positive("model.packing_cap", m.packing_cap)?;
        self.estimators.validate().map_err(|e| ConfigError::new("estimators", e.to_string()))?;
        match self.mode {
            Mode::Simulate => {
                match (m.c, m.d) {
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::new("model.c", "give exactly one of model.c and model.d, not both"))
                    }
                    (None, None) => return Err(ConfigError::new("model.c", "give exactly one of model.c and model.d")),
                    (Some(c), None) => positive("model.c", c)?,
                    (None, Some(d)) => positive("model.d", d)?,
                }
                match m.n {
                    Some(n) if n > 0 => {}
                    _ => return Err(ConfigError::new("model.n", "simulate needs a positive particle count")),
                }
                let e = &self.ensemble;
                if e.replicas == 0 {
                    return Err(ConfigError::new("ensemble.replicas", "must be at least 1"));
                }
                positive("ensemble.horizon", e.horizon)?;
                if !(e.burn_in >= 0.0 && e.burn_in.is_finite()) {
                    return Err(ConfigError::new("ensemble.burn_in", "must be non-negative"));
                }
            }
            Mode::Sweep | Mode::Report => {
                if m.d.is_some() {
                    return Err(ConfigError::new("model.d", "a sweep fixes c; d follows from d = c / sqrt(N)"));
                }
                match m.c {
                    Some(c) => positive("model.c", c)?,
                    None => return Err(ConfigError::new("model.c", "a sweep needs c")),
                }
                if m.n.is_some() {
                    return Err(ConfigError::new("model.n", "a sweep takes its particle counts from sweep.n"));
                }
                let s = &self.sweep;
                if s.n.is_empty() {
                    return Err(ConfigError::new("sweep.n", "needs at least one particle count"));
                }
                if s.replicas == Some(0) {
                    return Err(ConfigError::new("sweep.replicas", "must be at least 1"));
                }
                positive("sweep.horizon", s.horizon)?;
                if !(s.burn_in >= 0.0 && s.burn_in.is_finite()) {
                    return Err(ConfigError::new("sweep.burn_in", "must be non-negative"));
                }
            }
            Mode::Verify => {}
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec, ConfigError> {
        DomainSpec::new(self.model.wall_radius).map_err(|e| ConfigError::new("model.wall_radius", e.to_string()))
    }

    /// Model parameters for `simulate`.
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let n = self.model.n.ok_or_else(|| ConfigError::new("model.n", "missing"))?;
        let mut b = ParamsBuilder::new(n, self.domain()?)
            .temperature(self.model.temperature)
            .packing_cap(self.model.packing_cap);
        b = match (self.model.c, self.model.d) {
            (Some(c), None) => b.boltzmann_grad(c),
            (None, Some(d)) => b.diameter(d),
            _ => return Err(ConfigError::new("model.c", "give exactly one of model.c and model.d")),
        };
        b.build().map_err(|e| ConfigError::new("model", e.to_string()))
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan, ConfigError> {
        let c = self.model.c.ok_or_else(|| ConfigError::new("model.c", "a sweep needs c"))?;
        let s = &self.sweep;
        Ok(SweepPlan {
            c,
            entries: s
                .n
                .iter()
                .map(|&n| PlanEntry {
                    n,
                    d: None,
                    replicas: s.replicas.unwrap_or_else(|| default_replicas(n, s.particle_samples)),
                })
                .collect(),
            wall_radius: self.model.wall_radius,
            temperature: self.model.temperature,
            horizon: s.horizon,
            burn_in: s.burn_in,
            base_seed: self.ensemble.seed,
            packing_cap: self.model.packing_cap,
        })
    }

    /// Everything that determines results, as TOML. Output location and
    /// worker count are excluded.
    pub fn canonical_toml(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            mode: Mode,
            model: &'a ModelSection,
            ensemble: &'a EnsembleSection,
            sweep: &'a SweepSection,
            estimators: &'a EstimatorConfig,
        }
        toml::to_string(&Canonical {
            mode: self.mode,
            model: &self.model,
            ensemble: &self.ensemble,
            sweep: &self.sweep,
            estimators: &self.estimators,
        })
        .expect("config serializes")
    }

    /// Creates the output directory and confirms it is writable.
    pub fn prepare_output(&self) -> Result<PathBuf, ConfigError> {
        let dir = &self.output.dir;
        let key = || ConfigError::new("output.dir", format!("{} is not writable", dir.display()));
        std::fs::create_dir_all(dir).map_err(|_| key())?;
        let probe = dir.join(".hsbg-write-probe");
        std::fs::write(&probe, b"").map_err(|_| key())?;
        std::fs::remove_file(&probe).map_err(|_| key())?;
        Ok(dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(set: &[&str]) -> CliOverrides {
        CliOverrides { set: set.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    #[test]
    fn minimal_simulate_fills_defaults() {
        let cfg = parse_config(None, Mode::Simulate, &cli(&["model.n=27", "model.c=0.5"])).unwrap();
        assert_eq!(cfg.model.n, Some(27));
        assert_eq!(cfg.model.wall_radius, 1.0);
        assert_eq!(cfg.ensemble.replicas, 1);
        assert_eq!(cfg.estimators, EstimatorConfig::default());
    }

    #[test]
    fn both_c_and_d_rejected() {
        let e = parse_config(None, Mode::Simulate, &cli(&["model.n=27", "model.c=0.5", "model.d=0.1"])).unwrap_err();
        assert_eq!(e.key, "model.c");
    }

    #[test]
    fn misspelled_key_is_named() {
        let e = parse_config(None, Mode::Simulate, &cli(&["model.n=27", "model.c=0.5", "ensemble.replicass=4"]))
            .unwrap_err();
        assert_eq!(e.key, "ensemble.replicass", "{e}");
    }

    #[test]
    fn sweep_needs_c() {
        let e = parse_config(None, Mode::Sweep, &cli(&[])).unwrap_err();
        assert_eq!(e.key, "model.c");
        let ok = parse_config(None, Mode::Sweep, &cli(&["model.c=0.5", "sweep.n=[8, 27]"])).unwrap();
        assert_eq!(ok.sweep_plan().unwrap().entries.len(), 2);
    }

    #[test]
    fn string_override_falls_back() {
        let cfg = parse_config(None, Mode::Verify, &cli(&["output.dir=some/where"])).unwrap();
        assert_eq!(cfg.output.dir, PathBuf::from("some/where"));
    }

    #[test]
    fn hash_ignores_output() {
        let a = parse_config(None, Mode::Verify, &cli(&["output.dir=a"])).unwrap();
        let b = parse_config(None, Mode::Verify, &cli(&["output.dir=b", "output.workers=3"])).unwrap();
        assert_eq!(a.canonical_toml(), b.canonical_toml());
    }
}
