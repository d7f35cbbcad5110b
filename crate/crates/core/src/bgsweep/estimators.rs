//! The per-replica estimator bundle fed by the engine and merged into batches.

use super::vanhove::VanHoveAccumulator;
use crate::codec::{Decoder, Encoder};
use crate::densities::{
    klimontovich_points, maxwell_quantile_edges, AfcStatistics, ContactStatistics, FieldGrid, PhaseHistogram,
};
use crate::dynamics::{EventRecord, LoggedKind, Observer};
use crate::ensemble::Accumulator;
use crate::error::{Error, Result};
use crate::model::{DomainSpec, ModelParams, SystemState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub r_bins: usize,
    pub speed_bins: usize,
    /// Upper speed edge in units of `sqrt(T)`.
    pub speed_max: f64,
    pub x_bins: usize,
    pub vx_bins: usize,
    /// Velocity half-range of the `(x, v_x)` histograms in units of `sqrt(T)`.
    pub vx_max: f64,
    /// Cylinder radius and x half-range of the `(x, v_x)` window, in units of `R_o`.
    pub rho_max: f64,
    pub x_max: f64,
    pub contact_classes: usize,
    /// Shell thickness in units of `d`.
    pub delta_shell: f64,
    pub subshells: usize,
    pub partners: usize,
    pub afc_classes: usize,
    /// Far-pair threshold in units of `d`.
    pub r_split: f64,
    pub field_shells: usize,
    /// Van Hove radii in units of `R_o`.
    pub vanhove_radii: Vec<f64>,
    /// Probe centre offset along x in units of `R_o`.
    pub vanhove_offset: f64,
    /// Snapshots per replica for the equal-time estimators.
    pub snapshots: usize,
    /// Uniformly spaced times, including both ends, for the residual series.
    pub residual_times: usize,
    pub mc_samples: usize,
    pub probes: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            r_bins: 24,
            speed_bins: 32,
            speed_max: 5.0,
            x_bins: 24,
            vx_bins: 32,
            vx_max: 5.0,
            rho_max: 0.5,
            x_max: 0.7,
            contact_classes: 8,
            delta_shell: 0.1,
            subshells: 4,
            partners: 64,
            afc_classes: 4,
            r_split: 5.0,
            field_shells: 16,
            vanhove_radii: vec![0.25, 0.5, 0.75, 1.0],
            vanhove_offset: 0.0,
            snapshots: 16,
            residual_times: 5,
            mc_samples: 100_000,
            probes: 8,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_bins", self.r_bins),
            ("speed_bins", self.speed_bins),
            ("vx_bins", self.vx_bins),
            ("contact_classes", self.contact_classes),
            ("subshells", self.subshells),
            ("partners", self.partners),
            ("afc_classes", self.afc_classes),
            ("field_shells", self.field_shells),
            ("snapshots", self.snapshots),
            ("mc_samples", self.mc_samples),
            ("probes", self.probes),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParam(format!("estimators.{k} must be positive")));
            }
        }
        if self.x_bins < 3 || self.residual_times < 3 {
            return Err(Error::InvalidParam("estimators.x_bins and estimators.residual_times must be >= 3".into()));
        }
        if !(self.r_split > 1.0) {
            return Err(Error::InvalidParam("estimators.r_split must exceed 1 (units of d)".into()));
        }
        for (k, v) in [
            ("speed_max", self.speed_max),
            ("vx_max", self.vx_max),
            ("rho_max", self.rho_max),
            ("x_max", self.x_max),
            ("delta_shell", self.delta_shell),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("estimators.{k} must be positive")));
            }
        }
        if self.vanhove_radii.is_empty()
            || self.vanhove_radii.windows(2).any(|w| w[1] <= w[0])
            || self.vanhove_radii.iter().any(|&r| !(r > 0.0 && r <= 1.0))
        {
            return Err(Error::InvalidParam("estimators.vanhove_radii must be increasing within (0, 1]".into()));
        }
        Ok(())
    }

    /// Snapshot times: midpoints of `snapshots` equal slices of the horizon.
    pub fn snapshot_times(&self, horizon: f64) -> Vec<f64> {
        let k = self.snapshots;
        (0..k).map(|i| (i as f64 + 0.5) * horizon / k as f64).collect()
    }

    pub fn residual_time_grid(&self, horizon: f64) -> Vec<f64> {
        let k = self.residual_times;
        (0..k).map(|i| i as f64 * horizon / (k - 1) as f64).collect()
    }

    /// Sorted union of both time lists.
    pub fn sample_times(&self, horizon: f64) -> Vec<f64> {
        let mut t = self.snapshot_times(horizon);
        t.extend(self.residual_time_grid(horizon));
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSet {
    pub params: ModelParams,
    pub domain: DomainSpec,
    pub snapshot_times: Vec<f64>,
    pub residual_times: Vec<f64>,
    pub f1: PhaseHistogram,
    /// Klimontovich weight summed over snapshots.
    pub klimontovich_mass: f64,
    pub contact: ContactStatistics,
    pub afc: AfcStatistics,
    pub field: FieldGrid,
    pub vanhove: VanHoveAccumulator,
    /// `(x, v_x)` histograms, one per residual time.
    pub xvx: Vec<PhaseHistogram>,
    pub pair_events: u64,
    pub wall_events: u64,
    pub replicas: u64,
}

impl EstimatorSet {
    /// Empty set with fixed binning. Bins depend only on `R_o`, `T` and the
    /// config, so sets for different `N` are comparable point-wise.
    pub fn new(cfg: &EstimatorConfig, params: &ModelParams, domain: &DomainSpec, horizon: f64) -> Self {
        let r = domain.wall_radius();
        let st = params.temperature.sqrt();
        let d = params.d;
        let xvx = PhaseHistogram::x_vx(cfg.x_max * r, cfg.x_bins, cfg.rho_max * r, cfg.vx_max * st, cfg.vx_bins);
        let residual_times = cfg.residual_time_grid(horizon);
        EstimatorSet {
            params: *params,
            domain: *domain,
            snapshot_times: cfg.snapshot_times(horizon),
            f1: PhaseHistogram::radial_speed(r, cfg.r_bins, cfg.speed_max * st, cfg.speed_bins),
            klimontovich_mass: 0.0,
            contact: ContactStatistics::new(
                d,
                cfg.delta_shell * d,
                cfg.subshells,
                cfg.partners,
                maxwell_quantile_edges(cfg.contact_classes, params.temperature),
            ),
            afc: AfcStatistics::new(cfg.r_split * d, maxwell_quantile_edges(cfg.afc_classes, params.temperature)),
            field: FieldGrid::new(r, cfg.field_shells, d),
            vanhove: VanHoveAccumulator::new(
                cfg.vanhove_radii.iter().map(|f| f * r).collect(),
                cfg.vanhove_offset * r,
                r,
            ),
            xvx: vec![xvx; residual_times.len()],
            residual_times,
            pair_events: 0,
            wall_events: 0,
            replicas: 0,
        }
    }

    /// Set for one replica run over `horizon`.
    pub fn for_replica(cfg: &EstimatorConfig, params: &ModelParams, domain: &DomainSpec, horizon: f64) -> Self {
        let mut s = Self::new(cfg, params, domain, horizon);
        s.replicas = 1;
        s.contact.window = horizon;
        s.f1.replicas = 1;
        s.xvx.iter_mut().for_each(|h| h.replicas = 1);
        s
    }

    pub fn snapshots(&self) -> u64 {
        self.f1.snapshots
    }

    /// Mean Klimontovich mass per snapshot.
    pub fn free_fraction(&self) -> f64 {
        if self.snapshots() == 0 {
            0.0
        } else {
            self.klimontovich_mass / self.snapshots() as f64
        }
    }

    pub fn merge_from(&mut self, o: &Self) -> Result<()> {
        self.f1.merge(&o.f1)?;
        self.klimontovich_mass += o.klimontovich_mass;
        self.contact.merge(&o.contact);
        self.afc.merge(&o.afc);
        self.field.merge(&o.field);
        self.vanhove.merge(&o.vanhove);
        for (a, b) in self.xvx.iter_mut().zip(&o.xvx) {
            a.merge(b)?;
        }
        self.pair_events += o.pair_events;
        self.wall_events += o.wall_events;
        self.replicas += o.replicas;
        Ok(())
    }

    pub fn encode(&self, e: &mut Encoder) {
        hist_encode(&self.f1, e);
        e.f64(self.klimontovich_mass);
        let c = &self.contact;
        e.f64s(&c.shell_counts);
        e.f64s(&c.occupancy);
        e.f64s(&c.rel_speed);
        e.f64s(&c.flux_counts);
        e.u64(c.snapshots);
        e.f64(c.window);
        e.f64s(&self.afc.far);
        e.f64s(&self.afc.marginal);
        e.u64(self.afc.snapshots);
        e.f64s(&self.field.counts);
        e.u64(self.field.snapshots);
        e.f64s(&self.vanhove.counts);
        e.f64s(&self.vanhove.counts_sq);
        e.u64(self.vanhove.snapshots);
        e.usize(self.xvx.len());
        for h in &self.xvx {
            hist_encode(h, e);
        }
        e.u64(self.pair_events);
        e.u64(self.wall_events);
        e.u64(self.replicas);
    }

    /// Fills a copy of `template` (built with the same config) from the
    /// decoder, checking every array length.
    pub fn decode(template: &Self, d: &mut Decoder) -> Result<Self> {
        let mut s = template.clone();
        hist_decode(&mut s.f1, d)?;
        s.klimontovich_mass = d.f64()?;
        let c = &mut s.contact;
        fill(&mut c.shell_counts, d)?;
        fill(&mut c.occupancy, d)?;
        fill(&mut c.rel_speed, d)?;
        fill(&mut c.flux_counts, d)?;
        c.snapshots = d.u64()?;
        c.window = d.f64()?;
        fill(&mut s.afc.far, d)?;
        fill(&mut s.afc.marginal, d)?;
        s.afc.snapshots = d.u64()?;
        fill(&mut s.field.counts, d)?;
        s.field.snapshots = d.u64()?;
        fill(&mut s.vanhove.counts, d)?;
        fill(&mut s.vanhove.counts_sq, d)?;
        s.vanhove.snapshots = d.u64()?;
        if d.usize()? != s.xvx.len() {
            return Err(Error::Format("residual series length mismatch".into()));
        }
        for h in s.xvx.iter_mut() {
            hist_decode(h, d)?;
        }
        s.pair_events = d.u64()?;
        s.wall_events = d.u64()?;
        s.replicas = d.u64()?;
        Ok(s)
    }
}

fn fill(dst: &mut [f64], d: &mut Decoder) -> Result<()> {
    let v = d.f64s()?;
    if v.len() != dst.len() {
        return Err(Error::Format(format!("array length {} does not match binning ({})", v.len(), dst.len())));
    }
    dst.copy_from_slice(&v);
    Ok(())
}

fn hist_encode(h: &PhaseHistogram, e: &mut Encoder) {
    e.f64s(&h.edges_a);
    e.f64s(&h.edges_b);
    e.f64s(&h.mass);
    e.u64s(&h.counts);
    e.f64(h.overflow_mass);
    e.u64(h.overflow_count);
    e.f64(h.outside_mass);
    e.u64(h.snapshots);
    e.u64(h.replicas);
}

fn hist_decode(h: &mut PhaseHistogram, d: &mut Decoder) -> Result<()> {
    if d.f64s()? != h.edges_a || d.f64s()? != h.edges_b {
        return Err(Error::Format("histogram edges differ from the configured binning".into()));
    }
    fill(&mut h.mass, d)?;
    let counts = d.u64s()?;
    if counts.len() != h.counts.len() {
        return Err(Error::Format("histogram count length mismatch".into()));
    }
    h.counts = counts;
    h.overflow_mass = d.f64()?;
    h.overflow_count = d.u64()?;
    h.outside_mass = d.f64()?;
    h.snapshots = d.u64()?;
    h.replicas = d.u64()?;
    Ok(())
}

impl Observer for EstimatorSet {
    fn on_event(&mut self, rec: &EventRecord) {
        match rec.kind {
            LoggedKind::Pair => self.pair_events += 1,
            LoggedKind::Wall => self.wall_events += 1,
        }
        self.contact.accumulate_event(rec);
    }

    fn on_sample(&mut self, state: &SystemState) {
        let t = state.time;
        let is_snapshot = self.snapshot_times.contains(&t);
        let residual = self.residual_times.iter().position(|&s| s == t);
        if !is_snapshot && residual.is_none() {
            return;
        }
        let sample = klimontovich_points(state, &self.params, &self.domain);
        if let Some(k) = residual {
            self.xvx[k].accumulate(&sample);
        }
        if is_snapshot {
            self.f1.accumulate(&sample);
            self.klimontovich_mass += sample.total_weight();
            let pos = state.positions();
            let vel: Vec<_> = state.particles.iter().map(|p| p.velocity).collect();
            let r = self.domain.wall_radius();
            self.contact.accumulate_state(&pos, &vel, r);
            self.afc.accumulate_state(&pos, &vel, r);
            self.field.accumulate_positions(&pos);
            self.vanhove.accumulate_positions(&pos);
        }
    }
}

impl Accumulator for EstimatorSet {
    fn merge(&mut self, other: Self) {
        self.merge_from(&other).expect("estimator sets built from one config share binning");
    }
}
