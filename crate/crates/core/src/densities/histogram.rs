//! Klimontovich samples and phase-space histograms on 2-D projections of
//! the one-particle phase space.

use crate::error::{Error, Result};
use crate::model::{self_occupation, DomainSpec, ModelParams, SystemState};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlimontovichSample {
    pub time: f64,
    pub points: Vec<KPoint>,
}

impl KlimontovichSample {
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

/// One point per particle, weighted `1/N` times its strong occupation
/// indicator (0 at or inside contact with another sphere or the wall).
pub fn klimontovich_points(state: &SystemState, params: &ModelParams, domain: &DomainSpec) -> KlimontovichSample {
    let positions = state.positions();
    let occ = self_occupation(&positions, params.d, domain);
    let w = 1.0 / params.n as f64;
    KlimontovichSample {
        time: state.time,
        points: state
            .particles
            .iter()
            .zip(occ)
            .map(|(p, o)| KPoint { position: p.position, velocity: p.velocity, weight: if o == 1 { w } else { 0.0 } })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Projection {
    /// `(|r|, |v|)`.
    RadialSpeed,
    /// `(x, v_x)` restricted to the cylinder `y^2 + z^2 < rho_max^2`.
    XVx { rho_max: f64 },
}

impl Projection {
    pub fn name(&self) -> &'static str {
        match self {
            Projection::RadialSpeed => "radial_speed",
            Projection::XVx { .. } => "x_vx",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseHistogram {
    pub projection: Projection,
    pub edges_a: Vec<f64>,
    pub edges_b: Vec<f64>,
    pub mass: Vec<f64>,
    pub counts: Vec<u64>,
    /// Weight of points whose velocity coordinate lies outside the edges.
    pub overflow_mass: f64,
    pub overflow_count: u64,
    /// Weight of points outside the spatial window of the projection.
    pub outside_mass: f64,
    pub snapshots: u64,
    pub replicas: u64,
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

fn locate(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0] && x < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

impl PhaseHistogram {
    pub fn new(projection: Projection, edges_a: Vec<f64>, edges_b: Vec<f64>) -> Result<Self> {
        for e in [&edges_a, &edges_b] {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParam("histogram edges must be strictly increasing".into()));
            }
        }
        let bins = (edges_a.len() - 1) * (edges_b.len() - 1);
        Ok(PhaseHistogram {
            projection,
            edges_a,
            edges_b,
            mass: vec![0.0; bins],
            counts: vec![0; bins],
            overflow_mass: 0.0,
            overflow_count: 0,
            outside_mass: 0.0,
            snapshots: 0,
            replicas: 0,
        })
    }

    pub fn radial_speed(wall_radius: f64, r_bins: usize, speed_max: f64, s_bins: usize) -> Self {
        Self::new(
            Projection::RadialSpeed,
            uniform_edges(0.0, wall_radius, r_bins),
            uniform_edges(0.0, speed_max, s_bins),
        )
        .expect("uniform edges")
    }

    pub fn x_vx(x_max: f64, x_bins: usize, rho_max: f64, v_max: f64, v_bins: usize) -> Self {
        Self::new(
            Projection::XVx { rho_max },
            uniform_edges(-x_max, x_max, x_bins),
            uniform_edges(-v_max, v_max, v_bins),
        )
        .expect("uniform edges")
    }

    pub fn bins_a(&self) -> usize {
        self.edges_a.len() - 1
    }

    pub fn bins_b(&self) -> usize {
        self.edges_b.len() - 1
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.bins_b() + b
    }

    pub fn same_binning(&self, o: &Self) -> bool {
        self.projection == o.projection && self.edges_a == o.edges_a && self.edges_b == o.edges_b
    }

    pub fn center_b(&self, b: usize) -> f64 {
        0.5 * (self.edges_b[b] + self.edges_b[b + 1])
    }

    pub fn center_a(&self, a: usize) -> f64 {
        0.5 * (self.edges_a[a] + self.edges_a[a + 1])
    }

    /// Phase-space measure of bin `(a, b)` in the projected coordinates.
    pub fn bin_volume(&self, a: usize, b: usize) -> f64 {
        let (a0, a1) = (self.edges_a[a], self.edges_a[a + 1]);
        let (b0, b1) = (self.edges_b[b], self.edges_b[b + 1]);
        match self.projection {
            Projection::RadialSpeed => {
                (4.0 * PI / 3.0) * (a1.powi(3) - a0.powi(3)) * (4.0 * PI / 3.0) * (b1.powi(3) - b0.powi(3))
            }
            Projection::XVx { .. } => (a1 - a0) * (b1 - b0),
        }
    }

    fn coords(&self, r: Vec3, v: Vec3) -> Option<(f64, f64)> {
        match self.projection {
            Projection::RadialSpeed => Some((r.norm(), v.norm())),
            Projection::XVx { rho_max } => (r[1] * r[1] + r[2] * r[2] < rho_max * rho_max).then_some((r[0], v[0])),
        }
    }

    pub fn add_point(&mut self, r: Vec3, v: Vec3, w: f64) {
        let Some((ca, cb)) = self.coords(r, v) else {
            self.outside_mass += w;
            return;
        };
        let Some(a) = locate(&self.edges_a, ca) else {
            self.outside_mass += w;
            return;
        };
        match locate(&self.edges_b, cb) {
            Some(b) => {
                let k = self.index(a, b);
                self.mass[k] += w;
                self.counts[k] += 1;
            }
            None => {
                self.overflow_mass += w;
                self.overflow_count += 1;
            }
        }
    }

    /// Adds every weighted point of one snapshot.
    pub fn accumulate(&mut self, sample: &KlimontovichSample) {
        for p in &sample.points {
            self.add_point(p.position, p.velocity, p.weight);
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, o: &Self) -> Result<()> {
        if !self.same_binning(o) {
            return Err(Error::InvalidParam("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.mass.iter_mut().zip(&o.mass) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
        self.overflow_mass += o.overflow_mass;
        self.overflow_count += o.overflow_count;
        self.outside_mass += o.outside_mass;
        self.snapshots += o.snapshots;
        self.replicas += o.replicas;
        Ok(())
    }

    /// Normalized density in bin `(a, b)`: mass per snapshot per unit
    /// projected phase-space volume.
    pub fn density(&self, a: usize, b: usize) -> f64 {
        if self.snapshots == 0 {
            return 0.0;
        }
        self.mass[self.index(a, b)] / (self.snapshots as f64 * self.bin_volume(a, b))
    }

    pub fn densities(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.bins_a() {
            for b in 0..self.bins_b() {
                out.push(self.density(a, b));
            }
        }
        out
    }

    /// Mass per snapshot inside the bins.
    pub fn binned_mass(&self) -> f64 {
        if self.snapshots == 0 {
            return 0.0;
        }
        self.mass.iter().sum::<f64>() / self.snapshots as f64
    }

    /// Mass per snapshot including velocity overflow.
    pub fn total_mass(&self) -> f64 {
        if self.snapshots == 0 {
            return 0.0;
        }
        self.binned_mass() + self.overflow_mass / self.snapshots as f64
    }

    /// Warning text when more than 0.1% of the weight fell outside the
    /// velocity edges.
    pub fn overflow_warning(&self) -> Option<String> {
        let all = self.mass.iter().sum::<f64>() + self.overflow_mass;
        (all > 0.0 && self.overflow_mass > 1e-3 * all).then(|| {
            format!(
                "{} histogram: {:.3}% of mass outside velocity range",
                self.projection.name(),
                100.0 * self.overflow_mass / all
            )
        })
    }

    /// Marginal mass per snapshot along the second coordinate.
    pub fn marginal_b(&self) -> Vec<f64> {
        let s = self.snapshots.max(1) as f64;
        (0..self.bins_b()).map(|b| (0..self.bins_a()).map(|a| self.mass[self.index(a, b)]).sum::<f64>() / s).collect()
    }

    /// Marginal mass per snapshot along the first coordinate.
    pub fn marginal_a(&self) -> Vec<f64> {
        let s = self.snapshots.max(1) as f64;
        (0..self.bins_a()).map(|a| (0..self.bins_b()).map(|b| self.mass[self.index(a, b)]).sum::<f64>() / s).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# projection,{}", self.projection.name())?;
        if let Projection::XVx { rho_max } = self.projection {
            writeln!(w, "# rho_max,{rho_max:e}")?;
        }
        writeln!(w, "# edges_a,{}", join(&self.edges_a))?;
        writeln!(w, "# edges_b,{}", join(&self.edges_b))?;
        writeln!(w, "# normalization,mass per snapshot per unit projected phase-space volume")?;
        writeln!(w, "# snapshots,{}", self.snapshots)?;
        writeln!(w, "# replicas,{}", self.replicas)?;
        writeln!(w, "# overflow_mass,{:e}", self.overflow_mass)?;
        writeln!(w, "a_lo,a_hi,b_lo,b_hi,mass,count,density")?;
        for a in 0..self.bins_a() {
            for b in 0..self.bins_b() {
                let k = self.index(a, b);
                writeln!(
                    w,
                    "{:e},{:e},{:e},{:e},{:e},{},{:e}",
                    self.edges_a[a],
                    self.edges_a[a + 1],
                    self.edges_b[b],
                    self.edges_b[b + 1],
                    self.mass[k],
                    self.counts[k],
                    self.density(a, b)
                )?;
            }
        }
        Ok(())
    }
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParamsBuilder, ParticleState};

    #[test]
    fn single_point_lands_in_one_bin() {
        let mut h = PhaseHistogram::radial_speed(1.0, 4, 4.0, 4);
        let s = KlimontovichSample {
            time: 0.0,
            points: vec![KPoint {
                position: Vec3::new(0.3, 0.0, 0.0),
                velocity: Vec3::new(0.0, 1.5, 0.0),
                weight: 0.01,
            }],
        };
        h.accumulate(&s);
        let k = h.index(1, 1);
        assert_eq!(h.mass[k], 0.01);
        assert_eq!(h.mass.iter().filter(|&&m| m != 0.0).count(), 1);
        assert!((h.total_mass() - 0.01).abs() < 1e-18);
    }

    #[test]
    fn klimontovich_contact_pair() {
        let dom = DomainSpec::new(1.0).unwrap();
        let d = 0.125;
        let p = ParamsBuilder::new(4, dom).diameter(d).build().unwrap();
        let pos = [Vec3::ZERO, Vec3::new(0.125, 0.0, 0.0), Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.0, 0.5, 0.0)];
        let s = SystemState::new(pos.iter().map(|&r| ParticleState::new(r, Vec3::ZERO)).collect(), 0.0);
        let k = klimontovich_points(&s, &p, &dom);
        assert_eq!(k.total_weight(), 0.5);
        let free = SystemState::new(pos[2..].iter().map(|&r| ParticleState::new(r, Vec3::ZERO)).collect(), 0.0);
        let p2 = ParamsBuilder::new(2, dom).diameter(d).build().unwrap();
        assert_eq!(klimontovich_points(&free, &p2, &dom).total_weight(), 1.0);
    }

    #[test]
    fn overflow_and_window() {
        let mut h = PhaseHistogram::x_vx(0.5, 4, 0.3, 2.0, 4);
        h.add_point(Vec3::new(0.1, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), 1.0);
        h.add_point(Vec3::new(0.1, 0.4, 0.0), Vec3::new(0.0, 0.0, 0.0), 1.0);
        h.add_point(Vec3::new(0.7, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0), 1.0);
        assert_eq!(h.overflow_mass, 1.0);
        assert_eq!(h.outside_mass, 2.0);
        h.snapshots = 1;
        assert!(h.overflow_warning().is_some());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(PhaseHistogram::new(Projection::RadialSpeed, vec![0.0, 1.0, 1.0], vec![0.0, 1.0]).is_err());
    }
}
