//! Domain types shared by every other module: the spherical container, the
//! model parameters under Boltzmann-Grad scaling, particle/system states,
//! admissibility and the strong occupation indicator.

use crate::error::{Error, Result};
use crate::spatial::CellList;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_PACKING_CAP: f64 = 0.25;

/// Spherical container of radius `wall_radius` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    wall_radius: f64,
}

impl DomainSpec {
    pub fn new(wall_radius: f64) -> Result<Self> {
        if !(wall_radius.is_finite() && wall_radius > 0.0) {
            return Err(Error::Domain(format!("wall radius must be positive, got {wall_radius}")));
        }
        Ok(DomainSpec { wall_radius })
    }

    /// Domain whose volume equals `volume`.
    pub fn with_volume(volume: f64) -> Result<Self> {
        Self::new((3.0 * volume / (4.0 * PI)).cbrt())
    }

    pub fn wall_radius(&self) -> f64 {
        self.wall_radius
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.wall_radius.powi(3)
    }

    /// Largest admissible centre radius for spheres of diameter `d`.
    pub fn contact_radius(&self, d: f64) -> f64 {
        self.wall_radius - 0.5 * d
    }

    /// Volume accessible to particle centres.
    pub fn accessible_volume(&self, d: f64) -> f64 {
        4.0 / 3.0 * PI * self.contact_radius(d).max(0.0).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiameterRule {
    /// `d = c / sqrt(N)`.
    BoltzmannGrad {
        c: f64,
    },
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub d: f64,
    pub rule: DiameterRule,
    /// Metadata only: equal-mass trajectories do not depend on it.
    pub mass: f64,
    pub temperature: f64,
    pub packing_cap: f64,
    /// Volume of the domain the parameters were built against.
    pub volume: f64,
}

impl ModelParams {
    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `N d^2 / V`.
    pub fn k1(&self) -> f64 {
        self.n as f64 * self.d * self.d / self.volume
    }

    /// `m N / V`.
    pub fn k2(&self) -> f64 {
        self.mass * self.n as f64 / self.volume
    }

    /// Average volume fraction `4 pi N d^3 / (3 V)`.
    pub fn eta_bar(&self) -> f64 {
        eta_bar(self.n, self.d, self.volume)
    }

    pub fn c(&self) -> Option<f64> {
        match self.rule {
            DiameterRule::BoltzmannGrad { c } => Some(c),
            DiameterRule::Direct => None,
        }
    }

    pub fn number_density(&self) -> f64 {
        self.n as f64 / self.volume
    }

    /// Mean thermal speed `sqrt(8 T / pi)` at unit mass.
    pub fn mean_speed(&self) -> f64 {
        (8.0 * self.temperature / PI).sqrt()
    }

    /// Dilute-gas per-particle collision frequency `sqrt(2) pi n d^2 vbar`
    /// with `n = N / V`.
    pub fn dilute_collision_rate(&self) -> f64 {
        std::f64::consts::SQRT_2 * PI * self.number_density() * self.d * self.d * self.mean_speed()
    }

    pub fn mean_collision_time(&self) -> f64 {
        1.0 / self.dilute_collision_rate()
    }
}

fn eta_bar(n: usize, d: f64, volume: f64) -> f64 {
    4.0 * PI * n as f64 * d.powi(3) / (3.0 * volume)
}

/// Builder for [`ModelParams`]; validation happens in [`ParamsBuilder::build`].
#[derive(Debug, Clone)]
pub struct ParamsBuilder {
    n: usize,
    domain: DomainSpec,
    rule: Option<(DiameterRule, f64)>,
    temperature: f64,
    mass: f64,
    packing_cap: f64,
}

impl ParamsBuilder {
    pub fn new(n: usize, domain: DomainSpec) -> Self {
        ParamsBuilder { n, domain, rule: None, temperature: 1.0, mass: 1.0, packing_cap: DEFAULT_PACKING_CAP }
    }

    pub fn boltzmann_grad(mut self, c: f64) -> Self {
        self.rule = Some((DiameterRule::BoltzmannGrad { c }, c));
        self
    }

    pub fn diameter(mut self, d: f64) -> Self {
        self.rule = Some((DiameterRule::Direct, d));
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn mass(mut self, m: f64) -> Self {
        self.mass = m;
        self
    }

    pub fn packing_cap(mut self, cap: f64) -> Self {
        self.packing_cap = cap;
        self
    }

    pub fn build(self) -> Result<ModelParams> {
        if self.n == 0 {
            return Err(Error::InvalidParam("N must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParam(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidParam(format!("mass must be positive, got {}", self.mass)));
        }
        let (rule, value) = self.rule.ok_or_else(|| Error::InvalidParam("either c or d must be given".into()))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParam(format!("c/d must be positive, got {value}")));
        }
        let d = match rule {
            DiameterRule::BoltzmannGrad { c } => c / (self.n as f64).sqrt(),
            DiameterRule::Direct => value,
        };
        let r_o = self.domain.wall_radius();
        if d >= r_o {
            return Err(Error::Domain(format!("diameter {d} does not fit in wall radius {r_o}")));
        }
        let volume = self.domain.volume();
        let eta = eta_bar(self.n, d, volume);
        if eta >= self.packing_cap {
            return Err(Error::Packing { eta_bar: eta, cap: self.packing_cap });
        }
        Ok(ModelParams {
            n: self.n,
            d,
            rule,
            mass: self.mass,
            temperature: self.temperature,
            packing_cap: self.packing_cap,
            volume,
        })
    }
}

/// Parameters in Boltzmann-Grad mode with the default packing cap.
pub fn make_params(n: usize, c: f64, domain: &DomainSpec, temperature: f64) -> Result<ModelParams> {
    ParamsBuilder::new(n, *domain).boltzmann_grad(c).temperature(temperature).build()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl ParticleState {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        ParticleState { position, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub particles: Vec<ParticleState>,
    pub time: f64,
    pub collision_counter: Vec<u64>,
}

impl SystemState {
    pub fn new(particles: Vec<ParticleState>, time: f64) -> Self {
        let n = particles.len();
        SystemState { particles, time, collision_counter: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.particles.iter().map(|p| p.position).collect()
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.particles.iter().map(|p| p.velocity.norm_sq()).sum::<f64>()
    }

    pub fn momentum(&self) -> Vec3 {
        self.particles.iter().fold(Vec3::ZERO, |acc, p| acc + p.velocity)
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.particles.iter().all(ParticleState::is_finite)
    }
}

/// `true` iff every pair is at least `d` apart and every centre lies within
/// the contact radius. Both inequalities are inclusive.
pub fn is_admissible(state: &SystemState, params: &ModelParams, domain: &DomainSpec) -> bool {
    let d = params.d;
    let rc = domain.contact_radius(d);
    if state.particles.iter().any(|p| p.position.norm() > rc) {
        return false;
    }
    min_pair_distance(&state.positions(), d, domain.wall_radius()).is_none_or(|m| m >= d)
}

/// Smallest pair separation below `probe` (or `None` if no pair is that
/// close). Uses a cell list, so cost is linear in N at low density.
pub fn min_pair_distance(positions: &[Vec3], probe: f64, half_extent: f64) -> Option<f64> {
    if positions.len() < 2 {
        return None;
    }
    // Inflate slightly so pairs at exactly `probe` are enumerated.
    let cutoff = probe * (1.0 + 1e-9);
    let cells = CellList::build(positions, half_extent, cutoff);
    let mut min: Option<f64> = None;
    cells.for_each_pair_within(positions, cutoff, |_, _, r| {
        min = Some(min.map_or(r, |m: f64| m.min(r)));
    });
    min
}

/// `|r_i - r_j| - d`.
pub fn pair_gap(state: &SystemState, i: usize, j: usize, d: f64) -> Result<f64> {
    let n = state.len();
    if i >= n || j >= n || i == j {
        return Err(Error::Index { i, j, n });
    }
    Ok((state.particles[i].position - state.particles[j].position).norm() - d)
}

/// Strong occupation indicator at `point`.
///
/// Returns 1 iff the point is strictly farther than `d` from every particle
/// centre (other than `exclude`) and strictly farther than `d/2` from the
/// wall. With the strong step `Theta(0) = 1` the exclusion terms fire at
/// equality, so exact contact gives 0.
pub fn occupation_indicator(
    point: Vec3,
    state: &SystemState,
    params: &ModelParams,
    domain: &DomainSpec,
    exclude: Option<usize>,
) -> u8 {
    let d = params.d;
    let wall_distance = domain.wall_radius() - point.norm();
    if wall_distance <= 0.5 * d {
        return 0;
    }
    let blocked = state
        .particles
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .any(|(_, p)| (point - p.position).norm() <= d);
    u8::from(!blocked)
}

/// Occupation indicator of every particle at its own position, computed with
/// a cell list.
pub fn self_occupation(positions: &[Vec3], d: f64, domain: &DomainSpec) -> Vec<u8> {
    let rc = domain.contact_radius(d);
    let mut occ: Vec<u8> = positions.iter().map(|p| u8::from(p.norm() < rc)).collect();
    if positions.len() > 1 {
        let cutoff = d * (1.0 + 1e-9);
        let cells = CellList::build(positions, domain.wall_radius(), cutoff);
        cells.for_each_pair_within(positions, cutoff, |i, j, r| {
            if r <= d {
                occ[i] = 0;
                occ[j] = 0;
            }
        });
    }
    occ
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_volume() -> DomainSpec {
        DomainSpec::with_volume(1.0).unwrap()
    }

    fn state(points: &[Vec3]) -> SystemState {
        SystemState::new(points.iter().map(|&p| ParticleState::new(p, Vec3::ZERO)).collect(), 0.0)
    }

    #[test]
    fn bg_params_at_unit_volume() {
        let p = make_params(400, 1.0, &unit_volume(), 1.0).unwrap();
        assert!((p.d - 0.05).abs() < 1e-15);
        assert!((p.n as f64 * p.d * p.d - 1.0).abs() < 1e-14);
        assert!((p.k1() - 1.0).abs() < 1e-12);
        assert!((p.epsilon() - 1.0 / 400.0).abs() < 1e-18);
    }

    #[test]
    fn direct_mode_eta_bar() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(1000, dom).diameter(0.02).build().unwrap();
        assert!((dom.volume() - 4.18879).abs() < 1e-5);
        assert!((p.eta_bar() - 8.0e-3).abs() < 1e-12);
    }

    #[test]
    fn oversized_sphere_is_domain_error() {
        let err = make_params(4, 10.0, &unit_volume(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn packing_cap_rejects() {
        let dom = DomainSpec::new(1.0).unwrap();
        let err = ParamsBuilder::new(1000, dom).diameter(0.07).build().unwrap_err();
        assert!(matches!(err, Error::Packing { .. }));
        assert!(ParamsBuilder::new(1000, dom).diameter(0.07).packing_cap(0.5).build().is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let dom = DomainSpec::new(1.0).unwrap();
        assert!(make_params(0, 1.0, &dom, 1.0).is_err());
        assert!(make_params(10, -1.0, &dom, 1.0).is_err());
        assert!(make_params(10, 0.1, &dom, 0.0).is_err());
        assert!(DomainSpec::new(0.0).is_err());
    }

    #[test]
    fn admissibility_is_inclusive() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(2, dom).diameter(0.1).build().unwrap();
        let s = state(&[Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0)]);
        assert!(is_admissible(&s, &p, &dom));
        let s = state(&[Vec3::ZERO, Vec3::new(0.099, 0.0, 0.0)]);
        assert!(!is_admissible(&s, &p, &dom));
        let s = state(&[Vec3::new(1.0 - 0.05, 0.0, 0.0)]);
        let p1 = ParamsBuilder::new(1, dom).diameter(0.1).build().unwrap();
        assert!(is_admissible(&s, &p1, &dom));
        let s = state(&[Vec3::new(1.0 - 0.049, 0.0, 0.0)]);
        assert!(!is_admissible(&s, &p1, &dom));
    }

    #[test]
    fn gaps() {
        let d = 0.1;
        let s = state(&[Vec3::ZERO, Vec3::new(3.0 * d, 0.0, 0.0), Vec3::ZERO]);
        assert!((pair_gap(&s, 0, 1, d).unwrap() - 2.0 * d).abs() < 1e-15);
        assert_eq!(pair_gap(&s, 0, 2, d).unwrap(), -d);
        assert!(matches!(pair_gap(&s, 0, 3, d), Err(Error::Index { .. })));
        assert!(matches!(pair_gap(&s, 1, 1, d), Err(Error::Index { .. })));
        let s = state(&[Vec3::ZERO, Vec3::new(0.0, d, 0.0)]);
        assert_eq!(pair_gap(&s, 0, 1, d).unwrap(), 0.0);
    }

    #[test]
    fn occupation_strong_convention() {
        let dom = DomainSpec::new(1.0).unwrap();
        let d = 0.125;
        let p = ParamsBuilder::new(2, dom).diameter(d).build().unwrap();
        let s = state(&[Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0)]);
        // nearest particle at 2d, wall far
        assert_eq!(occupation_indicator(Vec3::new(0.0, 0.25, 0.0), &s, &p, &dom, None), 1);
        // exactly d from particle 1
        assert_eq!(occupation_indicator(Vec3::new(0.5, 0.125, 0.0), &s, &p, &dom, None), 0);
        // excluded particle is ignored
        assert_eq!(occupation_indicator(Vec3::new(0.5, 0.0, 0.0), &s, &p, &dom, Some(1)), 1);
        // wall distance exactly d/2
        assert_eq!(occupation_indicator(Vec3::new(0.0, 0.0, -0.9375), &s, &p, &dom, None), 0);
        assert_eq!(occupation_indicator(Vec3::new(0.0, 0.0, -0.93), &s, &p, &dom, None), 1);
    }

    #[test]
    fn self_occupation_matches_pointwise() {
        let dom = DomainSpec::new(1.0).unwrap();
        let d = 0.125;
        let pts = [Vec3::ZERO, Vec3::new(0.125, 0.0, 0.0), Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.0, 0.0, 0.9375)];
        let p = ParamsBuilder::new(pts.len(), dom).diameter(d).build().unwrap();
        let s = state(&pts);
        let fast = self_occupation(&pts, d, &dom);
        let slow: Vec<u8> = (0..pts.len()).map(|i| occupation_indicator(pts[i], &s, &p, &dom, Some(i))).collect();
        assert_eq!(fast, slow);
        assert_eq!(fast, vec![0, 0, 1, 0]);
    }
}
