//! The event loop.
//!
//! Each particle keeps its position at its own last-collision time. Pair
//! predictions are always made from both particles drifted to the later of
//! their two local times, so a prediction depends only on the two stored
//! states and not on when or why it was requested. Cell crossings change
//! grid membership only; with or without the grid the same physical events
//! are processed with bit-identical arithmetic.

use super::grid::NeighborGrid;
use super::predict::{apply_pair_law, pair_root, reflect, wall_root, CollisionLaw, CONTACT_TOL};
use super::queue::{CollisionEvent, EventKind, EventQueue};
use crate::error::{Error, Result};
use crate::model::{is_admissible, min_pair_distance, DomainSpec, ModelParams, ParticleState, SystemState};
use crate::vec3::Vec3;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub use_grid: bool,
    /// When false particles pass through each other; only wall events occur.
    pub collisions: bool,
    pub law: CollisionLaw,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { use_grid: true, collisions: true, law: CollisionLaw::Elastic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoggedKind {
    Pair,
    Wall,
}

/// One processed collision. For wall events `j` is `None` and the `_j`
/// velocities are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub index: u64,
    pub time: f64,
    pub kind: LoggedKind,
    pub i: u32,
    pub j: Option<u32>,
    pub pre_i: Vec3,
    pub post_i: Vec3,
    pub pre_j: Vec3,
    pub post_j: Vec3,
}

pub trait Observer {
    fn on_event(&mut self, _rec: &EventRecord) {}
    fn on_sample(&mut self, _state: &SystemState) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_event(&mut self, rec: &EventRecord) {
        (**self).on_event(rec)
    }
    fn on_sample(&mut self, state: &SystemState) {
        (**self).on_sample(state)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_event(&mut self, rec: &EventRecord) {
        self.0.on_event(rec);
        self.1.on_event(rec);
    }
    fn on_sample(&mut self, state: &SystemState) {
        self.0.on_sample(state);
        self.1.on_sample(state);
    }
}

/// Running extrema of the per-event invariant checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Max over pair events of the per-component momentum change divided by
    /// `|v_i| + |v_j|`.
    pub max_momentum_drift: f64,
    /// Max over pair events of the relative change in pair kinetic energy.
    pub max_pair_energy_drift: f64,
    /// Max over wall events of the relative change in kinetic energy.
    pub max_wall_energy_drift: f64,
    /// Smallest pair gap seen at an event, in units of `d`.
    pub min_contact_gap: f64,
    /// Smallest wall clearance seen at an event, in units of `d`.
    pub min_wall_clearance: f64,
    pub initial_energy: f64,
}

pub struct Simulation {
    d: f64,
    rc: f64,
    domain: DomainSpec,
    config: EngineConfig,
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    t_local: Vec<f64>,
    counter: Vec<u64>,
    wall_time: Vec<f64>,
    time: f64,
    queue: EventQueue,
    grid: Option<NeighborGrid>,
    pair_events: u64,
    wall_events: u64,
    last_event_time: f64,
    diag: Diagnostics,
}

impl Simulation {
    pub fn new(state: &SystemState, params: &ModelParams, domain: &DomainSpec, config: EngineConfig) -> Result<Self> {
        if state.len() != params.n {
            return Err(Error::InvalidParam(format!(
                "state has {} particles, parameters say {}",
                state.len(),
                params.n
            )));
        }
        if !state.is_finite() {
            return Err(Error::NonFinite { time: state.time, what: "initial state".into() });
        }
        if config.collisions && !is_admissible(state, params, domain) {
            return Err(Error::InvalidParam("initial state is not admissible".into()));
        }
        let d = params.d;
        let pos: Vec<Vec3> = state.particles.iter().map(|p| p.position).collect();
        let vel: Vec<Vec3> = state.particles.iter().map(|p| p.velocity).collect();
        let n = pos.len();
        let grid = (config.use_grid && config.collisions).then(|| NeighborGrid::new(&pos, domain.wall_radius(), d));
        let counter = if state.collision_counter.len() == n { state.collision_counter.clone() } else { vec![0; n] };
        let initial_energy = 0.5 * vel.iter().map(|v| v.norm_sq()).sum::<f64>();
        let mut sim = Simulation {
            d,
            rc: domain.contact_radius(d),
            domain: *domain,
            config,
            pos,
            vel,
            t_local: vec![state.time; n],
            counter,
            wall_time: vec![f64::INFINITY; n],
            time: state.time,
            queue: EventQueue::new(),
            grid,
            pair_events: 0,
            wall_events: 0,
            last_event_time: state.time,
            diag: Diagnostics {
                max_momentum_drift: 0.0,
                max_pair_energy_drift: 0.0,
                max_wall_energy_drift: 0.0,
                min_contact_gap: f64::INFINITY,
                min_wall_clearance: f64::INFINITY,
                initial_energy,
            },
        };
        sim.schedule_all()?;
        Ok(sim)
    }

    fn schedule_all(&mut self) -> Result<()> {
        let n = self.pos.len();
        for i in 0..n {
            self.schedule_wall(i);
            self.schedule_crossing(i);
        }
        if !self.config.collisions {
            return Ok(());
        }
        for i in 0..n {
            let mut partners = Vec::new();
            self.for_each_partner(i, |j| {
                if j > i {
                    partners.push(j)
                }
            });
            for j in partners {
                self.schedule_pair(i, j)?;
            }
        }
        Ok(())
    }

    fn for_each_partner(&self, i: usize, mut f: impl FnMut(usize)) {
        match &self.grid {
            Some(g) => g.for_each_neighbor(i, |j| {
                if j != i {
                    f(j)
                }
            }),
            None => (0..self.pos.len()).filter(|&j| j != i).for_each(f),
        }
    }

    fn schedule_wall(&mut self, i: usize) {
        let t = wall_root(self.pos[i], self.vel[i], self.rc).map_or(f64::INFINITY, |dt| self.t_local[i] + dt);
        self.wall_time[i] = t;
        if t.is_finite() {
            self.queue.push(CollisionEvent {
                time: t,
                kind: EventKind::Wall(i as u32),
                stamp_i: self.counter[i],
                stamp_j: 0,
            });
        }
    }

    fn schedule_crossing(&mut self, i: usize) {
        let Some(g) = &self.grid else { return };
        if let Some((t, _, _)) = g.next_crossing(i, self.pos[i], self.vel[i], self.t_local[i]) {
            self.queue.push(CollisionEvent {
                time: t.max(self.time),
                kind: EventKind::Cell(i as u32),
                stamp_i: self.counter[i],
                stamp_j: 0,
            });
        }
    }

    /// Canonical pair prediction from the stored states of `i` and `j`.
    fn predict_pair(&self, i: usize, j: usize) -> Result<Option<f64>> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let t_ref = self.t_local[a].max(self.t_local[b]);
        let ra = self.pos[a].drift(self.vel[a], t_ref - self.t_local[a]);
        let rb = self.pos[b].drift(self.vel[b], t_ref - self.t_local[b]);
        let r = ra - rb;
        let q = r.norm_sq() - self.d * self.d;
        if q < 0.0 {
            let gap = r.norm() - self.d;
            if gap < -CONTACT_TOL * self.d {
                return Err(self.overlap(t_ref, a, b, gap));
            }
        }
        Ok(pair_root(r, self.vel[a] - self.vel[b], self.d).map(|dt| t_ref + dt))
    }

    fn schedule_pair(&mut self, i: usize, j: usize) -> Result<()> {
        if let Some(t) = self.predict_pair(i, j)? {
            // A pair event later than either particle's next wall event is
            // certain to be invalidated, so it is never queued.
            if t <= self.wall_time[i] && t <= self.wall_time[j] {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                self.queue.push(CollisionEvent {
                    time: t,
                    kind: EventKind::Pair(a as u32, b as u32),
                    stamp_i: self.counter[a],
                    stamp_j: self.counter[b],
                });
            }
        }
        Ok(())
    }

    fn reschedule(&mut self, i: usize, skip: Option<usize>) -> Result<()> {
        self.schedule_crossing(i);
        if !self.config.collisions {
            return Ok(());
        }
        let mut partners = Vec::new();
        self.for_each_partner(i, |j| {
            if Some(j) != skip {
                partners.push(j)
            }
        });
        for j in partners {
            self.schedule_pair(i, j)?;
        }
        Ok(())
    }

    fn is_valid(&self, ev: &CollisionEvent) -> bool {
        match ev.kind {
            EventKind::Pair(i, j) => self.counter[i as usize] == ev.stamp_i && self.counter[j as usize] == ev.stamp_j,
            EventKind::Wall(i) | EventKind::Cell(i) => self.counter[i as usize] == ev.stamp_i,
        }
    }

    fn overlap(&self, time: f64, i: usize, j: usize, gap: f64) -> Error {
        Error::Overlap { time, i, j, gap, dump: self.dump() }
    }

    fn dump(&self) -> String {
        let mut s = format!("# clock {} d {} contact_radius {}\n", self.time, self.d, self.rc);
        s.push_str("# i t_local counter x y z vx vy vz\n");
        for i in 0..self.pos.len() {
            let (p, v) = (self.pos[i], self.vel[i]);
            let _ = writeln!(
                s,
                "{i} {:e} {} {:e} {:e} {:e} {:e} {:e} {:e}",
                self.t_local[i], self.counter[i], p[0], p[1], p[2], v[0], v[1], v[2]
            );
        }
        s
    }

    /// Processes the next valid event if it is not later than `limit`.
    /// Returns `Some(true)` for a collision, `Some(false)` for bookkeeping.
    fn step(&mut self, limit: f64, obs: &mut impl Observer) -> Result<Option<bool>> {
        loop {
            match self.queue.peek() {
                Some(ev) if ev.time <= limit => {}
                _ => return Ok(None),
            }
            let ev = self.queue.pop().expect("peeked");
            if !self.is_valid(&ev) {
                continue;
            }
            let t = ev.time.max(self.time);
            self.time = t;
            return match ev.kind {
                EventKind::Pair(i, j) => self.process_pair(t, i as usize, j as usize, obs).map(|_| Some(true)),
                EventKind::Wall(i) => self.process_wall(t, i as usize, obs).map(|_| Some(true)),
                EventKind::Cell(i) => self.process_cell(i as usize).map(|_| Some(false)),
            };
        }
    }

    fn process_pair(&mut self, t: f64, i: usize, j: usize, obs: &mut impl Observer) -> Result<()> {
        let ri = self.pos[i].drift(self.vel[i], t - self.t_local[i]);
        let rj = self.pos[j].drift(self.vel[j], t - self.t_local[j]);
        let r = ri - rj;
        let dist = r.norm();
        let gap = dist - self.d;
        self.diag.min_contact_gap = self.diag.min_contact_gap.min(gap / self.d);
        if gap < -CONTACT_TOL * self.d {
            return Err(self.overlap(t, i, j, gap));
        }
        let (pre_i, pre_j) = (self.vel[i], self.vel[j]);
        let (mut vi, mut vj) = (pre_i, pre_j);
        apply_pair_law(&mut vi, &mut vj, r.unit_with_norm(dist), self.config.law);
        if !(vi.is_finite() && vj.is_finite()) {
            return Err(Error::NonFinite { time: t, what: format!("velocities after collision of {i} and {j}") });
        }

        let scale = pre_i.norm() + pre_j.norm();
        let dp = (vi + vj) - (pre_i + pre_j);
        let e0 = pre_i.norm_sq() + pre_j.norm_sq();
        let e1 = vi.norm_sq() + vj.norm_sq();
        if scale > 0.0 {
            let m = dp.0.iter().fold(0.0f64, |m, c| m.max(c.abs())) / scale;
            self.diag.max_momentum_drift = self.diag.max_momentum_drift.max(m);
            self.diag.max_pair_energy_drift = self.diag.max_pair_energy_drift.max((e1 - e0).abs() / e0);
        }

        self.pos[i] = ri;
        self.pos[j] = rj;
        self.vel[i] = vi;
        self.vel[j] = vj;
        self.t_local[i] = t;
        self.t_local[j] = t;
        self.counter[i] += 1;
        self.counter[j] += 1;
        self.pair_events += 1;
        self.last_event_time = t;

        let rec = EventRecord {
            index: self.pair_events + self.wall_events - 1,
            time: t,
            kind: LoggedKind::Pair,
            i: i as u32,
            j: Some(j as u32),
            pre_i,
            post_i: vi,
            pre_j,
            post_j: vj,
        };
        obs.on_event(&rec);

        self.schedule_wall(i);
        self.schedule_wall(j);
        self.reschedule(i, Some(j))?;
        self.reschedule(j, Some(i))?;
        Ok(())
    }

    fn process_wall(&mut self, t: f64, i: usize, obs: &mut impl Observer) -> Result<()> {
        let ri = self.pos[i].drift(self.vel[i], t - self.t_local[i]);
        let clearance = self.rc - ri.norm();
        self.diag.min_wall_clearance = self.diag.min_wall_clearance.min(clearance / self.d);
        if clearance < -CONTACT_TOL * self.d {
            return Err(Error::Overlap { time: t, i, j: i, gap: clearance, dump: self.dump() });
        }
        let pre = self.vel[i];
        let post = reflect(ri, pre);
        let e0 = pre.norm_sq();
        if e0 > 0.0 {
            self.diag.max_wall_energy_drift = self.diag.max_wall_energy_drift.max((post.norm_sq() - e0).abs() / e0);
        }
        self.pos[i] = ri;
        self.vel[i] = post;
        self.t_local[i] = t;
        self.counter[i] += 1;
        self.wall_events += 1;
        self.last_event_time = t;

        let rec = EventRecord {
            index: self.pair_events + self.wall_events - 1,
            time: t,
            kind: LoggedKind::Wall,
            i: i as u32,
            j: None,
            pre_i: pre,
            post_i: post,
            pre_j: Vec3::ZERO,
            post_j: Vec3::ZERO,
        };
        obs.on_event(&rec);

        self.schedule_wall(i);
        self.reschedule(i, None)
    }

    fn process_cell(&mut self, i: usize) -> Result<()> {
        let Some(g) = &mut self.grid else { return Ok(()) };
        let Some((_, axis, dir)) = g.next_crossing(i, self.pos[i], self.vel[i], self.t_local[i]) else {
            return Ok(());
        };
        g.shift(i, axis, dir);
        let mut fresh = Vec::new();
        g.for_each_in_new_layer(i, axis, dir, |j| fresh.push(j));
        for j in fresh {
            self.schedule_pair(i, j)?;
        }
        self.schedule_crossing(i);
        Ok(())
    }

    /// Processes every event up to and including `t_target`, then sets the
    /// clock to `t_target`.
    pub fn advance_to(&mut self, t_target: f64, obs: &mut impl Observer) -> Result<()> {
        if t_target < self.time {
            return Err(Error::InvalidParam(format!("target time {t_target} precedes clock {}", self.time)));
        }
        while self.step(t_target, obs)?.is_some() {}
        self.time = t_target;
        Ok(())
    }

    /// Advances to `horizon`, handing a snapshot to the observer at each of
    /// `sample_times` (sorted, within the horizon).
    pub fn run(&mut self, horizon: f64, sample_times: &[f64], obs: &mut impl Observer) -> Result<()> {
        for &ts in sample_times {
            self.advance_to(ts, obs)?;
            obs.on_sample(&self.snapshot());
        }
        self.advance_to(horizon, obs)
    }

    /// Processes exactly `k` collision events (fewer only if none remain) and
    /// leaves the clock at the last one. Returns the number processed.
    pub fn run_events(&mut self, k: u64, obs: &mut impl Observer) -> Result<u64> {
        let mut done = 0;
        while done < k {
            match self.step(f64::INFINITY, obs)? {
                Some(true) => done += 1,
                Some(false) => {}
                None => break,
            }
        }
        self.time = self.last_event_time.max(self.time);
        Ok(done)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.d
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn pair_events(&self) -> u64 {
        self.pair_events
    }

    pub fn wall_events(&self) -> u64 {
        self.wall_events
    }

    pub fn collision_counts(&self) -> &[u64] {
        &self.counter
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.pos[i].drift(self.vel[i], self.time - self.t_local[i])
    }

    pub fn velocity(&self, i: usize) -> Vec3 {
        self.vel[i]
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.vel.iter().map(|v| v.norm_sq()).sum::<f64>()
    }

    pub fn momentum(&self) -> Vec3 {
        self.vel.iter().fold(Vec3::ZERO, |a, &v| a + v)
    }

    /// Relative change of total kinetic energy since construction.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.diag.initial_energy;
        if e0 == 0.0 {
            0.0
        } else {
            (self.kinetic_energy() - e0).abs() / e0
        }
    }

    /// State with every particle drifted to the current clock.
    pub fn snapshot(&self) -> SystemState {
        SystemState {
            particles: (0..self.pos.len()).map(|i| ParticleState::new(self.position(i), self.vel[i])).collect(),
            time: self.time,
            collision_counter: self.counter.clone(),
        }
    }

    /// Smallest pair gap and wall clearance at the current clock, both in
    /// units of `d`.
    pub fn min_separation(&self) -> (f64, f64) {
        let positions: Vec<Vec3> = (0..self.pos.len()).map(|i| self.position(i)).collect();
        let wall = positions.iter().map(|p| (self.rc - p.norm()) / self.d).fold(f64::INFINITY, f64::min);
        let pair = min_pair_distance(&positions, 2.0 * self.d, self.domain.wall_radius())
            .map_or(f64::INFINITY, |m| (m - self.d) / self.d);
        (pair, wall)
    }
}

/// Negates every velocity; the clock is unchanged.
pub fn reverse_velocities(state: &SystemState) -> SystemState {
    let mut s = state.clone();
    for p in &mut s.particles {
        p.velocity = -p.velocity;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamsBuilder;

    fn two_body() -> (SystemState, ModelParams, DomainSpec) {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(2, dom).diameter(0.1).build().unwrap();
        let s = SystemState::new(
            vec![
                ParticleState::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)),
                ParticleState::new(Vec3::new(0.4, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)),
            ],
            0.0,
        );
        (s, p, dom)
    }

    #[derive(Default)]
    struct Collect(Vec<EventRecord>);
    impl Observer for Collect {
        fn on_event(&mut self, r: &EventRecord) {
            self.0.push(*r);
        }
    }

    #[test]
    fn single_particle_free_flight() {
        let dom = DomainSpec::new(1.0).unwrap();
        let p = ParamsBuilder::new(1, dom).diameter(0.1).build().unwrap();
        let v = Vec3::new(0.1, -0.05, 0.02);
        let s = SystemState::new(vec![ParticleState::new(Vec3::new(0.1, 0.2, 0.3), v)], 0.0);
        let mut sim = Simulation::new(&s, &p, &dom, EngineConfig::default()).unwrap();
        sim.advance_to(2.0, &mut ()).unwrap();
        let want = Vec3::new(0.1, 0.2, 0.3).drift(v, 2.0);
        assert!((sim.position(0) - want).norm() < 1e-15);
        assert_eq!(sim.wall_events(), 0);
        assert_eq!(sim.time(), 2.0);
    }

    #[test]
    fn head_on_swaps_velocities() {
        let (s, p, dom) = two_body();
        for use_grid in [true, false] {
            let cfg = EngineConfig { use_grid, ..Default::default() };
            let mut sim = Simulation::new(&s, &p, &dom, cfg).unwrap();
            let mut log = Collect::default();
            sim.advance_to(0.2, &mut log).unwrap();
            assert_eq!(log.0.len(), 1);
            assert!((log.0[0].time - 0.15).abs() < 1e-15);
            assert_eq!(sim.velocity(0), Vec3::new(-1.0, 0.0, 0.0));
            assert_eq!(sim.velocity(1), Vec3::new(1.0, 0.0, 0.0));
            assert!((sim.position(0)[0] - 0.1).abs() < 1e-14);
            assert!((sim.position(1)[0] - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn disabled_collisions_pass_through() {
        let (s, p, dom) = two_body();
        let cfg = EngineConfig { collisions: false, ..Default::default() };
        let mut sim = Simulation::new(&s, &p, &dom, cfg).unwrap();
        sim.advance_to(0.3, &mut ()).unwrap();
        assert_eq!(sim.pair_events(), 0);
        assert!((sim.position(0)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn flipped_law_is_caught() {
        let (s, p, dom) = two_body();
        let cfg = EngineConfig { law: CollisionLaw::Flipped, ..Default::default() };
        let mut sim = Simulation::new(&s, &p, &dom, cfg).unwrap();
        let r = sim.run_events(1, &mut ());
        assert!(r.is_ok());
        assert!(sim.diagnostics().max_pair_energy_drift > 1.0);
        assert!(sim.run_events(100_000, &mut ()).is_err());
    }

    #[test]
    fn reverse_twice_is_identity() {
        let (s, _, _) = two_body();
        let r = reverse_velocities(&s);
        assert_eq!(r.particles[0].velocity, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(reverse_velocities(&r), s);
    }

    #[test]
    fn rejects_overlapping_start() {
        let (mut s, p, dom) = two_body();
        s.particles[1].position = Vec3::new(0.05, 0.0, 0.0);
        assert!(Simulation::new(&s, &p, &dom, EngineConfig::default()).is_err());
    }
}
