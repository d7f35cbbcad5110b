//! The event-driven engine against a brute-force integrator that rescans
//! every pair and wall after each event.

use hsbg::dynamics::{EngineConfig, EventLog, LoggedKind, Simulation};
use hsbg::ensemble::{initial_state, EnsembleSpec};
use hsbg::{DomainSpec, ParamsBuilder, Vec3};

struct Reference {
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    d: f64,
    rc: f64,
    time: f64,
}

#[derive(Debug, PartialEq)]
enum Hit {
    Pair(usize, usize),
    Wall(usize),
}

impl Reference {
    fn next(&self) -> (f64, Hit) {
        let mut best = (f64::INFINITY, Hit::Wall(usize::MAX));
        let n = self.pos.len();
        for i in 0..n {
            for j in i + 1..n {
                let dr = self.pos[i] - self.pos[j];
                let dv = self.vel[i] - self.vel[j];
                let b = dr.dot(dv);
                if b >= 0.0 {
                    continue;
                }
                let a = dv.dot(dv);
                let disc = b * b - a * (dr.dot(dr) - self.d * self.d);
                if disc < 0.0 {
                    continue;
                }
                let t = ((-b - disc.sqrt()) / a).max(0.0);
                if t < best.0 {
                    best = (t, Hit::Pair(i, j));
                }
            }
            let (r, v) = (self.pos[i], self.vel[i]);
            let a = v.dot(v);
            let b = r.dot(v);
            let disc = b * b - a * (r.dot(r) - self.rc * self.rc);
            let t = ((-b + disc.max(0.0).sqrt()) / a).max(0.0);
            if t < best.0 {
                best = (t, Hit::Wall(i));
            }
        }
        best
    }

    fn step(&mut self) -> (f64, Hit) {
        let (dt, hit) = self.next();
        for (p, v) in self.pos.iter_mut().zip(&self.vel) {
            *p += *v * dt;
        }
        self.time += dt;
        match hit {
            Hit::Pair(i, j) => {
                let n = (self.pos[i] - self.pos[j]) * (1.0 / self.d);
                let vn = (self.vel[i] - self.vel[j]).dot(n);
                self.vel[i] -= n * vn;
                self.vel[j] += n * vn;
            }
            Hit::Wall(i) => {
                let n = self.pos[i] * (1.0 / self.pos[i].norm());
                let vn = self.vel[i].dot(n);
                self.vel[i] -= n * (2.0 * vn);
            }
        }
        (self.time, hit)
    }
}

fn compare(eta: f64, seed: u64, events: usize, use_grid: bool) {
    let domain = DomainSpec::new(1.0).unwrap();
    let n = 27;
    let d = (eta * domain.volume() * 3.0 / (4.0 * std::f64::consts::PI * n as f64)).cbrt();
    let params = ParamsBuilder::new(n, domain).diameter(d).build().unwrap();
    let spec = EnsembleSpec::new(params, domain, 1, 1.0, seed);
    let state = initial_state(&spec, 0).unwrap();

    let cfg = EngineConfig { use_grid, ..Default::default() };
    let mut sim = Simulation::new(&state, &params, &domain, cfg).unwrap();
    let mut log = EventLog::new();
    sim.run_events(events as u64, &mut log).unwrap();

    let mut reference = Reference {
        pos: state.particles.iter().map(|p| p.position).collect(),
        vel: state.particles.iter().map(|p| p.velocity).collect(),
        d,
        rc: domain.contact_radius(d),
        time: 0.0,
    };
    assert_eq!(log.len(), events);
    for (k, rec) in log.records.iter().enumerate() {
        let (t, hit) = reference.step();
        let expected = match rec.kind {
            LoggedKind::Pair => {
                let (i, j) = (rec.i as usize, rec.j.unwrap() as usize);
                Hit::Pair(i.min(j), i.max(j))
            }
            LoggedKind::Wall => Hit::Wall(rec.i as usize),
        };
        assert_eq!(hit, expected, "event {k}");
        // rounding differences grow chaotically from event to event
        assert!((t - rec.time).abs() <= 1e-6 * (1.0 + t), "event {k}: {t} vs {}", rec.time);
        let vi = reference.vel[rec.i as usize];
        assert!((vi - rec.post_i).norm() <= 1e-6, "event {k} velocity");
    }
}

#[test]
fn matches_brute_force_with_cell_grid() {
    compare(0.1, 11, 120, true);
}

#[test]
fn matches_brute_force_without_grid() {
    compare(0.1, 12, 120, false);
}

#[test]
fn matches_brute_force_dilute() {
    compare(0.01, 13, 150, true);
}
