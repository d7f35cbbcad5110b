//! Closed-form collision times against bisection on the distance function.

use hsbg::dynamics::{predict_pair_collision, predict_wall_collision};
use hsbg::{DomainSpec, ParticleState, Vec3};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #[test]
    fn pair_time_matches_bisection(ra in vec3(), rb in vec3(), va in vec3(), vb in vec3(), d in 0.05..0.3f64) {
        let dr = ra - rb;
        prop_assume!(dr.norm() > d * 1.01);
        let dv = va - vb;
        prop_assume!(dv.norm() > 1e-3);
        let dist = |t: f64| (dr + dv * t).norm() - d;
        // closest approach of the relative straight line
        let t_star = -dr.dot(dv) / dv.dot(dv);
        let got = predict_pair_collision(&ParticleState::new(ra, va), &ParticleState::new(rb, vb), d).unwrap();
        if t_star <= 0.0 || dist(t_star) > 1e-6 * d {
            prop_assert!(got.is_none(), "predicted {got:?} for a miss");
        } else {
            prop_assume!(dist(t_star) < -1e-6 * d);
            let t = bisect(0.0, t_star, dist);
            let got = got.expect("collision predicted");
            prop_assert!((got - t).abs() <= 1e-9 * (1.0 + t), "{got} vs {t}");
        }
    }

    #[test]
    fn wall_time_matches_bisection(r in vec3(), v in vec3(), d in 0.01..0.2f64) {
        let dom = DomainSpec::new(2.0).unwrap();
        let rc = dom.contact_radius(d);
        prop_assume!(r.norm() < rc * 0.999);
        prop_assume!(v.norm() > 1e-3);
        let f = |t: f64| rc - (r + v * t).norm();
        let mut hi = 1.0;
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        let t = bisect(0.0, hi, f);
        let got = predict_wall_collision(&ParticleState::new(r, v), &dom, d).unwrap();
        prop_assert!((got - t).abs() <= 1e-9 * (1.0 + t), "{got} vs {t}");
    }
}
