//! Collision prediction and elastic resolution for equal-mass hard spheres.

use crate::error::{Error, Result};
use crate::model::{DomainSpec, ParticleState};
use crate::vec3::Vec3;

/// Gap tolerance, as a fraction of `d`, used by every contact and overlap test.
pub const CONTACT_TOL: f64 = 1e-9;

/// Root of `|r + v t| = d` for an approaching pair, given `r = r_a - r_b` and
/// `v = v_a - v_b`. No overlap check.
#[inline]
pub(crate) fn pair_root(r: Vec3, v: Vec3, d: f64) -> Option<f64> {
    let b = r.dot(v);
    if b >= 0.0 {
        return None;
    }
    let q = r.norm_sq() - d * d;
    if q <= 0.0 {
        return Some(0.0);
    }
    let a = v.norm_sq();
    let disc = b * b - a * q;
    if disc < 0.0 {
        return None;
    }
    Some(q / (-b + disc.sqrt()))
}

/// Time offset until `a` and `b` touch while approaching, or `None`.
pub fn predict_pair_collision(a: &ParticleState, b: &ParticleState, d: f64) -> Result<Option<f64>> {
    let r = a.position - b.position;
    let gap = r.norm() - d;
    if gap < -CONTACT_TOL * d {
        return Err(Error::Overlap { time: f64::NAN, i: 0, j: 1, gap, dump: String::new() });
    }
    Ok(pair_root(r, a.velocity - b.velocity, d))
}

#[inline]
pub(crate) fn wall_root(r: Vec3, v: Vec3, rc: f64) -> Option<f64> {
    let a = v.norm_sq();
    if a == 0.0 {
        return None;
    }
    let b = r.dot(v);
    let q = r.norm_sq() - rc * rc;
    let disc = (b * b - a * q).max(0.0);
    if b > 0.0 {
        Some((-q / (b + disc.sqrt())).max(0.0))
    } else {
        Some((-b + disc.sqrt()) / a)
    }
}

/// Time offset until `a` reaches the contact radius moving outward.
pub fn predict_wall_collision(a: &ParticleState, domain: &DomainSpec, d: f64) -> Option<f64> {
    wall_root(a.position, a.velocity, domain.contact_radius(d))
}

/// Sign convention used when resolving a pair; `Flipped` is a deliberately
/// wrong law for exercising the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionLaw {
    #[default]
    Elastic,
    Flipped,
}

pub(crate) fn apply_pair_law(a: &mut Vec3, b: &mut Vec3, n: Vec3, law: CollisionLaw) {
    let vn = (*a - *b).dot(n);
    let impulse = match law {
        CollisionLaw::Elastic => n * vn,
        CollisionLaw::Flipped => -(n * vn),
    };
    *a -= impulse;
    *b += impulse;
}

/// Elastic equal-mass collision of two touching spheres.
pub fn resolve_pair_collision(a: &ParticleState, b: &ParticleState, d: f64) -> Result<(ParticleState, ParticleState)> {
    let r = a.position - b.position;
    let dist = r.norm();
    let gap = dist - d;
    if gap.abs() > CONTACT_TOL * d {
        return Err(Error::NotInContact { gap });
    }
    let n = r.unit_with_norm(dist);
    let vn = (a.velocity - b.velocity).dot(n);
    if vn > 0.0 {
        return Err(Error::Receding { vn });
    }
    let (mut va, mut vb) = (a.velocity, b.velocity);
    apply_pair_law(&mut va, &mut vb, n, CollisionLaw::Elastic);
    Ok((ParticleState::new(a.position, va), ParticleState::new(b.position, vb)))
}

#[inline]
pub(crate) fn reflect(r: Vec3, v: Vec3) -> Vec3 {
    let n = r.unit_with_norm(r.norm());
    v - n * (2.0 * v.dot(n))
}

/// Specular reflection at the container wall.
pub fn resolve_wall_collision(a: &ParticleState, domain: &DomainSpec, d: f64) -> Result<ParticleState> {
    let rc = domain.contact_radius(d);
    let dr = a.position.norm() - rc;
    if dr.abs() > CONTACT_TOL * d {
        return Err(Error::NotAtWall(format!("radial offset {dr:.3e} from contact radius")));
    }
    if a.velocity.dot(a.position) < 0.0 {
        return Err(Error::NotAtWall("velocity points inward".into()));
    }
    Ok(ParticleState::new(a.position, reflect(a.position, a.velocity)))
}
