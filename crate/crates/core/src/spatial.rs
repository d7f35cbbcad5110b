//! Static cell list over the bounding cube of the spherical domain.
//!
//! Built once per snapshot; used for near-pair enumeration by the
//! admissibility checks and by the estimators. The event engine keeps its
//! own incrementally updated grid (see `dynamics::grid`).

use crate::vec3::Vec3;

pub struct CellList {
    lo: f64,
    edge: f64,
    per_axis: usize,
    /// Particle indices sorted by cell; cell `c` owns `order[start[c]..start[c + 1]]`.
    start: Vec<u32>,
    order: Vec<u32>,
}

impl CellList {
    /// `half_extent` is the half side of the bounding cube centred at the
    /// origin; `min_edge` the smallest admissible cell edge (usually the
    /// interaction cutoff). The cell count is capped near `2N` so sparse
    /// systems with a tiny cutoff stay cheap.
    pub fn build(positions: &[Vec3], half_extent: f64, min_edge: f64) -> Self {
        let side = 2.0 * half_extent;
        let cap = ((2 * positions.len().max(1)) as f64).cbrt().ceil() as usize;
        let per_axis = ((side / min_edge.max(f64::MIN_POSITIVE)).floor() as usize).clamp(1, cap.clamp(1, 128));
        let edge = side / per_axis as f64;
        let mut list = CellList { lo: -half_extent, edge, per_axis, start: Vec::new(), order: Vec::new() };
        let cells: Vec<usize> = positions.iter().map(|p| list.flat(list.cell_of(*p))).collect();
        let mut start = vec![0u32; per_axis * per_axis * per_axis + 1];
        for &c in &cells {
            start[c + 1] += 1;
        }
        for k in 1..start.len() {
            start[k] += start[k - 1];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; positions.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        list.start = start;
        list.order = order;
        list
    }

    fn coord(&self, x: f64) -> usize {
        let c = ((x - self.lo) / self.edge).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.per_axis - 1)
        }
    }

    fn cell_of(&self, p: Vec3) -> [usize; 3] {
        [self.coord(p[0]), self.coord(p[1]), self.coord(p[2])]
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.per_axis + c[1]) * self.per_axis + c[2]
    }

    /// Visits every particle whose cell neighbours the cell of `point`
    /// (27-cell stencil). Candidates only; callers test the distance.
    pub fn for_each_candidate(&self, point: Vec3, mut f: impl FnMut(usize)) {
        let c = self.cell_of(point);
        let lo = |k: usize| c[k].saturating_sub(1);
        let hi = |k: usize| (c[k] + 1).min(self.per_axis - 1);
        for x in lo(0)..=hi(0) {
            for y in lo(1)..=hi(1) {
                for z in lo(2)..=hi(2) {
                    let c = self.flat([x, y, z]);
                    for &j in &self.order[self.start[c] as usize..self.start[c + 1] as usize] {
                        f(j as usize);
                    }
                }
            }
        }
    }

    /// Visits every unordered pair `(i, j)`, `i < j`, with separation below
    /// `cutoff`, passing the separation. `cutoff` must not exceed the edge.
    pub fn for_each_pair_within(&self, positions: &[Vec3], cutoff: f64, mut f: impl FnMut(usize, usize, f64)) {
        debug_assert!(cutoff <= self.edge * (1.0 + 1e-12) || self.per_axis == 1);
        let cut_sq = cutoff * cutoff;
        for (i, &p) in positions.iter().enumerate() {
            self.for_each_candidate(p, |j| {
                if j > i {
                    let r2 = (p - positions[j]).norm_sq();
                    if r2 < cut_sq {
                        f(i, j, r2.sqrt());
                    }
                }
            });
        }
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_enumeration_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let cutoff = 0.15;
        let cl = CellList::build(&pts, 1.0, cutoff);
        let mut fast = Vec::new();
        cl.for_each_pair_within(&pts, cutoff, |i, j, _| fast.push((i, j)));
        fast.sort_unstable();
        let mut slow = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (pts[i] - pts[j]).norm() < cutoff {
                    slow.push((i, j));
                }
            }
        }
        assert_eq!(fast, slow);
    }
}
