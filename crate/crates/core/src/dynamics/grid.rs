//! Incrementally maintained cell decomposition used by the event engine.
//!
//! Membership changes only through cell-crossing pseudo-events, so every
//! colliding pair is a 27-cell neighbor at the moment it is predicted.

use crate::vec3::Vec3;

pub const MAX_CELLS_PER_AXIS: usize = 32;

#[derive(Debug, Clone)]
pub struct NeighborGrid {
    lo: f64,
    edge: f64,
    per_axis: usize,
    cells: Vec<Vec<u32>>,
    of: Vec<[u16; 3]>,
}

impl NeighborGrid {
    /// Grid over the cube `[-half_extent, half_extent]^3` with edge at least
    /// `max(d, 2 half_extent / 32)`.
    pub fn new(positions: &[Vec3], half_extent: f64, d: f64) -> Self {
        let side = 2.0 * half_extent;
        let min_edge = d.max(side / MAX_CELLS_PER_AXIS as f64);
        let per_axis = ((side / min_edge).floor() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let edge = side / per_axis as f64;
        let mut g = NeighborGrid {
            lo: -half_extent,
            edge,
            per_axis,
            cells: vec![Vec::new(); per_axis.pow(3)],
            of: Vec::with_capacity(positions.len()),
        };
        for (i, &p) in positions.iter().enumerate() {
            let c = [g.coord(p[0]), g.coord(p[1]), g.coord(p[2])];
            g.of.push(c);
            let f = g.flat(c);
            g.cells[f].push(i as u32);
        }
        g
    }

    fn coord(&self, x: f64) -> u16 {
        let c = ((x - self.lo) / self.edge).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.per_axis - 1) as u16
        }
    }

    fn flat(&self, c: [u16; 3]) -> usize {
        (c[0] as usize * self.per_axis + c[1] as usize) * self.per_axis + c[2] as usize
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn cell_of(&self, i: usize) -> [u16; 3] {
        self.of[i]
    }

    fn range(&self, c: u16) -> std::ops::RangeInclusive<u16> {
        c.saturating_sub(1)..=(c + 1).min(self.per_axis as u16 - 1)
    }

    /// Every particle in the 27 cells around particle `i`'s cell, `i` included.
    pub fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let c = self.of[i];
        for x in self.range(c[0]) {
            for y in self.range(c[1]) {
                for z in self.range(c[2]) {
                    for &j in &self.cells[self.flat([x, y, z])] {
                        f(j as usize);
                    }
                }
            }
        }
    }

    /// Particles in the layer of cells that became adjacent to `i` after its
    /// last move along `axis` in direction `dir`.
    pub fn for_each_in_new_layer(&self, i: usize, axis: usize, dir: i8, mut f: impl FnMut(usize)) {
        let c = self.of[i];
        let layer = c[axis] as i32 + dir as i32;
        if layer < 0 || layer >= self.per_axis as i32 {
            return;
        }
        let mut lo = [0u16; 3];
        let mut hi = [0u16; 3];
        for k in 0..3 {
            if k == axis {
                lo[k] = layer as u16;
                hi[k] = layer as u16;
            } else {
                lo[k] = c[k].saturating_sub(1);
                hi[k] = (c[k] + 1).min(self.per_axis as u16 - 1);
            }
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    for &j in &self.cells[self.flat([x, y, z])] {
                        f(j as usize);
                    }
                }
            }
        }
    }

    /// Earliest time the straight path `p + v (t - t0)` leaves the current
    /// cell of `i`, with the crossing axis and direction.
    pub fn next_crossing(&self, i: usize, p: Vec3, v: Vec3, t0: f64) -> Option<(f64, usize, i8)> {
        let c = self.of[i];
        let mut best: Option<(f64, usize, i8)> = None;
        for k in 0..3 {
            let vk = v[k];
            let (boundary, dir) = if vk > 0.0 {
                if c[k] as usize + 1 >= self.per_axis {
                    continue;
                }
                (self.lo + (c[k] as f64 + 1.0) * self.edge, 1)
            } else if vk < 0.0 {
                if c[k] == 0 {
                    continue;
                }
                (self.lo + c[k] as f64 * self.edge, -1)
            } else {
                continue;
            };
            let dt = ((boundary - p[k]) / vk).max(0.0);
            if best.is_none_or(|(b, _, _)| dt < b) {
                best = Some((dt, k, dir));
            }
        }
        best.map(|(dt, k, dir)| (t0 + dt, k, dir))
    }

    /// Moves `i` one cell along `axis`.
    pub fn shift(&mut self, i: usize, axis: usize, dir: i8) {
        let old = self.of[i];
        let f = self.flat(old);
        let list = &mut self.cells[f];
        let pos = list.iter().position(|&j| j as usize == i).expect("particle registered in its cell");
        list.swap_remove(pos);
        let mut new = old;
        new[axis] = (old[axis] as i32 + dir as i32) as u16;
        self.of[i] = new;
        let f = self.flat(new);
        self.cells[f].push(i as u32);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_respects_diameter_and_cap() {
        let g = NeighborGrid::new(&[Vec3::ZERO], 1.0, 0.3);
        assert_eq!(g.per_axis(), 6);
        assert!(g.edge() >= 0.3);
        let g = NeighborGrid::new(&[Vec3::ZERO], 1.0, 0.001);
        assert_eq!(g.per_axis(), MAX_CELLS_PER_AXIS);
    }

    #[test]
    fn crossing_and_shift() {
        let pts = [Vec3::new(0.05, 0.05, 0.05), Vec3::new(0.35, 0.05, 0.05)];
        let mut g = NeighborGrid::new(&pts, 1.0, 0.1);
        assert_eq!(g.per_axis(), 20);
        let (t, axis, dir) = g.next_crossing(0, pts[0], Vec3::new(1.0, 0.0, 0.0), 2.0).unwrap();
        assert!((t - 2.05).abs() < 1e-12);
        assert_eq!((axis, dir), (0, 1));
        g.shift(0, axis, dir);
        assert_eq!(g.cell_of(0), [11, 10, 10]);
        let mut seen = Vec::new();
        g.for_each_in_new_layer(0, axis, dir, |j| seen.push(j));
        assert!(seen.is_empty());
        g.shift(0, 0, 1);
        g.for_each_in_new_layer(0, 0, 1, |j| seen.push(j));
        assert_eq!(seen, vec![1]);
    }
}
