//! Partitions of the torus into cells, one per blow-up point.
//!
//! A cell is a union of patches `[s0,s1) × [t0,t1)` in the basis coordinates
//! of the working lattice basis, read modulo 1 in each coordinate.

use crate::lattice::LatticeBasis;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const COVERAGE_GRID: usize = 512;
const AREA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub s: [f64; 2],
    pub t: [f64; 2],
}

impl Patch {
    pub fn new(s0: f64, s1: f64, t0: f64, t1: f64) -> Self {
        Self { s: [s0, s1], t: [t0, t1] }
    }

    pub fn area(&self) -> f64 {
        (self.s[1] - self.s[0]) * (self.t[1] - self.t[0])
    }

    /// The same patch shifted so that `s0, t0 ∈ [0, 1)`.
    fn normalized(&self) -> Self {
        let ds = self.s[0].floor();
        let dt = self.t[0].floor();
        Self::new(self.s[0] - ds, self.s[1] - ds, self.t[0] - dt, self.t[1] - dt)
    }

    fn shifted(&self, ds: f64, dt: f64) -> Self {
        Self::new(self.s[0] + ds, self.s[1] + ds, self.t[0] + dt, self.t[1] + dt)
    }

    fn intersection_area(&self, o: &Patch) -> f64 {
        let ws = (self.s[1].min(o.s[1]) - self.s[0].max(o.s[0])).max(0.0);
        let wt = (self.t[1].min(o.t[1]) - self.t[0].max(o.t[0])).max(0.0);
        ws * wt
    }

    /// Half-open membership of a point already reduced to `[0,1)²`.
    fn contains_mod1(&self, s: f64, t: f64) -> bool {
        let p = self.normalized();
        let in_s = (p.s[0] <= s && s < p.s[1]) || (p.s[0] <= s + 1.0 && s + 1.0 < p.s[1]);
        let in_t = (p.t[0] <= t && t < p.t[1]) || (p.t[0] <= t + 1.0 && t + 1.0 < p.t[1]);
        in_s && in_t
    }

    /// `self ∖ hole` as up to four disjoint patches.
    fn minus(&self, hole: &Patch) -> Vec<Patch> {
        if self.intersection_area(hole) <= 0.0 {
            return vec![*self];
        }
        let mut out = Vec::new();
        let (s0, s1, t0, t1) = (self.s[0], self.s[1], self.t[0], self.t[1]);
        let hs0 = hole.s[0].max(s0);
        let hs1 = hole.s[1].min(s1);
        let ht0 = hole.t[0].max(t0);
        let ht1 = hole.t[1].min(t1);
        if hs0 > s0 {
            out.push(Patch::new(s0, hs0, t0, t1));
        }
        if hs1 < s1 {
            out.push(Patch::new(hs1, s1, t0, t1));
        }
        if ht0 > t0 {
            out.push(Patch::new(hs0, hs1, t0, ht0));
        }
        if ht1 < t1 {
            out.push(Patch::new(hs0, hs1, ht1, t1));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub patches: Vec<Patch>,
    pub q_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub cells: Vec<Cell>,
    pub delta: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("partition has {cells} cells for {points} blow-up points")]
    CellCount { cells: usize, points: usize },
    #[error("cell q_index values must be a permutation of 0..{0}")]
    Indexing(usize),
    #[error("patch {patch:?} in cell {cell} is empty, non-finite or wider than one period")]
    BadPatch { cell: usize, patch: Patch },
    #[error("cell areas sum to {0} (expected 1 within 1e-9)")]
    Area(f64),
    #[error("grid point ({s}, {t}) is covered {times} times")]
    Coverage { s: f64, t: f64, times: usize },
    #[error("ball radius delta = {0:e} must be positive")]
    Delta(f64),
    #[error("ball of radius {delta:e} around blow-up point {q_index} is not compactly inside its cell (largest centered parallelogram has inradius {inradius:e})")]
    BallNotContained { q_index: usize, delta: f64, inradius: f64 },
}

/// Parallelogram `{c + σ·a + τ·b : |σ|, |τ| ≤ 1}` centered on a blow-up point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredParallelogram {
    pub center: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    /// Half-width in basis coordinates.
    pub half_width: f64,
}

impl CenteredParallelogram {
    /// Vertices relative to the center, counter-clockwise.
    pub fn vertices(&self) -> [Complex64; 4] {
        let (a, b) = if (self.b / self.a).im > 0.0 { (self.a, self.b) } else { (self.b, self.a) };
        [a + b, -a + b, -a - b, a - b]
    }

    /// Distance from the center to the nearest edge.
    pub fn inradius(&self) -> f64 {
        let area4 = (self.a.conj() * self.b).im.abs();
        (area4 / self.a.norm()).min(area4 / self.b.norm())
    }
}

/// A cell prepared for integration: the parallelogram around its point and
/// the patches of the cell outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub q_index: usize,
    pub inner: CenteredParallelogram,
    pub outer: Vec<Patch>,
}

fn box_patch(cs: f64, ct: f64, h: f64) -> Patch {
    Patch::new(cs - h, cs + h, ct - h, ct + h)
}

fn covered_area(patches: &[Patch], target: &Patch) -> f64 {
    let mut acc = 0.0;
    for p in patches {
        let p = p.normalized();
        for m in -2..=2 {
            for n in -2..=2 {
                acc += p.shifted(m as f64, n as f64).intersection_area(target);
            }
        }
    }
    acc
}

impl PartitionSpec {
    /// One cell, the whole torus, as a patch centered on `q`.
    pub fn single_cell(basis: &LatticeBasis, q: Complex64, delta: f64) -> Self {
        let (s, t) = basis.reduce(q).coords();
        Self { cells: vec![Cell { patches: vec![box_patch(s, t, 0.5)], q_index: 0 }], delta }
    }

    pub fn validate(&self, basis: &LatticeBasis, q: &[Complex64]) -> Result<(), PartitionError> {
        if self.cells.len() != q.len() {
            return Err(PartitionError::CellCount { cells: self.cells.len(), points: q.len() });
        }
        let mut seen = vec![false; q.len()];
        for c in &self.cells {
            if c.q_index >= q.len() || seen[c.q_index] {
                return Err(PartitionError::Indexing(q.len()));
            }
            seen[c.q_index] = true;
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(PartitionError::Delta(self.delta));
        }
        let mut area = 0.0;
        for (ci, c) in self.cells.iter().enumerate() {
            for p in &c.patches {
                let ws = p.s[1] - p.s[0];
                let wt = p.t[1] - p.t[0];
                let finite = p.s.iter().chain(p.t.iter()).all(|x| x.is_finite());
                if !finite || !(ws > 0.0 && ws <= 1.0 + AREA_TOLERANCE && wt > 0.0 && wt <= 1.0 + AREA_TOLERANCE) {
                    return Err(PartitionError::BadPatch { cell: ci, patch: *p });
                }
                area += p.area();
            }
        }
        if (area - 1.0).abs() > AREA_TOLERANCE {
            return Err(PartitionError::Area(area));
        }
        let n = COVERAGE_GRID as f64;
        for i in 0..COVERAGE_GRID {
            for j in 0..COVERAGE_GRID {
                let (s, t) = ((i as f64 + 0.5) / n, (j as f64 + 0.5) / n);
                let times: usize =
                    self.cells.iter().flat_map(|c| c.patches.iter()).filter(|p| p.contains_mod1(s, t)).count();
                if times != 1 {
                    return Err(PartitionError::Coverage { s, t, times });
                }
            }
        }
        for c in &self.cells {
            let geom = self.cell_geometry_unchecked(basis, q, c);
            let inradius = geom.inner.inradius();
            if self.delta >= inradius {
                return Err(PartitionError::BallNotContained { q_index: c.q_index, delta: self.delta, inradius });
            }
        }
        Ok(())
    }

    /// Validated integration geometry of every cell.
    pub fn geometry(&self, basis: &LatticeBasis, q: &[Complex64]) -> Result<Vec<CellGeometry>, PartitionError> {
        self.validate(basis, q)?;
        Ok(self.cells.iter().map(|c| self.cell_geometry_unchecked(basis, q, c)).collect())
    }

    fn cell_geometry_unchecked(&self, basis: &LatticeBasis, q: &[Complex64], cell: &Cell) -> CellGeometry {
        let center = basis.reduce(q[cell.q_index]);
        let (cs, ct) = center.coords();
        let contained = |h: f64| {
            let b = box_patch(cs, ct, h);
            covered_area(&cell.patches, &b) >= b.area() * (1.0 - 1e-12)
        };
        let h = if contained(0.5) {
            0.5
        } else {
            let (mut lo, mut hi) = (0.0, 0.5);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if contained(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let inner = CenteredParallelogram { center: center.z(), a: basis.omega1() * h, b: basis.omega2() * h, half_width: h };
        let mut outer: Vec<Patch> = cell.patches.iter().map(|p| p.normalized()).collect();
        let hole = box_patch(cs, ct, h);
        for m in -2..=2 {
            for n in -2..=2 {
                let shifted = hole.shifted(m as f64, n as f64);
                outer = outer.iter().flat_map(|p| p.minus(&shifted)).collect();
            }
        }
        outer.retain(|p| p.area() > 1e-15);
        CellGeometry { q_index: cell.q_index, inner, outer }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn halves(delta: f64) -> PartitionSpec {
        PartitionSpec {
            cells: vec![
                Cell { patches: vec![Patch::new(0.0, 0.5, 0.0, 1.0)], q_index: 0 },
                Cell { patches: vec![Patch::new(0.5, 1.0, 0.0, 1.0)], q_index: 1 },
            ],
            delta,
        }
    }

    #[test]
    fn single_cell_is_whole_parallelogram() {
        let b = LatticeBasis::from_tau(c(0.3, 0.8)).unwrap();
        let q = [c(0.77, 0.41)];
        let p = PartitionSpec::single_cell(&b, q[0], 0.05);
        let g = p.geometry(&b, &q).unwrap();
        assert_eq!(g[0].inner.half_width, 0.5);
        assert!(g[0].outer.is_empty());
    }

    #[test]
    fn halves_partition_geometry() {
        let b = LatticeBasis::square();
        let q = [c(0.25, 0.5), c(0.75, 0.1)];
        let g = halves(0.05).geometry(&b, &q).unwrap();
        for cell in &g {
            assert!((cell.inner.half_width - 0.25).abs() < 1e-12);
            let outer: f64 = cell.outer.iter().map(|p| p.area()).sum();
            assert!((outer + 0.25 - 0.5).abs() < 1e-12, "{outer}");
        }
    }

    #[test]
    fn validation_errors() {
        let b = LatticeBasis::square();
        let q = [c(0.25, 0.5), c(0.75, 0.1)];
        assert!(matches!(halves(0.3).validate(&b, &q), Err(PartitionError::BallNotContained { .. })));
        let mut overlap = halves(0.05);
        overlap.cells[1].patches[0] = Patch::new(0.4, 0.9, 0.0, 1.0);
        assert!(matches!(overlap.validate(&b, &q), Err(PartitionError::Coverage { .. })));
        let mut gap = halves(0.05);
        gap.cells[1].patches[0] = Patch::new(0.5, 0.9, 0.0, 1.0);
        assert!(matches!(gap.validate(&b, &q), Err(PartitionError::Area(_))));
        let mut idx = halves(0.05);
        idx.cells[1].q_index = 0;
        assert!(matches!(idx.validate(&b, &q), Err(PartitionError::Indexing(2))));
        assert!(matches!(halves(0.05).validate(&b, &q[..1]), Err(PartitionError::CellCount { .. })));
    }

    #[test]
    fn full_width_patch_survives_rounding() {
        let b = LatticeBasis::square();
        let p = Patch::new(0.3, 1.3000000000000003, -0.1, 0.9);
        assert!(p.s[1] - p.s[0] > 1.0);
        let spec = PartitionSpec { cells: vec![Cell { patches: vec![p], q_index: 0 }], delta: 0.01 };
        assert!(spec.validate(&b, &[c(0.8, 0.3)]).is_ok());
    }

    #[test]
    fn wrapped_patches_are_accepted() {
        let b = LatticeBasis::square();
        let q = [c(0.0, 0.5), c(0.5, 0.5)];
        let p = PartitionSpec {
            cells: vec![
                Cell { patches: vec![Patch::new(-0.25, 0.25, 0.0, 1.0)], q_index: 0 },
                Cell { patches: vec![Patch::new(0.25, 0.75, 0.0, 1.0)], q_index: 1 },
            ],
            delta: 0.1,
        };
        let g = p.geometry(&b, &q).unwrap();
        assert!((g[0].inner.half_width - 0.25).abs() < 1e-12);
    }
}
