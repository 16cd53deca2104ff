//! Critical points of `G` on a torus.
//!
//! Newton's method on `∇G = 0` is seeded from a grid over the reduced cell.
//! Converged points are deduplicated modulo the lattice, half-periods are
//! snapped to their exact positions and any remaining points must form one
//! `±a` pair. A winding-number count of `∇G` over the same grid is kept as an
//! independent check of the result.

use crate::green::{GreenError, GreenFunction};
use crate::lattice::{LatticeBasis, TorusPoint};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Points closer than this (in units of the longest period) are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-7;
/// Hessian eigenvalues below this in magnitude are reported as degenerate.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-8;

const TIKHONOV: f64 = 1e-10;
const MAX_NEWTON: usize = 60;
const POLISH_STEPS: usize = 8;
const SINGULAR_HESSIAN: f64 = 1e-14;
const GRADIENT_ROUNDING: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    HalfPeriod,
    ExtraPairMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorseType {
    Min,
    Max,
    Saddle,
    Degenerate,
}

impl MorseType {
    /// Index of `∇G` around an isolated critical point of this type.
    pub fn index(self) -> i32 {
        match self {
            MorseType::Min | MorseType::Max => 1,
            MorseType::Saddle => -1,
            MorseType::Degenerate => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: TorusPoint,
    pub kind: PointKind,
    pub morse: MorseType,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: [f64; 2],
}

/// Winding-number cross-check over the seed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingCheck {
    /// Cells (other than the pole's) around which `∇G` winds.
    pub nonzero_cells: usize,
    pub total_index: i32,
    pub census_index: i32,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCensus {
    pub points: Vec<CriticalPoint>,
    pub count: usize,
    pub seeds: usize,
    pub failed_seeds: usize,
    pub winding: WindingCheck,
}

impl CriticalCensus {
    pub fn half_periods(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::HalfPeriod)
    }

    pub fn extras(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::ExtraPairMember)
    }

    /// The canonical member of the extra pair, if there is one.
    pub fn extra_representative(&self) -> Option<TorusPoint> {
        self.extras().next().map(|p| p.point)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CensusError {
    #[error("grid_n = {0} is below the minimum of 32")]
    GridTooSmall(usize),
    #[error("newton_tol = {0:e} must lie in (0, 1e-8]")]
    ToleranceTooLoose(f64),
    #[error("{failed} of {total} Newton seeds failed to converge; retry with a larger grid_n (e.g. {suggested})")]
    Resolution { failed: usize, total: usize, suggested: usize },
    #[error("critical census is inconsistent: {0}")]
    InternalConsistency(String),
}

enum SeedOutcome {
    Converged(Complex64),
    Discarded,
    Failed,
}

fn symmetric_eigenvalues(h: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let half_diff = 0.5 * (h[0][0] - h[1][1]);
    let r = half_diff.hypot(h[0][1]);
    [mean - r, mean + r]
}

fn morse_from_eigenvalues(ev: [f64; 2]) -> MorseType {
    if ev[0].abs() < DEGENERATE_EIGENVALUE || ev[1].abs() < DEGENERATE_EIGENVALUE {
        MorseType::Degenerate
    } else if ev[0] > 0.0 {
        MorseType::Min
    } else if ev[1] < 0.0 {
        MorseType::Max
    } else {
        MorseType::Saddle
    }
}

/// Morse type of a critical point from the eigenvalue signs of the Hessian.
pub fn classify_critical_point(x: Complex64, g: &GreenFunction) -> Result<MorseType, GreenError> {
    Ok(morse_from_eigenvalues(symmetric_eigenvalues(g.hessian(x)?)))
}

/// Whether `x` lies within `tol` of some `ω_k/4` or `3ω_k/4`.
pub fn is_four_torsion(x: Complex64, basis: &LatticeBasis, tol: f64) -> bool {
    basis
        .four_torsion()
        .iter()
        .any(|p| basis.distance(x, p.z()) < tol || basis.distance(x, -p.z()) < tol)
}

/// Newton step `-H⁻¹g`, with Tikhonov damping `-(HᵀH + λI)⁻¹Hᵀg` once `H`
/// is numerically singular.
fn newton_step(grad: [f64; 2], h: [[f64; 2]; 2]) -> Complex64 {
    let det_h = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    let frob2 = h[0][0] * h[0][0] + 2.0 * h[0][1] * h[0][1] + h[1][1] * h[1][1];
    if det_h.abs() > SINGULAR_HESSIAN * frob2 {
        let sx = (h[1][1] * grad[0] - h[0][1] * grad[1]) / det_h;
        let sy = (h[0][0] * grad[1] - h[0][1] * grad[0]) / det_h;
        return Complex64::new(-sx, -sy);
    }
    let a = h[0][0] * h[0][0] + h[0][1] * h[0][1] + TIKHONOV;
    let b = h[0][0] * h[0][1] + h[0][1] * h[1][1];
    let d = h[0][1] * h[0][1] + h[1][1] * h[1][1] + TIKHONOV;
    let r0 = h[0][0] * grad[0] + h[0][1] * grad[1];
    let r1 = h[0][1] * grad[0] + h[1][1] * grad[1];
    let det = a * d - b * b;
    Complex64::new(-(d * r0 - b * r1) / det, -(a * r1 - b * r0) / det)
}

/// Radius within which a converged point is indistinguishable from another:
/// the dedup tolerance, widened where a tiny Hessian eigenvalue turns gradient
/// rounding into position uncertainty.
fn merge_radius(basis: &LatticeBasis, hessian: [[f64; 2]; 2]) -> f64 {
    let p = basis.max_period();
    let ev = symmetric_eigenvalues(hessian);
    let scale = ev[0].abs().max(ev[1].abs()) * p;
    let weak = ev[0].abs().min(ev[1].abs());
    let noise = GRADIENT_ROUNDING * scale.max(1.0);
    (DEDUP_TOLERANCE * p).max(10.0 * noise / weak).min(0.05 * basis.min_period())
}

fn refine(seed: Complex64, g: &GreenFunction, frame: &LatticeBasis, grid_n: usize, tol: f64) -> SeedOutcome {
    let limit = 2.0 / grid_n as f64;
    let mut x = seed;
    let mut converged_at = None;
    for it in 0..MAX_NEWTON {
        let ev = match g.evaluate(x) {
            Ok(ev) => ev,
            Err(_) => return SeedOutcome::Failed,
        };
        let gn = ev.gradient[0].hypot(ev.gradient[1]);
        if !gn.is_finite() {
            return SeedOutcome::Failed;
        }
        if gn < tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        let step = newton_step(ev.gradient, ev.hessian);
        if let Some(c) = converged_at {
            if it >= c + POLISH_STEPS || step.norm() < 1e-15 * frame.max_period() {
                break;
            }
        }
        x += step;
        let (ds, dt) = frame.coords(x - seed);
        if ds.abs().max(dt.abs()) >= limit {
            return SeedOutcome::Discarded;
        }
    }
    if converged_at.is_none() {
        return SeedOutcome::Failed;
    }
    SeedOutcome::Converged(x)
}

fn winding_of_cell(g: &GreenFunction, corners: [Complex64; 4], sub: usize) -> Option<i32> {
    let mut angle_sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut first: Option<f64> = None;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for k in 0..sub {
            let z = a + (b - a) * (k as f64 / sub as f64);
            let grad = g.gradient(z).ok()?;
            let ang = grad[1].atan2(grad[0]);
            if let Some(p) = prev {
                angle_sum += wrap_angle(ang - p);
            } else {
                first = Some(ang);
            }
            prev = Some(ang);
        }
    }
    angle_sum += wrap_angle(first? - prev?);
    Some((angle_sum / (2.0 * PI)).round() as i32)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Indices of `∇G` around every cell of an offset `grid_n²` grid, skipping the pole.
fn winding_census(g: &GreenFunction, frame: &LatticeBasis, grid_n: usize) -> (usize, i32) {
    let n = grid_n as f64;
    let offset = 0.513_7 / n;
    let cells: Vec<Option<i32>> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = ((idx / grid_n) as f64, (idx % grid_n) as f64);
            let s0 = i / n + offset - 0.5;
            let t0 = j / n + offset - 0.5;
            let s1 = s0 + 1.0 / n;
            let t1 = t0 + 1.0 / n;
            if s0 <= 0.0 && 0.0 < s1 && t0 <= 0.0 && 0.0 < t1 {
                return None;
            }
            let corners = [
                frame.from_coords(s0, t0),
                frame.from_coords(s1, t0),
                frame.from_coords(s1, t1),
                frame.from_coords(s0, t1),
            ];
            winding_of_cell(g, corners, 2)
        })
        .collect();
    let nonzero = cells.iter().flatten().filter(|w| **w != 0).count();
    let total = cells.iter().flatten().sum();
    (nonzero, total)
}

fn lex_less(a: Complex64, b: Complex64) -> bool {
    (a.re, a.im) < (b.re, b.im)
}

/// Critical points of `G(·, 0)` on the torus of `g`.
pub fn find_critical_points(g: &GreenFunction, grid_n: usize, newton_tol: f64) -> Result<CriticalCensus, CensusError> {
    if grid_n < 32 {
        return Err(CensusError::GridTooSmall(grid_n));
    }
    if !(newton_tol > 0.0 && newton_tol <= 1e-8) {
        return Err(CensusError::ToleranceTooLoose(newton_tol));
    }
    let basis = *g.basis();
    let frame = basis.reduced_basis();
    let exclusion = 0.05 * basis.min_period();
    let n = grid_n as f64;

    let seeds: Vec<Complex64> = (0..grid_n * grid_n)
        .map(|idx| frame.from_coords(((idx / grid_n) as f64 + 0.5) / n, ((idx % grid_n) as f64 + 0.5) / n))
        .filter(|z| basis.distance(*z, Complex64::new(0.0, 0.0)) >= exclusion)
        .collect();
    let outcomes: Vec<SeedOutcome> = seeds.par_iter().map(|&s| refine(s, g, &frame, grid_n, newton_tol)).collect();

    let failed = outcomes.iter().filter(|o| matches!(o, SeedOutcome::Failed)).count();
    if 2 * failed > seeds.len() {
        return Err(CensusError::Resolution { failed, total: seeds.len(), suggested: 2 * grid_n });
    }

    let half = basis.half_periods();
    let mut found_half = [false; 3];
    // (representative, merge radius)
    let mut extras: Vec<(Complex64, f64)> = Vec::new();
    for o in &outcomes {
        let SeedOutcome::Converged(x) = o else { continue };
        let radius = match g.hessian(*x) {
            Ok(h) => merge_radius(&basis, h),
            Err(_) => continue,
        };
        if let Some(k) = half.iter().position(|h| basis.distance(*x, h.z()) < radius) {
            found_half[k] = true;
            continue;
        }
        let z = basis.reduce(*x).z();
        match extras.iter_mut().find(|(e, r)| basis.distance(*e, z) < radius.max(*r)) {
            Some(entry) => entry.1 = entry.1.max(radius),
            None => extras.push((z, radius)),
        }
    }
    if let Some(k) = found_half.iter().position(|f| !f) {
        return Err(CensusError::InternalConsistency(format!(
            "half-period {} was not recovered by any seed",
            half[k].z()
        )));
    }
    for (e, r) in &extras {
        if !extras.iter().any(|(o, ro)| basis.distance(*o, -*e) < r.max(*ro)) {
            return Err(CensusError::InternalConsistency(format!("extra critical point {e} has no partner at its negative")));
        }
    }
    let extras: Vec<Complex64> = extras.into_iter().map(|(z, _)| z).collect();
    let count = 3 + extras.len();
    if count != 3 && count != 5 {
        return Err(CensusError::InternalConsistency(format!(
            "found {count} critical points (extras: {extras:?}); at most five are possible"
        )));
    }

    let mut ordered: Vec<(Complex64, PointKind)> = half.iter().map(|h| (h.z(), PointKind::HalfPeriod)).collect();
    if extras.len() == 2 {
        let (a, b) = (extras[0], extras[1]);
        let (first, second) = if lex_less(b, a) { (b, a) } else { (a, b) };
        ordered.push((first, PointKind::ExtraPairMember));
        ordered.push((second, PointKind::ExtraPairMember));
    }

    let mut points = Vec::with_capacity(ordered.len());
    for (z, kind) in ordered {
        let ev = g.evaluate(z).map_err(|e| CensusError::InternalConsistency(e.to_string()))?;
        let eig = symmetric_eigenvalues(ev.hessian);
        points.push(CriticalPoint {
            point: basis.reduce(z),
            kind,
            morse: morse_from_eigenvalues(eig),
            gradient_norm: ev.gradient[0].hypot(ev.gradient[1]),
            hessian_eigenvalues: eig,
        });
    }

    let (nonzero_cells, total_index) = winding_census(g, &frame, grid_n);
    let census_index: i32 = points.iter().map(|p| p.morse.index()).sum();
    let any_degenerate = points.iter().any(|p| p.morse == MorseType::Degenerate);
    let consistent = total_index == census_index && (any_degenerate || nonzero_cells == count);

    Ok(CriticalCensus { points, count, seeds: seeds.len(), failed_seeds: failed, winding: WindingCheck {
        nonzero_cells,
        total_index,
        census_index,
        consistent,
    } })
}
