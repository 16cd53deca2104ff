//! Flat tori `C / (Z·ω₁ + Z·ω₂)`.
//!
//! Points of the plane are complex numbers. A [`LatticeBasis`] keeps the two
//! periods it was built from (these define the basis coordinates used by
//! configuration files) together with a Lagrange-reduced pair of generators of
//! the same lattice, which every distance and nearest-translate search uses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid basis: Im(omega2/omega1) = {0:e} must be strictly positive")]
    InvalidBasis(f64),
    #[error("invalid basis: periods must be finite and non-zero")]
    NonFinite,
}

/// The two periods of a flat torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBasis {
    omega1: Complex64,
    omega2: Complex64,
    short1: Complex64,
    short2: Complex64,
}

/// A point of the torus, stored as its representative in the fundamental
/// domain `[0,1)·ω₁ + [0,1)·ω₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    z: Complex64,
    s: f64,
    t: f64,
}

impl TorusPoint {
    /// Complex coordinate of the reduced representative.
    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// Basis coordinates `(s, t)` with `z = s·ω₁ + t·ω₂`, both in `[0, 1)`.
    pub fn coords(&self) -> (f64, f64) {
        (self.s, self.t)
    }
}

fn wrap_unit(x: f64) -> f64 {
    let mut f = x - x.floor();
    // absorb rounding that lands a hair below 1
    if f >= 1.0 || 1.0 - f < 4.0 * f64::EPSILON {
        f = 0.0;
    }
    f
}

fn lagrange_reduce(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let (mut u, mut v) = if a.norm_sqr() <= b.norm_sqr() { (a, b) } else { (b, a) };
    for _ in 0..200 {
        let m = ((v * u.conj()).re / u.norm_sqr()).round();
        v -= u * m;
        if v.norm_sqr() < u.norm_sqr() {
            std::mem::swap(&mut u, &mut v);
        } else {
            break;
        }
    }
    if (v / u).im < 0.0 {
        v = -v;
    }
    (u, v)
}

impl LatticeBasis {
    pub fn new(omega1: Complex64, omega2: Complex64) -> Result<Self, LatticeError> {
        let finite = |w: Complex64| w.re.is_finite() && w.im.is_finite();
        if !finite(omega1) || !finite(omega2) || omega1.norm() == 0.0 {
            return Err(LatticeError::NonFinite);
        }
        let orientation = (omega2 / omega1).im;
        if !(orientation > 0.0) {
            return Err(LatticeError::InvalidBasis(orientation));
        }
        let (short1, short2) = lagrange_reduce(omega1, omega2);
        Ok(Self { omega1, omega2, short1, short2 })
    }

    /// Torus with periods `1` and `tau`.
    pub fn from_tau(tau: Complex64) -> Result<Self, LatticeError> {
        Self::new(Complex64::new(1.0, 0.0), tau)
    }

    pub fn square() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)).expect("square basis")
    }

    pub fn omega1(&self) -> Complex64 {
        self.omega1
    }

    pub fn omega2(&self) -> Complex64 {
        self.omega2
    }

    pub fn omega3(&self) -> Complex64 {
        self.omega1 + self.omega2
    }

    pub fn tau(&self) -> Complex64 {
        self.omega2 / self.omega1
    }

    /// `|Im(conj(ω₁)·ω₂)|`
    pub fn area(&self) -> f64 {
        (self.omega1.conj() * self.omega2).im.abs()
    }

    /// Lagrange-reduced generators `(u, v)`: `|u| ≤ |v|`, `|Re(v/u)| ≤ 1/2`, `Im(v/u) > 0`.
    pub fn reduced_generators(&self) -> (Complex64, Complex64) {
        (self.short1, self.short2)
    }

    /// The same lattice with the reduced generators as its basis.
    pub fn reduced_basis(&self) -> LatticeBasis {
        LatticeBasis::new(self.short1, self.short2).expect("reduced basis is valid")
    }

    pub fn min_period(&self) -> f64 {
        self.short1.norm()
    }

    pub fn max_period(&self) -> f64 {
        self.omega1.norm().max(self.omega2.norm())
    }

    /// Equality tolerance for torus points.
    pub fn point_tolerance(&self) -> f64 {
        1e-10 * self.max_period()
    }

    /// Longest diagonal of the fundamental parallelogram.
    pub fn diameter(&self) -> f64 {
        (self.omega1 + self.omega2).norm().max((self.omega1 - self.omega2).norm())
    }

    /// Basis coordinates of an arbitrary plane point.
    pub fn coords(&self, z: Complex64) -> (f64, f64) {
        coords_in(self.omega1, self.omega2, z)
    }

    pub fn from_coords(&self, s: f64, t: f64) -> Complex64 {
        self.omega1 * s + self.omega2 * t
    }

    pub fn reduce(&self, z: Complex64) -> TorusPoint {
        let (s, t) = self.coords(z);
        let (s, t) = (wrap_unit(s), wrap_unit(t));
        TorusPoint { z: self.from_coords(s, t), s, t }
    }

    /// Representative of `z` modulo the lattice that is closest to the origin.
    pub fn centered(&self, z: Complex64) -> Complex64 {
        let (u, v) = (self.short1, self.short2);
        let (a, b) = coords_in(u, v, z);
        let base = z - u * a.round() - v * b.round();
        let mut best = base;
        for m in -1..=1 {
            for n in -1..=1 {
                let cand = base - u * m as f64 - v * n as f64;
                if cand.norm_sqr() < best.norm_sqr() {
                    best = cand;
                }
            }
        }
        best
    }

    /// Distance on the torus between two plane points.
    pub fn distance(&self, x: Complex64, y: Complex64) -> f64 {
        self.centered(x - y).norm()
    }

    pub fn same_point(&self, x: Complex64, y: Complex64) -> bool {
        self.distance(x, y) < self.point_tolerance()
    }

    /// `ω₁/2, ω₂/2, (ω₁+ω₂)/2`, reduced.
    pub fn half_periods(&self) -> [TorusPoint; 3] {
        [
            self.reduce(self.omega1 * 0.5),
            self.reduce(self.omega2 * 0.5),
            self.reduce(self.omega3() * 0.5),
        ]
    }

    /// `ω₁/4, ω₂/4, (ω₁+ω₂)/4`, reduced.
    pub fn four_torsion(&self) -> [TorusPoint; 3] {
        [
            self.reduce(self.omega1 * 0.25),
            self.reduce(self.omega2 * 0.25),
            self.reduce(self.omega3() * 0.25),
        ]
    }
}

fn coords_in(w1: Complex64, w2: Complex64, z: Complex64) -> (f64, f64) {
    let det = (w1.conj() * w2).im;
    let s = (z.conj() * w2).im / det;
    let t = (w1.conj() * z).im / det;
    (s, t)
}

/// Free-function form of [`LatticeBasis::reduce`].
pub fn reduce_to_fundamental(z: Complex64, basis: &LatticeBasis) -> TorusPoint {
    basis.reduce(z)
}

/// Free-function form of [`LatticeBasis::distance`] on reduced points.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint, basis: &LatticeBasis) -> f64 {
    basis.distance(x.z(), y.z())
}

pub fn half_periods(basis: &LatticeBasis) -> [TorusPoint; 3] {
    basis.half_periods()
}
