//! Green's function of the flat torus, `-ΔG = δ₀ - 1/|Ω|`, normalized so that
//! `∫_Ω G = 0`.
//!
//! The primary backend works in the Lagrange-reduced frame `z = u·w`,
//! `τ = v/u`, where
//!
//! ```text
//! G(z) = -(1/2π)·ln|ϑ₁(w|τ)| + (Im w)²/(2 Im τ) + (1/2π)·ln|η(τ)|
//! ```
//!
//! The last term is the exact zero-mean constant. [`EwaldGreen`] evaluates
//! the same function from a Gaussian-split lattice sum and serves as the
//! independent cross-check.

mod cache;
mod ewald;
mod theta;

pub use cache::{BasisConstants, CacheError, ConstantCache};
pub use ewald::EwaldGreen;

use crate::lattice::{LatticeBasis, TorusPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;
use theta::ThetaSeries;

/// Points closer than this to the lattice are treated as the singularity.
pub const SINGULAR_RADIUS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("evaluation at the singularity (torus distance {distance:e} to the pole)")]
    Singular { distance: f64 },
}

/// Value, gradient and Hessian of `G` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEvaluation {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

/// The additive constant fixing `∫_Ω G = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenNormalization {
    pub additive_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Theta,
    Ewald,
}

/// Theta-series evaluator for one torus.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    basis: LatticeBasis,
    u: Complex64,
    tau: Complex64,
    series: ThetaSeries,
    constant: f64,
    robin: f64,
}

impl GreenFunction {
    pub fn new(basis: LatticeBasis) -> Self {
        let (u, v) = basis.reduced_generators();
        let tau = v / u;
        let log_eta = theta::log_abs_eta(tau);
        let constant = log_eta / (2.0 * PI);
        // γ(q,q) = -(1/2π)·ln(2π|η|²/|u|), from ϑ₁'(0) = 2πη³
        let robin = -((2.0 * PI).ln() + 2.0 * log_eta - u.norm().ln()) / (2.0 * PI);
        Self { basis, u, tau, series: ThetaSeries::new(tau), constant, robin }
    }

    /// Reuse per-basis constants from `cache`, computing and storing them on a miss.
    pub fn with_cache(basis: LatticeBasis, cache: &ConstantCache) -> Self {
        let mut g = Self::new(basis);
        let constants = cache.get_or_insert_with(&basis, || BasisConstants {
            normalization: g.constant,
            robin: g.robin,
        });
        g.constant = constants.normalization;
        g.robin = constants.robin;
        g
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn normalization(&self) -> GreenNormalization {
        GreenNormalization { additive_constant: self.constant }
    }

    /// `γ(q,q) = lim_{x→q} G(x-q) + (1/2π)·ln|x-q|`, the same for every `q`.
    pub fn robin_constant(&self) -> f64 {
        self.robin
    }

    /// Reduced-frame coordinate of the centered representative of `z`.
    fn frame(&self, z: Complex64) -> Result<Complex64, GreenError> {
        let x = self.basis.centered(z);
        let d = x.norm();
        if d < SINGULAR_RADIUS {
            return Err(GreenError::Singular { distance: d });
        }
        Ok(x / self.u)
    }

    pub fn value(&self, z: Complex64) -> Result<f64, GreenError> {
        let w = self.frame(z)?;
        let th = self.series.eval(w);
        Ok(-th.value.norm().ln() / (2.0 * PI) + w.im * w.im / (2.0 * self.tau.im) + self.constant)
    }

    /// `G(z)`, or `+∞` at the pole. Convenient inside exponentials `e^{-cG}`.
    pub fn value_or_infinite(&self, z: Complex64) -> f64 {
        self.value(z).unwrap_or(f64::INFINITY)
    }

    pub fn gradient(&self, z: Complex64) -> Result<[f64; 2], GreenError> {
        Ok(self.evaluate(z)?.gradient)
    }

    pub fn hessian(&self, z: Complex64) -> Result<[[f64; 2]; 2], GreenError> {
        Ok(self.evaluate(z)?.hessian)
    }

    pub fn evaluate(&self, z: Complex64) -> Result<GreenEvaluation, GreenError> {
        let w = self.frame(z)?;
        let th = self.series.eval(w);
        let t = self.tau.im;
        let f1 = th.d1 / th.value;
        let f2 = th.d2 / th.value - f1 * f1;
        let value = -th.value.norm().ln() / (2.0 * PI) + w.im * w.im / (2.0 * t) + self.constant;

        // complex gradient Gx + iGy in the w-frame, then pulled back through z = u·w
        let i = Complex64::new(0.0, 1.0);
        let grad_w = -f1.conj() / (2.0 * PI) + i * (w.im / t);
        let grad = grad_w / self.u.conj();

        // A = Gxx - Gyy + 2iGxy transforms with conj(u)^{-2}, the Laplacian with |u|^{-2}
        let gxx = -f2.re / (2.0 * PI);
        let gyy = f2.re / (2.0 * PI) + 1.0 / t;
        let gxy = f2.im / (2.0 * PI);
        let a_w = Complex64::new(gxx - gyy, 2.0 * gxy);
        let a = a_w / (self.u.conj() * self.u.conj());
        let lap = (gxx + gyy) / self.u.norm_sqr();
        let hxx = 0.5 * (lap + a.re);
        let hyy = 0.5 * (lap - a.re);
        let hxy = 0.5 * a.im;
        Ok(GreenEvaluation { value, gradient: [grad.re, grad.im], hessian: [[hxx, hxy], [hxy, hyy]] })
    }

    /// `G(z) + (1/2π)·ln|z|` for a plane vector `z`, using the plane length
    /// `|z|` rather than the torus distance. Stable as `z → 0`.
    pub fn regular_part_plane(&self, z: Complex64) -> f64 {
        let short = self.basis.min_period();
        if z.norm() > 0.25 * short {
            return match self.value(z) {
                Ok(g) => g + z.norm().ln() / (2.0 * PI),
                Err(_) => f64::NEG_INFINITY,
            };
        }
        let w = z / self.u;
        let ratio = self.series.value_over_w(w).norm();
        -ratio.ln() / (2.0 * PI) + w.im * w.im / (2.0 * self.tau.im) + self.constant + self.u.norm().ln() / (2.0 * PI)
    }

    /// Regular part `γ(x, q) = G(x-q) + (1/2π)·ln(dist(x, q))`; at `x = q` the Robin constant.
    pub fn regular_part(&self, x: Complex64, q: Complex64) -> f64 {
        let d = self.basis.centered(x - q);
        if d.norm() < SINGULAR_RADIUS {
            return self.robin;
        }
        self.regular_part_plane(d)
    }

    /// Mean of `G` over an `n × n` midpoint grid of the fundamental cell.
    pub fn grid_mean(&self, n: usize) -> f64 {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let vals: Vec<f64> = (0..n)
                .map(|j| {
                    let z = self.basis.from_coords((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                    self.value(z).expect("midpoints avoid the pole")
                })
                .collect();
            rows.push(crate::numeric::pairwise_sum(&vals));
        }
        crate::numeric::pairwise_sum(&rows) / (n * n) as f64
    }
}

/// `G(x)` for a reduced torus point.
pub fn green_value(x: &TorusPoint, g: &GreenFunction) -> Result<f64, GreenError> {
    g.value(x.z())
}

pub fn ewald_green_value(x: &TorusPoint, g: &EwaldGreen) -> Result<f64, GreenError> {
    g.value(x.z())
}

pub fn regular_part_gamma(x: &TorusPoint, q: &TorusPoint, g: &GreenFunction) -> f64 {
    g.regular_part(x.z(), q.z())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn half_periods_are_critical() {
        for tau in [c(0.0, 1.0), c(0.5, 0.3), c(0.17, 1.4), c(0.5, 0.05)] {
            let b = LatticeBasis::from_tau(tau).unwrap();
            let g = GreenFunction::new(b);
            for hp in b.half_periods() {
                let grad = g.gradient(hp.z()).unwrap();
                assert!(grad[0].hypot(grad[1]) < 1e-12, "tau={tau} hp={:?} grad={grad:?}", hp.z());
            }
        }
    }

    #[test]
    fn trace_of_hessian_is_inverse_area() {
        let b = LatticeBasis::square();
        let h = GreenFunction::new(b).hessian(c(0.3, 0.4)).unwrap();
        assert!((h[0][0] + h[1][1] - 1.0).abs() < 1e-12);
        let b = LatticeBasis::new(c(1.3, 0.2), c(0.4, 0.9)).unwrap();
        let h = GreenFunction::new(b).hessian(c(0.3, 0.4)).unwrap();
        assert!((h[0][0] + h[1][1] - 1.0 / b.area()).abs() < 1e-11);
    }

    #[test]
    fn singularity_is_reported() {
        let g = GreenFunction::new(LatticeBasis::square());
        assert!(matches!(g.value(c(0.0, 0.0)), Err(GreenError::Singular { .. })));
        assert!(matches!(g.value(c(1.0, 1.0)), Err(GreenError::Singular { .. })));
        assert!(matches!(g.gradient(c(1e-13, 0.0)), Err(GreenError::Singular { .. })));
        assert_eq!(g.value_or_infinite(c(0.0, 1.0)), f64::INFINITY);
    }

    #[test]
    fn regular_part_is_smooth_through_the_pole() {
        let g = GreenFunction::new(LatticeBasis::from_tau(c(0.3, 1.2)).unwrap());
        let q = c(0.41, 0.33);
        let r = g.robin_constant();
        assert_eq!(g.regular_part(q, q), r);
        let near = g.regular_part(q + c(1e-7, -2e-7), q);
        assert!((near - r).abs() < 1e-10);
        // the plane-length form and the direct value agree away from the pole
        let z = c(0.2, 0.1);
        let direct = g.value(z).unwrap() + z.norm().ln() / (2.0 * PI);
        assert!((g.regular_part_plane(z) - direct).abs() < 1e-13);
        let z = c(0.05, -0.08);
        let direct = g.value(z).unwrap() + z.norm().ln() / (2.0 * PI);
        assert!((g.regular_part_plane(z) - direct).abs() < 1e-13);
    }

    fn test_tori() -> Vec<LatticeBasis> {
        vec![
            LatticeBasis::square(),
            LatticeBasis::from_tau(c(0.0, 2.0)).unwrap(),
            LatticeBasis::from_tau(c(0.5, 0.3)).unwrap(),
            LatticeBasis::new(c(1.3, 0.2), c(0.4, 0.9)).unwrap(),
            LatticeBasis::from_tau(c(0.5, 0.05)).unwrap(),
        ]
    }

    #[test]
    fn backends_agree() {
        for b in test_tori() {
            let g = GreenFunction::new(b);
            let e = EwaldGreen::new(b);
            let n = 12;
            for i in 0..n {
                for j in 0..n {
                    let z = b.from_coords((i as f64 + 0.3) / n as f64, (j as f64 + 0.6) / n as f64);
                    if b.distance(z, c(0.0, 0.0)) < 1e-3 {
                        continue;
                    }
                    let (vt, ve) = (g.value(z).unwrap(), e.value(z).unwrap());
                    assert!((vt - ve).abs() < 1e-10, "basis={b:?} z={z} theta={vt} ewald={ve}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for b in test_tori() {
            let g = GreenFunction::new(b);
            let z = b.from_coords(0.31, 0.58);
            let ev = g.evaluate(z).unwrap();
            let h = 1e-5 * b.min_period();
            let f = |dz: Complex64| g.value(z + dz).unwrap();
            let gx = (f(c(h, 0.0)) - f(c(-h, 0.0))) / (2.0 * h);
            let gy = (f(c(0.0, h)) - f(c(0.0, -h))) / (2.0 * h);
            let scale = ev.gradient[0].hypot(ev.gradient[1]).max(1.0);
            assert!((gx - ev.gradient[0]).abs() < 1e-6 * scale, "{b:?}");
            assert!((gy - ev.gradient[1]).abs() < 1e-6 * scale, "{b:?}");
            let gr = |dz: Complex64| g.gradient(z + dz).unwrap();
            let hxx = (gr(c(h, 0.0))[0] - gr(c(-h, 0.0))[0]) / (2.0 * h);
            let hxy = (gr(c(0.0, h))[0] - gr(c(0.0, -h))[0]) / (2.0 * h);
            let hyy = (gr(c(0.0, h))[1] - gr(c(0.0, -h))[1]) / (2.0 * h);
            let hs = ev.hessian[0][0].abs().max(ev.hessian[1][1].abs()).max(1.0);
            assert!((hxx - ev.hessian[0][0]).abs() < 1e-5 * hs);
            assert!((hxy - ev.hessian[0][1]).abs() < 1e-5 * hs);
            assert!((hyy - ev.hessian[1][1]).abs() < 1e-5 * hs);
        }
    }

    #[test]
    fn mean_over_cell_vanishes() {
        let g = GreenFunction::new(LatticeBasis::square());
        let m = g.grid_mean(256);
        assert!(m.abs() < 1e-6, "mean={m}");
        for b in test_tori().into_iter().skip(1).take(3) {
            let g = GreenFunction::new(b);
            let (coarse, fine) = (g.grid_mean(128), g.grid_mean(256));
            // the midpoint error near the pole decays like h²
            assert!(fine.abs() < 0.4 * coarse.abs() && ((4.0 * fine - coarse) / 3.0).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn robin_constant_matches_limit() {
        let b = LatticeBasis::square();
        let g = GreenFunction::new(b);
        let e = EwaldGreen::new(b);
        let samples: Vec<f64> = (0..5)
            .map(|m| {
                let x = c(0.01, 0.0) * 0.5f64.powi(m);
                e.value(x).unwrap() + x.norm().ln() / (2.0 * PI)
            })
            .collect();
        let (limit, _) = crate::numeric::richardson(&samples, 0.5, &[2.0, 4.0, 6.0, 8.0]);
        assert!((limit - g.robin_constant()).abs() < 1e-10, "{limit} vs {}", g.robin_constant());
    }

    #[test]
    fn cached_constants_are_reused() {
        let cache = ConstantCache::new();
        let b = LatticeBasis::from_tau(c(0.5, 0.8)).unwrap();
        let g1 = GreenFunction::with_cache(b, &cache);
        assert_eq!(cache.len(), 1);
        let g2 = GreenFunction::with_cache(b, &cache);
        assert_eq!(cache.len(), 1);
        assert_eq!(g1.robin_constant(), g2.robin_constant());
        assert_eq!(g1.value(c(0.3, 0.2)).unwrap(), g2.value(c(0.3, 0.2)).unwrap());
    }
}
