//! Gaussian-split lattice sum for the zero-mean torus Green's function.
//!
//! ```text
//! G(x) = Σ_λ E₁(α²|x−λ|²)/(4π) + (1/|Ω|) Σ_{k≠0} e^{−|k|²/4α²} cos(k·x)/|k|² − 1/(4α²|Ω|)
//! ```
//!
//! The `k = 0` Fourier mode is absent, so the mean over the cell vanishes
//! identically. Splitting parameter `α = √(π/|Ω|)`.

use super::GreenError;
use crate::lattice::LatticeBasis;
use crate::numeric::exp_integral_e1;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Terms are kept until `E₁` or the Gaussian factor drops below ~1e-19.
const CUTOFF_EXPONENT: f64 = 42.0;

#[derive(Debug, Clone)]
pub struct EwaldGreen {
    basis: LatticeBasis,
    alpha2: f64,
    real_space: Vec<Complex64>,
    reciprocal: Vec<(Complex64, f64)>,
    shift: f64,
}

impl EwaldGreen {
    pub fn new(basis: LatticeBasis) -> Self {
        let area = basis.area();
        let alpha2 = PI / area;
        let (u, v) = basis.reduced_generators();
        let det = (u.conj() * v).im;

        // |x| ≤ half the cell diameter after centering
        let r_cut = (CUTOFF_EXPONENT / alpha2).sqrt() + 0.5 * (u.norm() + v.norm());
        let m_max = (r_cut * v.norm() / det).ceil() as i64 + 1;
        let n_max = (r_cut * u.norm() / det).ceil() as i64 + 1;
        let mut real_space = Vec::new();
        for m in -m_max..=m_max {
            for n in -n_max..=n_max {
                let lambda = u * m as f64 + v * n as f64;
                if lambda.norm() <= r_cut {
                    real_space.push(lambda);
                }
            }
        }

        let i = Complex64::new(0.0, 1.0);
        let b1 = -i * v / det;
        let b2 = i * u / det;
        let k_cut = (4.0 * alpha2 * CUTOFF_EXPONENT).sqrt();
        let m_max = (k_cut * u.norm() / (2.0 * PI)).ceil() as i64 + 1;
        let n_max = (k_cut * v.norm() / (2.0 * PI)).ceil() as i64 + 1;
        let mut reciprocal = Vec::new();
        for m in -m_max..=m_max {
            for n in -n_max..=n_max {
                if m == 0 && n == 0 {
                    continue;
                }
                let k = (b1 * m as f64 + b2 * n as f64) * (2.0 * PI);
                let k2 = k.norm_sqr();
                if k2 <= k_cut * k_cut {
                    reciprocal.push((k, (-k2 / (4.0 * alpha2)).exp() / (k2 * area)));
                }
            }
        }

        Self { basis, alpha2, real_space, reciprocal, shift: -1.0 / (4.0 * alpha2 * area) }
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn value(&self, z: Complex64) -> Result<f64, GreenError> {
        let x = self.basis.centered(z);
        let d = x.norm();
        if d < super::SINGULAR_RADIUS {
            return Err(GreenError::Singular { distance: d });
        }
        let mut real = 0.0;
        for lambda in &self.real_space {
            let r2 = (x - lambda).norm_sqr();
            let arg = self.alpha2 * r2;
            if arg < CUTOFF_EXPONENT {
                real += exp_integral_e1(arg);
            }
        }
        let mut recip = 0.0;
        for (k, w) in &self.reciprocal {
            recip += w * (k.re * x.re + k.im * x.im).cos();
        }
        Ok(real / (4.0 * PI) + recip + self.shift)
    }
}
