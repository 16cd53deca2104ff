//! Jacobi `ϑ₁(w | τ)` with its first two derivatives, plus `ln|η(τ)|`.
//!
//! `ϑ₁(w) = 2 Σ_{n≥0} (-1)ⁿ q^{(n+½)²} sin((2n+1)πw)`, `q = e^{iπτ}`.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Theta1 {
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

/// Precomputed series coefficients `(-1)ⁿ q^{(n+½)²}` for one modulus.
#[derive(Debug, Clone)]
pub(crate) struct ThetaSeries {
    coeffs: Vec<Complex64>,
    im_tau: f64,
}

impl ThetaSeries {
    pub fn new(tau: Complex64) -> Self {
        let mut coeffs = Vec::new();
        let i = Complex64::new(0.0, 1.0);
        for n in 0..64 {
            let e = (n as f64 + 0.5).powi(2);
            let c = (i * PI * tau * e).exp() * if n % 2 == 0 { 1.0 } else { -1.0 };
            coeffs.push(c);
            // enough terms for |Im w| up to Im(tau), with k² growth from derivatives
            let k = (2 * n + 1) as f64 * PI;
            if c.norm() * (k * tau.im).exp() * k * k < 1e-20 * coeffs[0].norm() {
                break;
            }
        }
        Self { coeffs, im_tau: tau.im }
    }

    fn terms(&self, w: Complex64) -> usize {
        let y = w.im.abs();
        let c0 = self.coeffs[0].norm();
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            let k = (2 * n + 1) as f64 * PI;
            if c.norm() * (k * y).exp() * (1.0 + k * k) < 1e-18 * c0 {
                return n;
            }
        }
        debug_assert!(y <= self.im_tau * 1.5, "argument far outside the reduced cell");
        self.coeffs.len()
    }

    pub fn eval(&self, w: Complex64) -> Theta1 {
        let n_terms = self.terms(w);
        let mut value = Complex64::new(0.0, 0.0);
        let mut d1 = Complex64::new(0.0, 0.0);
        let mut d2 = Complex64::new(0.0, 0.0);
        for (n, c) in self.coeffs[..n_terms].iter().enumerate() {
            let k = (2 * n + 1) as f64 * PI;
            let kw = w * k;
            let (s, co) = (kw.sin(), kw.cos());
            value += c * s;
            d1 += c * co * k;
            d2 -= c * s * (k * k);
        }
        Theta1 { value: value * 2.0, d1: d1 * 2.0, d2: d2 * 2.0 }
    }

    /// `ϑ₁(w)/w`, accurate as `w → 0` (tends to `ϑ₁'(0)`).
    pub fn value_over_w(&self, w: Complex64) -> Complex64 {
        let n_terms = self.terms(w);
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, c) in self.coeffs[..n_terms].iter().enumerate() {
            let k = (2 * n + 1) as f64 * PI;
            acc += c * sin_over(k, w);
        }
        acc * 2.0
    }
}

/// `sin(k·w)/w`
fn sin_over(k: f64, w: Complex64) -> Complex64 {
    let x = w * k;
    if x.norm() < 1e-3 {
        let x2 = x * x;
        let series = Complex64::new(1.0, 0.0) - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
            + x2 * x2 * x2 * x2 / 362_880.0;
        series * k
    } else {
        x.sin() / w
    }
}

/// `ln|η(τ)|` with `η(τ) = e^{iπτ/12} Π_{n≥1} (1 - e^{2πinτ})`.
pub(crate) fn log_abs_eta(tau: Complex64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let mut acc = -PI * tau.im / 12.0;
    for n in 1..400 {
        let qn = (i * 2.0 * PI * tau * n as f64).exp();
        acc += (Complex64::new(1.0, 0.0) - qn).norm().ln();
        if qn.norm() < 1e-18 {
            break;
        }
    }
    acc
}
