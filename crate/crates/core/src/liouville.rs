//! Radial solutions of the two-component Liouville system
//!
//! ```text
//! V₁'' + V₁'/r + c₂ e^{V₂} = 0,   V₂'' + V₂'/r + c₁ e^{V₁} = 0,   Vᵢ(0) = aᵢ, Vᵢ'(0) = 0,
//! ```
//!
//! their masses `M₁ = ∫ c₂e^{V₂}`, `M₂ = ∫ c₁e^{V₁}`, tail constants
//! `Vᵢ = -(Mᵢ/2π) ln r + Iᵢ + o(1)`, and the kernel of the linearized system.
//!
//! The system is integrated in `s = ln r` from a small radius reached by the
//! power series at the origin.

use crate::numeric::pairwise_sum;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const FOUR_PI: f64 = 4.0 * PI;
const EIGHT_PI: f64 = 8.0 * PI;

type State = [f64; 6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiouvilleError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("integration failed: {0}")]
    Stiffness(String),
    #[error("flux mass {flux:.12e} and integrated mass {integral:.12e} disagree")]
    Resolution { flux: f64, integral: f64 },
    #[error("M{component} is infinite: the flux of the other component tends to {flux:.6} ≤ 4π, so its density is not integrable")]
    NonIntegrable { component: usize, flux: f64 },
    #[error("no sign change of M1 - M2 for a2 in [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootSettings {
    pub r_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Output spacing in `ln r`.
    pub output_step: f64,
}

impl Default for ShootSettings {
    fn default() -> Self {
        Self { r_max: 1e4, rtol: 1e-13, atol: 1e-14, output_step: 0.01 }
    }
}

/// Sampled radial solution. Derivatives are with respect to `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub c1: f64,
    pub c2: f64,
    pub a1: f64,
    pub a2: f64,
    pub r_grid: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub dv1: Vec<f64>,
    pub dv2: Vec<f64>,
    /// `2π∫₀^r c₂e^{V₂}ρ dρ` and `2π∫₀^r c₁e^{V₁}ρ dρ`.
    pub mass_integral: [Vec<f64>; 2],
    s0: f64,
    ds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPair {
    pub m1: f64,
    pub m2: f64,
    pub i1: f64,
    pub i2: f64,
    /// Masses from the integrated densities, extrapolated the same way.
    pub m1_integral: f64,
    pub m2_integral: f64,
}

impl MassPair {
    /// `1/M₁ + 1/M₂ - 1/(4π)`.
    pub fn identity_residual(&self) -> f64 {
        1.0 / self.m1 + 1.0 / self.m2 - 1.0 / FOUR_PI
    }
}

struct RadialSystem {
    c: [f64; 2],
    s0: f64,
}

impl RadialSystem {
    // y = (V₁, V₂, W₁, W₂, μ₁, μ₂) with W = dV/ds, μ the integrated masses,
    // as functions of σ = ln r - ln r₀
    fn rhs(&self, sigma: f64, y: &State) -> State {
        let mut dy = [0.0; 6];
        let r2 = (2.0 * (sigma + self.s0)).exp();
        let src1 = self.c[1] * y[1].exp() * r2;
        let src2 = self.c[0] * y[0].exp() * r2;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -src1;
        dy[3] = -src2;
        dy[4] = 2.0 * PI * src1;
        dy[5] = 2.0 * PI * src2;
        dy
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Adaptive steps from `x` to exactly `x_end`; returns the step size to try next.
fn advance(sys: &RadialSystem, mut x: f64, x_end: f64, y: &mut State, mut h: f64, s: &ShootSettings) -> Result<f64, LiouvilleError> {
    while x < x_end {
        let landing = x + h >= x_end;
        let step = if landing { x_end - x } else { h };
        let mut k = [[0.0; 6]; 7];
        for st in 0..7 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(st) {
                for m in 0..6 {
                    yi[m] += step * A[st][j] * kj[m];
                }
            }
            k[st] = sys.rhs(x + C[st] * step, &yi);
        }
        let mut y5 = *y;
        let mut err: f64 = 0.0;
        for m in 0..6 {
            let (mut d5, mut d4) = (0.0, 0.0);
            for st in 0..7 {
                d5 += B5[st] * k[st][m];
                d4 += B4[st] * k[st][m];
            }
            y5[m] += step * d5;
            let sc = s.atol + s.rtol * y[m].abs().max(y5[m].abs());
            err = err.max((step * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(LiouvilleError::Stiffness(format!("non-finite state at s = {x}")));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            x = if landing { x_end } else { x + step };
            *y = y5;
            h = if landing { h.max(step * factor) } else { step * factor };
        } else {
            h = step * factor;
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(LiouvilleError::Stiffness(format!("step size underflow at s = {x}")));
            }
        }
    }
    Ok(h)
}

/// Series coefficients `Vᵢ = aᵢ + αᵢr² + βᵢr⁴ + γᵢr⁶ + …` at the origin.
fn series(c: [f64; 2], a: [f64; 2]) -> [[f64; 3]; 2] {
    let src = [c[1] * a[1].exp(), c[0] * a[0].exp()];
    let b = [src[0] * src[1] / 64.0, src[1] * src[0] / 64.0];
    let g = [
        -src[0] * (b[1] + src[1] * src[1] / 32.0) / 36.0,
        -src[1] * (b[0] + src[0] * src[0] / 32.0) / 36.0,
    ];
    [[-src[0] / 4.0, b[0], g[0]], [-src[1] / 4.0, b[1], g[1]]]
}

fn series_value(a: f64, k: &[f64; 3], r: f64) -> (f64, f64) {
    let r2 = r * r;
    let v = a + r2 * (k[0] + r2 * (k[1] + r2 * k[2]));
    let dv = r * (2.0 * k[0] + r2 * (4.0 * k[1] + r2 * 6.0 * k[2]));
    (v, dv)
}

/// Integrate the radial system from the origin to `settings.r_max`.
pub fn shoot(c1: f64, c2: f64, a1: f64, a2: f64, settings: &ShootSettings) -> Result<RadialProfile, LiouvilleError> {
    if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(LiouvilleError::Input(format!("coefficients must be positive, got c1 = {c1}, c2 = {c2}")));
    }
    if !(a1.is_finite() && a2.is_finite()) || a1.max(a2) + c1.max(c2).ln() > 600.0 {
        return Err(LiouvilleError::Input("initial values overflow e^V".into()));
    }
    if !(settings.r_max >= 1e4) {
        return Err(LiouvilleError::Input(format!("r_max = {} must be at least 1e4", settings.r_max)));
    }
    if !(settings.output_step > 0.0 && settings.rtol > 0.0 && settings.atol > 0.0) {
        return Err(LiouvilleError::Input("tolerances and output step must be positive".into()));
    }
    let c = [c1, c2];
    let a = [a1, a2];
    let k = series(c, a);
    let scale = (c2 * a2.exp()).max(c1 * a1.exp());
    let r0 = 1e-3 / scale.sqrt().max(1.0);
    let s0 = r0.ln();
    let s_end = settings.r_max.ln();
    let steps = ((s_end - s0) / settings.output_step).ceil() as usize;
    let ds = (s_end - s0) / steps as f64;

    let (v1, d1) = series_value(a1, &k[0], r0);
    let (v2, d2) = series_value(a2, &k[1], r0);
    let src = [c2 * a2.exp(), c1 * a1.exp()];
    let mu = |i: usize| PI * src[i] * r0 * r0 - PI * src[0] * src[1] * r0.powi(4) / 8.0;
    let y0: State = [v1, v2, r0 * d1, r0 * d2, mu(0), mu(1)];

    let sys = RadialSystem { c, s0 };
    let mut ys = Vec::with_capacity(steps + 1);
    let mut y = y0;
    ys.push(y);
    let mut h = 0.1 * ds;
    for i in 0..steps {
        h = advance(&sys, i as f64 * ds, (i + 1) as f64 * ds, &mut y, h, settings)?;
        ys.push(y);
    }

    let n = steps + 1;
    let mut out = RadialProfile {
        c1,
        c2,
        a1,
        a2,
        r_grid: Vec::with_capacity(n + 1),
        v1: Vec::with_capacity(n + 1),
        v2: Vec::with_capacity(n + 1),
        dv1: Vec::with_capacity(n + 1),
        dv2: Vec::with_capacity(n + 1),
        mass_integral: [Vec::with_capacity(n + 1), Vec::with_capacity(n + 1)],
        s0,
        ds,
    };
    out.r_grid.push(0.0);
    out.v1.push(a1);
    out.v2.push(a2);
    out.dv1.push(0.0);
    out.dv2.push(0.0);
    out.mass_integral[0].push(0.0);
    out.mass_integral[1].push(0.0);
    for (i, y) in ys.iter().take(n).enumerate() {
        let r = (s0 + i as f64 * ds).exp();
        if i > 0 && (y[0] >= out.v1[i] || y[1] >= out.v2[i]) {
            return Err(LiouvilleError::Stiffness(format!("profile stopped decreasing at r = {r:e}")));
        }
        out.r_grid.push(r);
        out.v1.push(y[0]);
        out.v2.push(y[1]);
        out.dv1.push(y[2] / r);
        out.dv2.push(y[3] / r);
        out.mass_integral[0].push(y[4]);
        out.mass_integral[1].push(y[5]);
    }
    if out.r_grid.len() != n + 1 {
        return Err(LiouvilleError::Stiffness("dense output ended early".into()));
    }
    Ok(out)
}

fn quintic_hermite(h: f64, t: f64, y0: [f64; 3], y1: [f64; 3]) -> f64 {
    // y = [value, first, second] derivatives in the interpolation variable
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let g0 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let g1 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let g2 = 0.5 * (t3 - 2.0 * t4 + t5);
    h0 * y0[0] + h * h1 * y0[1] + h * h * h2 * y0[2] + g0 * y1[0] + h * g1 * y1[1] + h * h * g2 * y1[2]
}

impl RadialProfile {
    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().expect("profile is never empty")
    }

    fn coefficients(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }

    /// `(V₁, V₂, V₁', V₂')` at radius `r`.
    pub fn eval(&self, r: f64) -> [f64; 4] {
        assert!(r >= 0.0 && r <= self.r_max() * (1.0 + 1e-12), "radius {r} outside the profile");
        let c = self.coefficients();
        let r0 = self.r_grid[1];
        if r <= r0 {
            let k = series(c, [self.a1, self.a2]);
            let (v1, d1) = series_value(self.a1, &k[0], r);
            let (v2, d2) = series_value(self.a2, &k[1], r);
            return [v1, v2, d1, d2];
        }
        let s = r.ln();
        let x = ((s - self.s0) / self.ds).clamp(0.0, (self.r_grid.len() - 2) as f64);
        let i = (x.floor() as usize).min(self.r_grid.len() - 3);
        let t = x - i as f64;
        // grid index i in s corresponds to r_grid[i + 1]
        let node = |j: usize| {
            let rr = self.r_grid[j + 1];
            let v = [self.v1[j + 1], self.v2[j + 1]];
            let w = [rr * self.dv1[j + 1], rr * self.dv2[j + 1]];
            let src = [c[1] * v[1].exp() * rr * rr, c[0] * v[0].exp() * rr * rr];
            let dw = [-src[0], -src[1]];
            let ddw = [-src[0] * (w[1] + 2.0), -src[1] * (w[0] + 2.0)];
            (v, w, dw, ddw)
        };
        let (v_a, w_a, dw_a, ddw_a) = node(i);
        let (v_b, w_b, dw_b, ddw_b) = node(i + 1);
        let mut out = [0.0; 4];
        for m in 0..2 {
            out[m] = quintic_hermite(self.ds, t, [v_a[m], w_a[m], dw_a[m]], [v_b[m], w_b[m], dw_b[m]]);
            let w = quintic_hermite(self.ds, t, [w_a[m], dw_a[m], ddw_a[m]], [w_b[m], dw_b[m], ddw_b[m]]);
            out[2 + m] = w / r;
        }
        out
    }
}

fn fit_constant_with_power(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    let n = xs.len() as f64;
    let z: Vec<f64> = xs.iter().map(|x| x.powf(p)).collect();
    let sz = pairwise_sum(&z);
    let sy = pairwise_sum(ys);
    let szz = pairwise_sum(&z.iter().map(|v| v * v).collect::<Vec<_>>());
    let szy = pairwise_sum(&z.iter().zip(ys).map(|(a, b)| a * b).collect::<Vec<_>>());
    let det = n * szz - sz * sz;
    if det.abs() <= 1e-300 * n * szz || !det.is_finite() {
        return sy / n;
    }
    (szz * sy - sz * szy) / det
}

/// Masses and tail constants of a profile, extrapolated over its last decade.
pub fn masses(profile: &RadialProfile) -> Result<MassPair, LiouvilleError> {
    let r_max = profile.r_max();
    if r_max < 1e4 * (1.0 - 1e-12) {
        return Err(LiouvilleError::Input(format!("profile only reaches r = {r_max}")));
    }
    let c = profile.coefficients();
    let start = profile.r_grid.partition_point(|r| *r < r_max / 10.0);
    let idx: Vec<usize> = (start..profile.r_grid.len()).collect();
    let r: Vec<f64> = idx.iter().map(|&i| profile.r_grid[i]).collect();
    let v = [
        idx.iter().map(|&i| profile.v1[i]).collect::<Vec<_>>(),
        idx.iter().map(|&i| profile.v2[i]).collect::<Vec<_>>(),
    ];
    // m = M/2π from the flux and from the integrated density
    let flux = [
        idx.iter().map(|&i| -profile.r_grid[i] * profile.dv1[i]).collect::<Vec<_>>(),
        idx.iter().map(|&i| -profile.r_grid[i] * profile.dv2[i]).collect::<Vec<_>>(),
    ];
    let integ = [
        idx.iter().map(|&i| profile.mass_integral[0][i] / (2.0 * PI)).collect::<Vec<_>>(),
        idx.iter().map(|&i| profile.mass_integral[1][i] / (2.0 * PI)).collect::<Vec<_>>(),
    ];
    let last = r.len() - 1;
    let mut m = [flux[0][last], flux[1][last]];
    // fluxes increase with r, so m ≤ 2 at the end cannot be certified finite
    for comp in 0..2 {
        if m[comp] <= 2.0 {
            return Err(LiouvilleError::NonIntegrable { component: 2 - comp, flux: 2.0 * PI * m[comp] });
        }
    }
    let mut tails = [vec![0.0; r.len()], vec![0.0; r.len()]];
    for _ in 0..6 {
        if !(m[0] > 2.0 && m[1] > 2.0) {
            return Err(LiouvilleError::NonIntegrable { component: if m[0] > 2.0 { 1 } else { 2 }, flux: 2.0 * PI * m[0].min(m[1]) });
        }
        let p = 4.0 - m[0] - m[1];
        for comp in 0..2 {
            let other = 1 - comp;
            for (k, rr) in r.iter().enumerate() {
                tails[comp][k] = rr * rr * c[other] * v[other][k].exp() / (m[other] - 2.0);
            }
        }
        let mut next = [0.0; 2];
        for comp in 0..2 {
            let est: Vec<f64> = flux[comp].iter().zip(&tails[comp]).map(|(a, b)| a + b).collect();
            next[comp] = fit_constant_with_power(&r, &est, p);
        }
        m = next;
    }
    let p = 4.0 - m[0] - m[1];
    let mut mi = [0.0; 2];
    let mut tail_const = [0.0; 2];
    for comp in 0..2 {
        let other = 1 - comp;
        let est: Vec<f64> = integ[comp].iter().zip(&tails[comp]).map(|(a, b)| a + b).collect();
        mi[comp] = fit_constant_with_power(&r, &est, p);
        let ic: Vec<f64> = (0..r.len())
            .map(|k| v[comp][k] + m[comp] * r[k].ln() + tails[comp][k] / (m[other] - 2.0))
            .collect();
        tail_const[comp] = fit_constant_with_power(&r, &ic, p);
    }
    let out = MassPair {
        m1: 2.0 * PI * m[0],
        m2: 2.0 * PI * m[1],
        i1: tail_const[0],
        i2: tail_const[1],
        m1_integral: 2.0 * PI * mi[0],
        m2_integral: 2.0 * PI * mi[1],
    };
    for (f, i) in [(out.m1, out.m1_integral), (out.m2, out.m2_integral)] {
        if (f - i).abs() > 1e-5 {
            return Err(LiouvilleError::Resolution { flux: f, integral: i });
        }
    }
    Ok(out)
}

/// Residuals of `(M₁-8π)+(M₂-8π) = (Mᵢ-8π)²/(Mᵢ-4π)` for `i = 1, 2`.
pub fn mass_defect_identity(m1: f64, m2: f64) -> [f64; 2] {
    let lhs = (m1 - EIGHT_PI) + (m2 - EIGHT_PI);
    [
        lhs - (m1 - EIGHT_PI).powi(2) / (m1 - FOUR_PI),
        lhs - (m2 - EIGHT_PI).powi(2) / (m2 - FOUR_PI),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualMassSolution {
    pub a2: f64,
    pub masses: MassPair,
    pub profile: RadialProfile,
    /// Every bracket of a sign change found while scanning.
    pub brackets: Vec<[f64; 2]>,
}

/// Find `a₂` with `M₁ = M₂` (both `8π`) for the given `c₁, c₂, a₁`.
pub fn solve_equal_masses(c1: f64, c2: f64, a1: f64, settings: &ShootSettings) -> Result<EqualMassSolution, LiouvilleError> {
    let center = a1 + (c1 / c2).ln();
    let gap = |a2: f64| -> Result<f64, LiouvilleError> {
        let p = shoot(c1, c2, a1, a2, settings)?;
        match masses(&p) {
            Ok(m) => Ok(m.m1 - m.m2),
            Err(LiouvilleError::NonIntegrable { component: 1, .. }) => Ok(f64::INFINITY),
            Err(LiouvilleError::NonIntegrable { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let g0 = gap(center)?;
    let mut brackets = Vec::new();
    if g0 == 0.0 {
        brackets.push([center, center]);
    }
    let mut scanned = [center, center];
    let mut width = 0.25;
    while brackets.is_empty() && width <= 16.0 {
        for (lo, hi) in [(center - width, center), (center, center + width)] {
            scanned = [scanned[0].min(lo), scanned[1].max(hi)];
            let (glo, ghi) = if lo == center { (g0, gap(hi)?) } else { (gap(lo)?, g0) };
            if glo * ghi <= 0.0 {
                brackets.push([lo, hi]);
            }
        }
        width *= 2.0;
    }
    let Some(&[mut lo, mut hi]) = brackets.first() else {
        return Err(LiouvilleError::Bracket { lo: scanned[0], hi: scanned[1] });
    };
    let mut glo = gap(lo)?;
    let mut ghi = gap(hi)?;
    let mut root = if glo == 0.0 { lo } else { hi };
    for _ in 0..100 {
        if glo == 0.0 || ghi == 0.0 || hi - lo < 1e-14 * (1.0 + root.abs()) {
            break;
        }
        let secant = hi - ghi * (hi - lo) / (ghi - glo);
        let mid = 0.5 * (lo + hi);
        let trial = if secant > lo && secant < hi { secant } else { mid };
        let gt = gap(trial)?;
        root = trial;
        if gt == 0.0 {
            break;
        }
        if gt.signum() == glo.signum() {
            lo = trial;
            glo = gt;
        } else {
            hi = trial;
            ghi = gt;
        }
        // keep the bracket shrinking when the secant stalls on one side
        if gt.abs() > 1e-15 {
            let m = 0.5 * (lo + hi);
            let gm = gap(m)?;
            if gm.signum() == glo.signum() {
                lo = m;
                glo = gm;
            } else {
                hi = m;
                ghi = gm;
            }
            root = if glo.abs() < ghi.abs() { lo } else { hi };
        }
    }
    let profile = shoot(c1, c2, a1, root, settings)?;
    let masses = masses(&profile)?;
    Ok(EqualMassSolution { a2: root, masses, profile, brackets })
}

/// Largest residual of the linearized system on the kernel candidates
/// `(V₁'x₁/r, V₂'x₁/r)` and `(rV₁'+2, rV₂'+2)`, using the 5-point
/// Laplacian with step `h` at the given radii and eight angles each.
pub fn linearized_kernel_residual(profile: &RadialProfile, radii: &[f64], h: f64) -> f64 {
    let c = profile.coefficients();
    let at = |x: f64, y: f64| profile.eval(x.hypot(y));
    let translation = |x: f64, y: f64| {
        let r = x.hypot(y);
        let e = at(x, y);
        [e[2] * x / r, e[3] * x / r]
    };
    let translation_y = |x: f64, y: f64| {
        let r = x.hypot(y);
        let e = at(x, y);
        [e[2] * y / r, e[3] * y / r]
    };
    let scaling = |x: f64, y: f64| {
        let r = x.hypot(y);
        let e = at(x, y);
        [r * e[2] + 2.0, r * e[3] + 2.0]
    };
    let mut worst: f64 = 0.0;
    let candidates: [&dyn Fn(f64, f64) -> [f64; 2]; 3] = [&translation, &translation_y, &scaling];
    for &r in radii {
        for m in 0..8 {
            let th = PI * (m as f64 + 0.25) / 4.0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let e = at(x, y);
            for phi in candidates {
                let p0 = phi(x, y);
                let sum = [phi(x + h, y), phi(x - h, y), phi(x, y + h), phi(x, y - h)];
                for i in 0..2 {
                    let lap = (sum[0][i] + sum[1][i] + sum[2][i] + sum[3][i] - 4.0 * p0[i]) / (h * h);
                    let other = 1 - i;
                    let res = lap + c[other] * e[other].exp() * p0[other];
                    worst = worst.max(res.abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> ShootSettings {
        ShootSettings::default()
    }

    #[test]
    fn symmetric_shot_is_the_explicit_solution() {
        let p = shoot(1.0, 1.0, 0.0, 0.0, &settings()).unwrap();
        let mut worst: f64 = 0.0;
        for (i, r) in p.r_grid.iter().enumerate() {
            let exact = -2.0 * (1.0 + r * r / 8.0).ln();
            worst = worst.max((p.v1[i] - exact).abs()).max((p.v2[i] - exact).abs());
        }
        assert!(worst < 1e-8, "sup error {worst:e}");
        let m = masses(&p).unwrap();
        assert!((m.m1 - EIGHT_PI).abs() < 1e-6 && (m.m2 - EIGHT_PI).abs() < 1e-6, "{m:?}");
        // V = -4 ln r + ln 64 + o(1)
        assert!((m.i1 - 64f64.ln()).abs() < 1e-6, "{}", m.i1);
    }

    #[test]
    fn swapping_components_swaps_the_profile() {
        let a = shoot(2.0, 0.5, 0.3, -1.0, &settings()).unwrap();
        let b = shoot(0.5, 2.0, -1.0, 0.3, &settings()).unwrap();
        for i in 0..a.r_grid.len() {
            assert!((a.v1[i] - b.v2[i]).abs() < 1e-12 * (1.0 + a.v1[i].abs()));
        }
    }

    #[test]
    fn masses_lie_on_the_hyperbola() {
        for (c1, c2, a1, a2) in [(2.0, 1.0, 0.0, 2f64.ln() - 0.2), (1.0, 1.0, 0.0, -0.1), (0.3, 7.0, 0.5, -2.5), (1.0, 1.0, 0.0, 0.3)] {
            let m = masses(&shoot(c1, c2, a1, a2, &settings()).unwrap()).unwrap();
            assert!(m.identity_residual().abs() < 1e-7, "{m:?} residual {:e}", m.identity_residual());
            assert!(m.m1 > FOUR_PI && m.m2 > FOUR_PI);
            let d = mass_defect_identity(m.m1, m.m2);
            assert!(d[0].abs() < 1e-7 && d[1].abs() < 1e-7, "{d:?}");
        }
        let m = masses(&shoot(1.0, 1.0, 0.0, -0.1, &settings()).unwrap()).unwrap();
        assert!((m.m1 - m.m2).abs() > 1e-3);
    }

    #[test]
    fn far_from_balance_one_mass_diverges() {
        let p = shoot(1.0, 1.0, 0.0, -1.0, &settings()).unwrap();
        assert!(matches!(masses(&p), Err(LiouvilleError::NonIntegrable { component: 2, .. })));
        let p = shoot(2.0, 1.0, 0.0, 0.0, &settings()).unwrap();
        assert!(matches!(masses(&p), Err(LiouvilleError::NonIntegrable { .. })));
    }

    #[test]
    fn masses_are_scale_invariant() {
        let base = masses(&shoot(1.3, 0.6, 0.2, 0.9, &settings()).unwrap()).unwrap();
        for lambda in [0.5f64, 3.0] {
            let sh = 2.0 * lambda.ln();
            let m = masses(&shoot(1.3, 0.6, 0.2 + sh, 0.9 + sh, &settings()).unwrap()).unwrap();
            assert!((m.m1 - base.m1).abs() < 1e-7 && (m.m2 - base.m2).abs() < 1e-7, "{m:?} {base:?}");
        }
    }

    #[test]
    fn defect_identity_closed_forms() {
        assert_eq!(mass_defect_identity(EIGHT_PI, EIGHT_PI), [0.0, 0.0]);
        let d = mass_defect_identity(12.0 * PI, 6.0 * PI);
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
    }

    #[test]
    fn equal_masses_root() {
        let s = solve_equal_masses(2.0, 1.0, 0.0, &settings()).unwrap();
        assert!((s.a2 - 2f64.ln()).abs() < 1e-7, "{}", s.a2);
        assert!((s.masses.m1 - EIGHT_PI).abs() < 1e-6 && (s.masses.m2 - EIGHT_PI).abs() < 1e-6);
        let t = solve_equal_masses(1.5, 1.5, 0.2, &settings()).unwrap();
        assert!((t.a2 - 0.2).abs() < 1e-9);
    }

    #[test]
    fn tail_constants_stable_under_longer_shots() {
        let a = masses(&shoot(1.0, 3.0, 0.0, 0.1 - 3f64.ln(), &settings()).unwrap()).unwrap();
        let b = masses(&shoot(1.0, 3.0, 0.0, 0.1 - 3f64.ln(), &ShootSettings { r_max: 1e5, ..settings() }).unwrap()).unwrap();
        assert!((a.i1 - b.i1).abs() < 1e-5 && (a.i2 - b.i2).abs() < 1e-5, "{a:?} {b:?}");
    }

    #[test]
    fn kernel_candidates_solve_the_linearized_system() {
        let p = shoot(1.0, 1.0, 0.0, 0.0, &settings()).unwrap();
        let res = linearized_kernel_residual(&p, &[0.3, 1.0, 2.5, 7.0, 20.0], 1e-3);
        assert!(res < 1e-5, "{res:e}");
        let q = shoot(2.0, 0.7, 0.1, -0.5, &settings()).unwrap();
        let res = linearized_kernel_residual(&q, &[0.3, 1.0, 2.5, 7.0, 20.0], 1e-3);
        assert!(res < 1e-5, "{res:e}");
    }

    #[test]
    fn scaling_mode_tends_to_its_limit() {
        let p = shoot(1.0, 2.0, 0.0, 0.05 - 2f64.ln(), &settings()).unwrap();
        let m = masses(&p).unwrap();
        let last = p.r_grid.len() - 1;
        let r = p.r_grid[last];
        assert!((r * p.dv1[last] + 2.0 - (2.0 - m.m1 / (2.0 * PI))).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(shoot(-1.0, 1.0, 0.0, 0.0, &settings()).is_err());
        assert!(shoot(1.0, 1.0, 0.0, 0.0, &ShootSettings { r_max: 10.0, ..settings() }).is_err());
    }
}
