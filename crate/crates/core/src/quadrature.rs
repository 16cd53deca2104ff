//! Regularized integrals of the form
//!
//! ```text
//! T = lim_{δ→0} [ ∫_{C∖B_δ(q)} (e^{f(x)} - 1)/|x-q|⁴ dx - ∫_{ℝ²∖C} |x-q|⁻⁴ dx ]
//! ```
//!
//! over a cell `C ∋ q`, where `f` is smooth near `q` with `f(q) = 0`,
//! `∇f(q) = 0` and a harmonic quadratic part. The density `W = e^f/|x-q|⁴`
//! is assumed to be a periodic function, so that
//! `T = lim [∫_{C∖B_δ} W - π/δ²]` does not depend on how `C` is lifted to the
//! plane.
//!
//! The cell is split into a disc `B_{δ₀}`, the rest of a parallelogram `P`
//! centered at `q`, and the remaining patches `C∖P`:
//!
//! ```text
//! T = ∫_{B_{δ₀}∖B_δ} (e^f-1)/r⁴ + ∫_{P∖B_{δ₀}} (e^f-1)/r⁴ + ∫_{C∖P} W - ∫_{ℝ²∖P} r⁻⁴
//! ```
//!
//! The disc uses `N` equally spaced angles with `4 | N`, on which the angular
//! sum of every harmonic of order below `N` vanishes, and Gauss nodes in
//! `ln r`. The remaining `δ`-dependence is even in `δ` and is removed by
//! Richardson extrapolation. The exterior of `P` is integrated in closed form.

use crate::lattice::LatticeBasis;
use crate::numeric::{pairwise_sum, richardson, GaussLegendre};
use crate::partition::{CellGeometry, CenteredParallelogram, Patch};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Relative rounding error of the extrapolated sum, counted against the piece magnitudes.
const ROUNDING_FLOOR: f64 = 1e-12;

const MAX_RING_EXPONENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExteriorMethod {
    /// `∫_{ℝ²∖P} r⁻⁴` summed edge by edge in closed form.
    #[default]
    ClosedForm,
    /// Polar quadrature on `B_R∖P` plus the analytic tail `π/R²`.
    RingTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingularQuadratureSettings {
    /// Radii `δ₀·factor` used for extrapolation, decreasing.
    pub delta_factors: Vec<f64>,
    /// Disc radius; chosen from the geometry when absent.
    pub delta0: Option<f64>,
    /// Angles per ring; must be divisible by 4.
    pub angular_nodes: usize,
    /// Gauss nodes per radial panel.
    pub radial_nodes: usize,
    /// Gauss nodes per edge panel of the parallelogram, in arclength along the edge.
    pub sector_nodes: usize,
    /// Tensor Gauss order on the patches outside the parallelogram.
    pub cell_nodes: usize,
    pub exterior: ExteriorMethod,
    /// Outer radius for [`ExteriorMethod::RingTail`], in units of the cell diameter.
    pub outer_cutoff_factor: f64,
    /// Weight every `D²` term by `e^{-u_{0,i}(q_1)}` instead of `e^{-u_{0,i}(q_j)}`.
    pub literal_first_point: bool,
}

impl Default for SingularQuadratureSettings {
    fn default() -> Self {
        Self {
            delta_factors: vec![1.0, 0.5, 0.25, 0.125],
            delta0: None,
            angular_nodes: 64,
            radial_nodes: 16,
            sector_nodes: 24,
            cell_nodes: 10,
            exterior: ExteriorMethod::ClosedForm,
            outer_cutoff_factor: 6.0,
            literal_first_point: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid quadrature settings: {0}")]
    Settings(String),
    #[error("extrapolation did not converge: value {value:e}, error estimate {error:e}")]
    NotConverged { value: f64, error: f64 },
    #[error("non-finite integrand value near {0}")]
    NonFinite(Complex64),
}

impl SingularQuadratureSettings {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        let bad = |m: &str| Err(QuadratureError::Settings(m.to_string()));
        if self.angular_nodes == 0 || self.angular_nodes % 4 != 0 {
            return bad("angular_nodes must be a positive multiple of 4");
        }
        if self.delta_factors.len() < 2 {
            return bad("delta_factors needs at least two radii");
        }
        if self.delta_factors.iter().any(|d| !(*d > 0.0 && *d <= 1.0))
            || self.delta_factors.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("delta_factors must be strictly decreasing values in (0, 1]");
        }
        let ratio = self.delta_factors[1] / self.delta_factors[0];
        if self.delta_factors.windows(2).any(|w| ((w[1] / w[0]) - ratio).abs() > 1e-12) {
            return bad("delta_factors must form a geometric sequence");
        }
        if self.radial_nodes < 2 || self.sector_nodes < 2 || self.cell_nodes < 2 {
            return bad("node counts must be at least 2");
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d.is_finite()) {
                return bad("delta0 must be positive");
            }
        }
        if !(self.outer_cutoff_factor > 1.0) {
            return bad("outer_cutoff_factor must exceed 1");
        }
        Ok(())
    }

    fn refined(&self) -> Self {
        Self {
            angular_nodes: 2 * self.angular_nodes,
            radial_nodes: 2 * self.radial_nodes,
            sector_nodes: 2 * self.sector_nodes,
            cell_nodes: 2 * self.cell_nodes,
            ..self.clone()
        }
    }
}

/// The exponent `f` of a regularized integral around its center `q`.
pub trait LocalExponent: Sync {
    fn center(&self) -> Complex64;
    /// `f(q + z)` for a plane displacement `z`, accurate as `z → 0`.
    fn near(&self, z: Complex64) -> f64;
    /// `ln W(x)`, periodic; may be `-∞`.
    fn log_density(&self, x: Complex64) -> f64;
    /// Distance from `q` to the nearest singularity of `f` (other than the
    /// removable behaviour at `q` itself).
    fn analytic_radius(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralPieces {
    pub disc: f64,
    pub polar: f64,
    pub outer: f64,
    pub exterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedIntegral {
    pub value: f64,
    pub error: f64,
    pub delta0: f64,
    /// `T(δ₀·factor)` before extrapolation, fine resolution.
    pub samples: Vec<f64>,
    pub pieces: IntegralPieces,
}

impl RegularizedIntegral {
    /// Sum of the magnitudes of the pieces; the natural scale of the result.
    pub fn scale(&self) -> f64 {
        self.pieces.disc.abs() + self.pieces.polar.abs() + self.pieces.outer.abs() + self.pieces.exterior.abs()
    }
}

/// `∫_{ℝ²∖P} |x-c|⁻⁴ dx` for the centered parallelogram `P`.
pub fn exterior_closed_form(p: &CenteredParallelogram) -> f64 {
    let mut acc = 0.0;
    for (v0, v1) in edges(p) {
        let (d, theta_n) = edge_line(v0, v1);
        let phi_a = wrap(v0.arg() - theta_n);
        let phi_b = wrap(v1.arg() - theta_n);
        let prim = |phi: f64| phi / 2.0 + (2.0 * phi).sin() / 4.0;
        acc += (prim(phi_b) - prim(phi_a)) / (2.0 * d * d);
    }
    acc
}

/// `∫_{B_R∖P} r⁻⁴` by polar Gauss quadrature, plus `π/R²`.
pub fn exterior_ring_tail(p: &CenteredParallelogram, outer_radius: f64, nodes: usize) -> f64 {
    let gl = GaussLegendre::new(nodes);
    let mut terms = Vec::new();
    for (v0, v1) in edges(p) {
        let (ta, tb) = sector_angles(v0, v1);
        for (theta, wt) in gl.mapped(ta, tb) {
            let rho = ray_to_edge(theta, v0, v1);
            // ∫_ρ^R r⁻³ dr in the variable ln r
            let (la, lb) = (rho.ln(), outer_radius.ln());
            let panels = (((lb - la) / 0.5).ceil() as usize).max(1);
            let h = (lb - la) / panels as f64;
            for k in 0..panels {
                for (t, w) in gl.mapped(la + k as f64 * h, la + (k + 1) as f64 * h) {
                    terms.push(wt * w * (-2.0 * t).exp());
                }
            }
        }
    }
    pairwise_sum(&terms) + PI / (outer_radius * outer_radius)
}

/// Monte-Carlo estimate of `∫_{B_R∖P} r⁻⁴ + π/R²` with its standard error.
pub fn exterior_monte_carlo<R: Rng>(p: &CenteredParallelogram, outer_radius: f64, samples: usize, rng: &mut R) -> (f64, f64) {
    let (a, b) = (p.a, p.b);
    let det = (a.conj() * b).im;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let r = outer_radius * rng.gen::<f64>().sqrt();
        let th = 2.0 * PI * rng.gen::<f64>();
        let z = Complex64::from_polar(r, th);
        let sigma = (z.conj() * b).im / det;
        let tau = (a.conj() * z).im / det;
        let v = if sigma.abs() <= 1.0 && tau.abs() <= 1.0 { 0.0 } else { r.powi(-4) };
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    let area = PI * outer_radius * outer_radius;
    (area * mean + PI / (outer_radius * outer_radius), area * (var / n).sqrt())
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn edges(p: &CenteredParallelogram) -> [(Complex64, Complex64); 4] {
    let v = p.vertices();
    [(v[0], v[1]), (v[1], v[2]), (v[2], v[3]), (v[3], v[0])]
}

/// Distance from the origin to the line through `v0, v1`, and the angle of its normal.
fn edge_line(v0: Complex64, v1: Complex64) -> (f64, f64) {
    let d = v1 - v0;
    let dist = (d.conj() * v0).im.abs() / d.norm();
    let normal = Complex64::new(d.im, -d.re);
    let normal = if (normal.conj() * v0).re < 0.0 { -normal } else { normal };
    (dist, normal.arg())
}

fn sector_angles(v0: Complex64, v1: Complex64) -> (f64, f64) {
    let a = v0.arg();
    let mut b = v1.arg();
    while b <= a {
        b += 2.0 * PI;
    }
    (a, b)
}

fn ray_to_edge(theta: f64, v0: Complex64, v1: Complex64) -> f64 {
    let e = Complex64::from_polar(1.0, theta);
    let d = v1 - v0;
    (d.conj() * v0).im / (d.conj() * e).im
}

/// Adaptive tensor Gauss over a patch in basis coordinates.
fn integrate_patch(
    basis: &LatticeBasis,
    patch: &Patch,
    gl: &GaussLegendre,
    density: &(dyn Fn(Complex64) -> f64 + Sync),
    tol: f64,
    depth: usize,
) -> (f64, f64) {
    let rule = |p: &Patch| -> f64 {
        let mut terms = Vec::with_capacity(gl.len() * gl.len());
        for (s, ws) in gl.mapped(p.s[0], p.s[1]) {
            for (t, wt) in gl.mapped(p.t[0], p.t[1]) {
                terms.push(ws * wt * density(basis.from_coords(s, t)));
            }
        }
        pairwise_sum(&terms) * basis.area()
    };
    let whole = rule(patch);
    let (sm, tm) = (0.5 * (patch.s[0] + patch.s[1]), 0.5 * (patch.t[0] + patch.t[1]));
    let kids = [
        Patch::new(patch.s[0], sm, patch.t[0], tm),
        Patch::new(sm, patch.s[1], patch.t[0], tm),
        Patch::new(patch.s[0], sm, tm, patch.t[1]),
        Patch::new(sm, patch.s[1], tm, patch.t[1]),
    ];
    let parts: Vec<f64> = kids.iter().map(|k| rule(k)).collect();
    let split = pairwise_sum(&parts);
    let diff = (split - whole).abs();
    if diff <= tol.max(1e-13 * split.abs()) || depth == 0 {
        return (split, diff);
    }
    let sub: Vec<(f64, f64)> =
        kids.par_iter().map(|k| integrate_patch(basis, k, gl, density, tol / 4.0, depth - 1)).collect();
    let vals: Vec<f64> = sub.iter().map(|x| x.0).collect();
    let errs: Vec<f64> = sub.iter().map(|x| x.1).collect();
    (pairwise_sum(&vals), pairwise_sum(&errs))
}

/// Split long thin patches into pieces of comparable side lengths.
fn squarish(basis: &LatticeBasis, p: &Patch) -> Vec<Patch> {
    let ls = (p.s[1] - p.s[0]) * basis.omega1().norm();
    let lt = (p.t[1] - p.t[0]) * basis.omega2().norm();
    let (ns, nt) = if ls > lt { (((ls / lt).round() as usize).clamp(1, 64), 1) } else { (1, ((lt / ls).round() as usize).clamp(1, 64)) };
    let mut out = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        for j in 0..nt {
            let s0 = p.s[0] + (p.s[1] - p.s[0]) * i as f64 / ns as f64;
            let s1 = p.s[0] + (p.s[1] - p.s[0]) * (i + 1) as f64 / ns as f64;
            let t0 = p.t[0] + (p.t[1] - p.t[0]) * j as f64 / nt as f64;
            let t1 = p.t[0] + (p.t[1] - p.t[0]) * (j + 1) as f64 / nt as f64;
            out.push(Patch::new(s0, s1, t0, t1));
        }
    }
    out
}

struct Level {
    samples: Vec<f64>,
    pieces: IntegralPieces,
}

fn evaluate_level(
    exponent: &dyn LocalExponent,
    basis: &LatticeBasis,
    geometry: &CellGeometry,
    delta0: f64,
    s: &SingularQuadratureSettings,
) -> Result<Level, QuadratureError> {
    let q = exponent.center();
    let p = &geometry.inner;
    let gl_r = GaussLegendre::new(s.radial_nodes);
    let n_ang = s.angular_nodes;
    let ln_d0 = delta0.ln();

    // disc rings δ → δ₀ for each δ, integrand (e^f - 1)/r² dt dθ
    let mut disc = Vec::with_capacity(s.delta_factors.len());
    for &factor in &s.delta_factors {
        if factor == 1.0 {
            disc.push(0.0);
            continue;
        }
        let ln_d = (delta0 * factor).ln();
        let panels = (((ln_d0 - ln_d) / 0.75).ceil() as usize).max(1);
        let h = (ln_d0 - ln_d) / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels).flat_map(|k| gl_r.mapped(ln_d + k as f64 * h, ln_d + (k + 1) as f64 * h).collect::<Vec<_>>()).collect();
        let per_angle: Vec<f64> = (0..n_ang)
            .into_par_iter()
            .map(|m| {
                let theta = 2.0 * PI * (m as f64 + 0.5) / n_ang as f64;
                let e = Complex64::from_polar(1.0, theta);
                let terms: Vec<f64> = nodes
                    .iter()
                    .map(|&(t, w)| {
                        let r = t.exp();
                        w * exponent.near(e * r).exp_m1() / (r * r)
                    })
                    .collect();
                pairwise_sum(&terms)
            })
            .collect();
        disc.push(pairwise_sum(&per_angle) * 2.0 * PI / n_ang as f64);
    }

    // polar region P ∖ B_{δ₀}, rays parametrized by arclength along each edge
    let gl_t = GaussLegendre::new(s.sector_nodes);
    let mut rays = Vec::new();
    for (v0, v1) in edges(p) {
        let (d, _) = edge_line(v0, v1);
        let len = (v1 - v0).norm();
        let panels = ((len / (2.0 * d)).ceil() as usize).max(1);
        for k in 0..panels {
            let (ua, ub) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
            for (u, w) in gl_t.mapped(ua, ub) {
                let x = v0 + (v1 - v0) * u;
                let rho = x.norm();
                // dθ = d·|v₁ - v₀|·du / ρ²
                rays.push((x / rho, w * d * len / (rho * rho), rho));
            }
        }
    }
    let polar_terms: Vec<f64> = rays
        .par_iter()
        .map(|&(e, wt, rho)| {
            let (la, lb) = (ln_d0, rho.ln());
            let panels = (((lb - la) / 0.5).ceil() as usize).max(1);
            let h = (lb - la) / panels as f64;
            let mut terms = Vec::with_capacity(panels * gl_r.len());
            for k in 0..panels {
                for (t, w) in gl_r.mapped(la + k as f64 * h, la + (k + 1) as f64 * h) {
                    let r = t.exp();
                    terms.push(w * exponent.near(e * r).exp_m1() / (r * r));
                }
            }
            wt * pairwise_sum(&terms)
        })
        .collect();
    let polar = pairwise_sum(&polar_terms);

    // C ∖ P
    let gl_c = GaussLegendre::new(s.cell_nodes);
    let density = |x: Complex64| exponent.log_density(x).exp();
    let pieces: Vec<Patch> = geometry.outer.iter().flat_map(|pt| squarish(basis, pt)).collect();
    let outer_parts: Vec<f64> =
        pieces.par_iter().map(|pt| integrate_patch(basis, pt, &gl_c, &density, 1e-13 * pt.area() * basis.area(), 6).0).collect();
    let outer = pairwise_sum(&outer_parts);

    let exterior = match s.exterior {
        ExteriorMethod::ClosedForm => exterior_closed_form(p),
        ExteriorMethod::RingTail => {
            let radius = s.outer_cutoff_factor * basis.diameter();
            exterior_ring_tail(p, radius, s.sector_nodes)
        }
    };

    let base = polar + outer - exterior;
    let samples: Vec<f64> = disc.iter().map(|d| d + base).collect();
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        let _ = bad;
        return Err(QuadratureError::NonFinite(q));
    }
    Ok(Level { samples, pieces: IntegralPieces { disc: *disc.last().unwrap_or(&0.0), polar, outer, exterior } })
}

/// Disc radius used when the settings leave it open.
pub fn default_delta0(exponent: &dyn LocalExponent, geometry: &CellGeometry) -> f64 {
    let mut delta = (0.25 * exponent.analytic_radius()).min(0.5 * geometry.inner.inradius());
    // keep the exponent small on the outermost ring
    for _ in 0..40 {
        let worst = (0..16)
            .map(|m| exponent.near(Complex64::from_polar(delta, PI * m as f64 / 16.0)).abs())
            .fold(0.0, f64::max);
        if worst <= MAX_RING_EXPONENT {
            break;
        }
        delta *= 0.7;
    }
    delta
}

/// The regularized integral of `exponent` over `geometry`, extrapolated in `δ`.
pub fn regularized_integral(
    exponent: &dyn LocalExponent,
    basis: &LatticeBasis,
    geometry: &CellGeometry,
    settings: &SingularQuadratureSettings,
) -> Result<RegularizedIntegral, QuadratureError> {
    settings.validate()?;
    let delta0 = settings.delta0.unwrap_or_else(|| default_delta0(exponent, geometry));
    if delta0 >= geometry.inner.inradius() {
        return Err(QuadratureError::Settings(format!(
            "delta0 = {delta0:e} does not fit inside the cell (inradius {:e})",
            geometry.inner.inradius()
        )));
    }
    let ratio = settings.delta_factors[1] / settings.delta_factors[0];
    let exps: Vec<f64> = (1..settings.delta_factors.len()).map(|k| 2.0 * k as f64).collect();

    let coarse = evaluate_level(exponent, basis, geometry, delta0, settings)?;
    let fine = evaluate_level(exponent, basis, geometry, delta0, &settings.refined())?;
    let (v_coarse, _) = richardson(&coarse.samples, ratio, &exps);
    let (v_fine, spread) = richardson(&fine.samples, ratio, &exps);

    let pieces = fine.pieces;
    let scale = pieces.disc.abs() + pieces.polar.abs() + pieces.outer.abs() + pieces.exterior.abs();
    let error = spread + (v_fine - v_coarse).abs() + ROUNDING_FLOOR * scale;
    let out = RegularizedIntegral { value: v_fine, error, delta0, samples: fine.samples, pieces };
    if error > 1e-4 * v_fine.abs().max(scale) {
        return Err(QuadratureError::NotConverged { value: v_fine, error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionSpec;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `f = Re(a z²) + b|z|⁴`-like test exponent: `f(z) = Re(a z²) + b·Re(z⁴)`
    /// plus a radial `c·|z|⁴` term whose disc contribution is explicit.
    struct Poly {
        a: Complex64,
        cc: f64,
    }

    impl LocalExponent for Poly {
        fn center(&self) -> Complex64 {
            c(0.0, 0.0)
        }
        fn near(&self, z: Complex64) -> f64 {
            (self.a * z * z).re + self.cc * z.norm_sqr() * z.norm_sqr()
        }
        fn log_density(&self, x: Complex64) -> f64 {
            self.near(x) - 4.0 * x.norm().ln()
        }
        fn analytic_radius(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn exterior_of_square_matches_ring_tail() {
        let p = CenteredParallelogram { center: c(0.0, 0.0), a: c(0.5, 0.0), b: c(0.0, 0.5), half_width: 0.5 };
        let closed = exterior_closed_form(&p);
        let ring = exterior_ring_tail(&p, 6.0 * 2f64.sqrt(), 48);
        assert!((closed - ring).abs() < 1e-12 * closed, "{closed} {ring}");
        // ∫_{ℝ²∖B_r} r⁻⁴ = π/r² bounds the square's exterior from both sides
        assert!(closed < PI / 0.25 && closed > PI / 0.5);
    }

    #[test]
    fn exterior_matches_monte_carlo() {
        let b = LatticeBasis::from_tau(c(0.3, 0.9)).unwrap();
        let p = CenteredParallelogram { center: c(0.0, 0.0), a: b.omega1() * 0.5, b: b.omega2() * 0.5, half_width: 0.5 };
        let radius = 6.0 * b.diameter();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (mc, se) = exterior_monte_carlo(&p, radius, 1_000_000, &mut rng);
        let closed = exterior_closed_form(&p);
        assert!((mc - closed).abs() < 3.0 * se, "mc={mc} se={se} closed={closed}");
    }

    #[test]
    fn pure_quadratic_exponent_has_closed_form() {
        // f = Re(a z²): the disc part cancels on the node set and the rest
        // is a smooth integral; compare against a brute-force polar integral
        // of e^f/r⁴ - 1/r⁴ over the square plus the exterior.
        let f = Poly { a: c(0.7, -0.4), cc: 0.0 };
        let b = LatticeBasis::square();
        let geom = PartitionSpec::single_cell(&b, c(0.0, 0.0), 0.01).geometry(&b, &[c(0.0, 0.0)]).unwrap();
        let r = regularized_integral(&f, &b, &geom[0], &SingularQuadratureSettings::default()).unwrap();
        // reference: ∫_P (e^f - 1)/r⁴ via polar coordinates with the inner
        // angular average taken analytically through a Bessel-type series
        let mut reference = 0.0;
        let gl = GaussLegendre::new(200);
        let p = &geom[0].inner;
        for (v0, v1) in edges(p) {
            let (ta, tb) = sector_angles(v0, v1);
            for (th, wt) in gl.mapped(ta, tb) {
                let rho = ray_to_edge(th, v0, v1);
                let e = Complex64::from_polar(1.0, th);
                // ∫_0^ρ (e^f - 1 - f)/r³ dr + ∫_0^ρ f/r³ dr, the latter in closed form
                let k = (f.a * e * e).re;
                let mut inner = 0.0;
                for (r, w) in gl.mapped(0.0, rho) {
                    let x = k * r * r;
                    inner += w * (x.exp_m1() - x) / (r * r * r);
                }
                reference += wt * (inner + k * rho.ln());
            }
        }
        // the k·ln ρ pieces integrate the f/r⁴ term from a common inner radius; the
        // common ln r₀ term has zero angular mean
        reference -= exterior_closed_form(p);
        assert!((r.value - reference).abs() < 1e-9, "{} vs {reference} (err {})", r.value, r.error);
        assert!(r.error < 1e-8);
    }

    #[test]
    fn settings_validation() {
        let mut s = SingularQuadratureSettings::default();
        s.angular_nodes = 30;
        assert!(s.validate().is_err());
        let mut s = SingularQuadratureSettings::default();
        s.delta_factors = vec![1.0, 0.5, 0.3];
        assert!(s.validate().is_err());
        assert!(SingularQuadratureSettings::default().validate().is_ok());
    }
}
