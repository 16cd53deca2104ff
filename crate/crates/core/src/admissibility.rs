//! The singular admissibility functionals `D(q)`, `D²(q)` and the
//! necessary-condition report for a candidate blow-up configuration.

use crate::census::{find_critical_points, CensusError, PointKind};
use crate::green::{GreenError, GreenFunction};
use crate::lattice::LatticeBasis;
use crate::partition::{CellGeometry, CenteredParallelogram, PartitionError};
use crate::potentials::{
    condition1_residual, f_rest, g_star_gradient, log_rho_ij, u0, BlowupConfig, Component, VortexConfig, EIGHT_PI,
};
use crate::quadrature::{regularized_integral, LocalExponent, QuadratureError, RegularizedIntegral, SingularQuadratureSettings};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pass threshold for conditions (1) and (2).
pub const CONDITION_TOLERANCE: f64 = 1e-6;
/// Gradient size above which the `δ → 0` limit is not guaranteed.
pub const GRADIENT_WARNING: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AdmissibilityError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Census(#[from] CensusError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-positive weight {weight:e} for component {component:?} at point {j}")]
    Weight { component: Component, j: usize, weight: f64 },
}

/// `D(q)` with its error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DValue {
    pub q: Complex64,
    pub value: f64,
    pub error: f64,
    /// `e^{-8πG(q)}`.
    pub weight: f64,
    pub integral: RegularizedIntegral,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Term {
    pub j: usize,
    pub component: Component,
    pub weight: f64,
    pub integral: RegularizedIntegral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Value {
    pub value: f64,
    pub error: f64,
    pub terms: Vec<D2Term>,
    pub warnings: Vec<String>,
}

struct SingleExponent<'a> {
    g: &'a GreenFunction,
    q: Complex64,
    offset: f64,
}

impl LocalExponent for SingleExponent<'_> {
    fn center(&self) -> Complex64 {
        self.q
    }

    fn near(&self, z: Complex64) -> f64 {
        EIGHT_PI * (self.g.regular_part_plane(z) - self.g.value_or_infinite(self.q + z)) + self.offset
    }

    fn log_density(&self, x: Complex64) -> f64 {
        EIGHT_PI * (self.g.value_or_infinite(x - self.q) - self.g.value_or_infinite(x)) + self.offset
    }

    fn analytic_radius(&self) -> f64 {
        self.g.basis().centered(self.q).norm().min(self.g.basis().min_period())
    }
}

/// The whole reduced cell centered at `q`.
fn centered_cell(basis: &LatticeBasis, q: Complex64) -> CellGeometry {
    let (a, b) = basis.reduced_generators();
    CellGeometry { q_index: 0, inner: CenteredParallelogram { center: q, a: a * 0.5, b: b * 0.5, half_width: 0.5 }, outer: Vec::new() }
}

fn reduced_basis_of(g: &GreenFunction) -> LatticeBasis {
    g.basis().reduced_basis()
}

/// `D(q) = e^{-8πG(q)}·lim_{δ→0}[∫_{Ω∖B_δ(q)} (e^{h}-1)/|z-q|⁴ - ∫_{ℝ²∖Ω} |z-q|⁻⁴]`
/// with `h(z) = 8π(γ(z,q) - γ(q,q) + G(q) - G(z))`.
pub fn d_functional(g: &GreenFunction, q: Complex64, settings: &SingularQuadratureSettings) -> Result<DValue, AdmissibilityError> {
    let basis = reduced_basis_of(g);
    let q = basis.reduce(q).z();
    let gq = g.value(q)?;
    let grad = g.gradient(q)?;
    let mut warnings = Vec::new();
    let gnorm = EIGHT_PI * grad[0].hypot(grad[1]);
    if gnorm >= GRADIENT_WARNING {
        warnings.push(format!("exponent gradient {gnorm:.3e} at q = {q} is not small; the limit may not exist"));
    }
    let exponent = SingleExponent { g, q, offset: EIGHT_PI * (gq - g.robin_constant()) };
    let geometry = centered_cell(&basis, q);
    let integral = regularized_integral(&exponent, &basis, &geometry, settings)?;
    let weight = (-EIGHT_PI * gq).exp();
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(AdmissibilityError::Weight { component: Component::First, j: 0, weight });
    }
    Ok(DValue { q, value: weight * integral.value, error: weight * integral.error, weight, integral, warnings })
}

struct CellExponent<'a> {
    g: &'a GreenFunction,
    cfg: &'a VortexConfig,
    blowup: &'a BlowupConfig,
    c: Component,
    j: usize,
}

impl CellExponent<'_> {
    fn rest(&self, x: Complex64) -> f64 {
        match f_rest(self.g, self.cfg, self.blowup, self.c, self.j, x) {
            Ok(v) => v,
            // only vortices can be hit: u₀ → -∞ there
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

impl LocalExponent for CellExponent<'_> {
    fn center(&self) -> Complex64 {
        self.blowup.q[self.j]
    }

    fn near(&self, z: Complex64) -> f64 {
        let qj = self.blowup.q[self.j];
        EIGHT_PI * (self.g.regular_part_plane(z) - self.g.robin_constant()) + self.rest(qj + z)
    }

    fn log_density(&self, x: Complex64) -> f64 {
        let qj = self.blowup.q[self.j];
        EIGHT_PI * (self.g.value_or_infinite(x - qj) - self.g.robin_constant()) + self.rest(x)
    }

    fn analytic_radius(&self) -> f64 {
        let basis = self.g.basis();
        let qj = self.blowup.q[self.j];
        let mut r = basis.min_period();
        for p in self.cfg.vortices(self.c) {
            r = r.min(basis.distance(*p, qj));
        }
        for (l, ql) in self.blowup.q.iter().enumerate() {
            if l != self.j {
                r = r.min(basis.distance(*ql, qj));
            }
        }
        r
    }
}

fn check_masses(cfg: &VortexConfig, blowup: &BlowupConfig) -> Result<(), AdmissibilityError> {
    if blowup.q.is_empty() {
        return Err(AdmissibilityError::Config("no blow-up points".into()));
    }
    if blowup.masses.len() != blowup.q.len() {
        return Err(AdmissibilityError::Config("one mass pair per blow-up point is required".into()));
    }
    if blowup.masses.iter().flatten().any(|m| (m - EIGHT_PI).abs() > 1e-12 * EIGHT_PI) {
        return Err(AdmissibilityError::Config("all masses must equal 8π".into()));
    }
    for c in Component::BOTH {
        if cfg.count(c) != 2 * blowup.k() {
            return Err(AdmissibilityError::Config(format!(
                "component {:?} has {} vortices; 2k = {} are required",
                c,
                cfg.count(c),
                2 * blowup.k()
            )));
        }
    }
    Ok(())
}

/// Integration geometry of every cell: the partition when one is given,
/// otherwise the reduced cell around the single point.
fn cells(g: &GreenFunction, blowup: &BlowupConfig) -> Result<(LatticeBasis, Vec<CellGeometry>), AdmissibilityError> {
    match &blowup.partition {
        Some(p) => Ok((*g.basis(), p.geometry(g.basis(), &blowup.q)?)),
        None if blowup.k() == 1 => {
            let basis = reduced_basis_of(g);
            Ok((basis, vec![centered_cell(&basis, blowup.q[0])]))
        }
        None => Err(AdmissibilityError::Config("a partition is required when k > 1".into())),
    }
}

/// `D² = Σ_j Σ_i (ρ_{i,j}/e^{u_{0,i}(q_j)})·T_{i,j}`, where `T_{i,j}` is the
/// regularized integral of `e^{f_{i,j}}` over the cell of `q_j`. With
/// `settings.literal_first_point` the denominator uses `q_1` for every `j`.
pub fn d2_functional(
    g: &GreenFunction,
    cfg: &VortexConfig,
    blowup: &BlowupConfig,
    settings: &SingularQuadratureSettings,
) -> Result<D2Value, AdmissibilityError> {
    check_masses(cfg, blowup)?;
    let (basis, geometry) = cells(g, blowup)?;
    let mut warnings = Vec::new();
    let mut terms = Vec::new();
    for cell in &geometry {
        let j = cell.q_index;
        for c in Component::BOTH {
            let grad = crate::potentials::f_ij_gradient(g, cfg, blowup, c, j, blowup.q[j])?;
            let gnorm = grad[0].hypot(grad[1]);
            if gnorm >= GRADIENT_WARNING {
                warnings.push(format!("∇f at q[{j}] for component {c:?} is {gnorm:.3e}; the limit may not exist"));
            }
            let anchor = if settings.literal_first_point { blowup.q[0] } else { blowup.q[j] };
            let log_w = log_rho_ij(g, cfg, blowup, c, j)? - u0(g, cfg, c, anchor)?;
            let weight = log_w.exp();
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(AdmissibilityError::Weight { component: c, j, weight });
            }
            let exponent = CellExponent { g, cfg, blowup, c, j };
            let integral = regularized_integral(&exponent, &basis, cell, settings)?;
            terms.push(D2Term { j, component: c, weight, integral });
        }
    }
    let value = crate::numeric::pairwise_sum(&terms.iter().map(|t| t.weight * t.integral.value).collect::<Vec<_>>());
    let error = terms.iter().map(|t| t.weight * t.integral.error).sum();
    Ok(D2Value { value, error, terms, warnings })
}

/// `D²` for one blow-up point with two doubled vortices, through `D`:
/// `e^{8πγ(q,q)}·[D(q-p₁)e^{8πG(q-p₁)} + D(q-p₂)e^{8πG(q-p₂)}]`.
pub fn d2_two_vortex_closed(
    g: &GreenFunction,
    q: Complex64,
    p1: Complex64,
    p2: Complex64,
    settings: &SingularQuadratureSettings,
) -> Result<D2Value, AdmissibilityError> {
    let scale = (EIGHT_PI * g.robin_constant()).exp();
    let mut out = d2_two_vortex_bare(g, q, p1, p2, settings)?;
    out.value *= scale;
    out.error *= scale;
    Ok(out)
}

/// [`d2_two_vortex_closed`] without the positive factor `e^{8πγ(q,q)}`.
pub fn d2_two_vortex_bare(
    g: &GreenFunction,
    q: Complex64,
    p1: Complex64,
    p2: Complex64,
    settings: &SingularQuadratureSettings,
) -> Result<D2Value, AdmissibilityError> {
    let mut value = 0.0;
    let mut error = 0.0;
    let mut warnings = Vec::new();
    let mut terms = Vec::new();
    for (c, p) in [(Component::First, p1), (Component::Second, p2)] {
        let d = d_functional(g, q - p, settings)?;
        let factor = (EIGHT_PI * g.value(q - p)?).exp();
        value += d.value * factor;
        error += d.error * factor;
        warnings.extend(d.warnings);
        terms.push(D2Term { j: 0, component: c, weight: d.weight * factor, integral: d.integral });
    }
    Ok(D2Value { value, error, terms, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Negative,
    ZeroWithinTol,
    Positive,
}

impl SignClass {
    pub fn classify(value: f64, tol: f64) -> Self {
        if value > tol {
            SignClass::Positive
        } else if value < -tol {
            SignClass::Negative
        } else {
            SignClass::ZeroWithinTol
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
}

impl Verdict {
    pub fn admissible(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledD {
    pub label: String,
    pub point: Complex64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `D` at the critical points of `G`.
    pub d_values: Vec<LabelledD>,
    pub d2_value: f64,
    pub d2_error: f64,
    pub cond1: f64,
    /// `|∇_{q_j} G_i*|` for each component, maximized over `j`.
    pub cond2: [f64; 2],
    pub cond3_sign: SignClass,
    pub cond3_tolerance: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    /// Seed grid for the census behind `d_values`; `0` skips them.
    pub census_grid: usize,
    pub newton_tolerance: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { census_grid: 64, newton_tolerance: 1e-12 }
    }
}

/// `D` at every critical point of `G`.
pub fn census_d_values(
    g: &GreenFunction,
    grid_n: usize,
    newton_tol: f64,
    settings: &SingularQuadratureSettings,
) -> Result<Vec<LabelledD>, AdmissibilityError> {
    let census = find_critical_points(g, grid_n, newton_tol)?;
    let mut out = Vec::new();
    let (mut half, mut extra) = (0, 0);
    for cp in &census.points {
        let label = match cp.kind {
            PointKind::HalfPeriod => {
                half += 1;
                format!("half_period_{half}")
            }
            PointKind::ExtraPairMember => {
                extra += 1;
                format!("extra_{extra}")
            }
        };
        let d = d_functional(g, cp.point.z(), settings)?;
        out.push(LabelledD { label, point: cp.point.z(), value: d.value, error: d.error });
    }
    Ok(out)
}

/// Conditions (1)–(3) for `blowup` against the vortex background `cfg`.
pub fn necessary_conditions_report(
    g: &GreenFunction,
    cfg: &VortexConfig,
    blowup: &BlowupConfig,
    settings: &SingularQuadratureSettings,
    options: &ReportOptions,
) -> Result<AdmissibilityReport, AdmissibilityError> {
    let cond1 = condition1_residual(g, cfg, &blowup.q)?;
    let mut cond2 = [0.0f64; 2];
    for c in Component::BOTH {
        for j in 0..blowup.k() {
            let gr = g_star_gradient(g, cfg, c, j, &blowup.q)?;
            cond2[c.index()] = cond2[c.index()].max(gr[0].hypot(gr[1]));
        }
    }
    let d2 = d2_functional(g, cfg, blowup, settings)?;
    let tol = (3.0 * d2.error).max(1e-8);
    let cond3_sign = SignClass::classify(d2.value, tol);
    let d_values = if options.census_grid > 0 {
        census_d_values(g, options.census_grid, options.newton_tolerance, settings)?
    } else {
        Vec::new()
    };
    let verdict = Verdict {
        cond1: cond1 <= CONDITION_TOLERANCE,
        cond2: cond2[0] <= CONDITION_TOLERANCE && cond2[1] <= CONDITION_TOLERANCE,
        cond3: d2.value <= tol,
    };
    Ok(AdmissibilityReport {
        d_values,
        d2_value: d2.value,
        d2_error: d2.error,
        cond1,
        cond2,
        cond3_sign,
        cond3_tolerance: tol,
        verdict,
        warnings: d2.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{Cell, Patch, PartitionSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn settings() -> SingularQuadratureSettings {
        SingularQuadratureSettings::default()
    }

    #[test]
    fn square_half_periods_share_d_by_symmetry() {
        let g = GreenFunction::new(LatticeBasis::square());
        let d1 = d_functional(&g, c(0.5, 0.0), &settings()).unwrap();
        let d2 = d_functional(&g, c(0.0, 0.5), &settings()).unwrap();
        let d3 = d_functional(&g, c(0.5, 0.5), &settings()).unwrap();
        assert!((d1.value - d2.value).abs() < 1e-9 * d1.value.abs().max(1.0), "{} {}", d1.value, d2.value);
        assert!(d1.warnings.is_empty() && d3.warnings.is_empty());
        assert!(d1.error < 1e-6 * d1.value.abs().max(1.0));
    }

    #[test]
    fn five_point_torus_signs() {
        let g = GreenFunction::new(LatticeBasis::from_tau(c(0.5, 0.85)).unwrap());
        let census = find_critical_points(&g, 64, 1e-12).unwrap();
        assert_eq!(census.count, 5);
        let mut dmax: f64 = 0.0;
        for hp in census.half_periods() {
            let d = d_functional(&g, hp.point.z(), &settings()).unwrap();
            assert!(d.value > 0.0, "D({}) = {}", hp.point.z(), d.value);
            dmax = dmax.max(d.value);
        }
        for e in census.extras() {
            let d = d_functional(&g, e.point.z(), &settings()).unwrap();
            assert!(d.value.abs() < (1e-3 * dmax).max(3.0 * d.error), "D(extra) = {} (err {}), max {}", d.value, d.error, dmax);
        }
    }

    #[test]
    fn gradient_warning_away_from_critical_points() {
        let g = GreenFunction::new(LatticeBasis::square());
        match d_functional(&g, c(0.31, 0.2), &settings()) {
            Ok(d) => assert!(!d.warnings.is_empty()),
            Err(AdmissibilityError::Quadrature(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn closed_form_collapses_for_equal_vortices() {
        let g = GreenFunction::new(LatticeBasis::from_tau(c(0.1, 1.2)).unwrap());
        let p = c(0.2, 0.3);
        let q = p + g.basis().omega1() * 0.5;
        let both = d2_two_vortex_bare(&g, q, p, p, &settings()).unwrap();
        let single = d_functional(&g, q - p, &settings()).unwrap();
        let expect = 2.0 * single.value * (EIGHT_PI * g.value(q - p).unwrap()).exp();
        assert!((both.value - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn k1_evaluator_matches_closed_form() {
        let g = GreenFunction::new(LatticeBasis::from_tau(c(0.5, 0.85)).unwrap());
        let p1 = c(0.13, 0.07);
        let p2 = p1 + g.basis().omega1() * 0.5;
        let q = p1 + g.basis().omega2() * 0.5;
        let cfg = VortexConfig::new(vec![p1, p1], vec![p2, p2]);
        let closed = d2_two_vortex_closed(&g, q, p1, p2, &settings()).unwrap();
        let direct = d2_functional(&g, &cfg, &BlowupConfig::new(vec![q]), &settings()).unwrap();
        assert!((closed.value - direct.value).abs() <= closed.error + direct.error + 1e-10 * closed.value.abs());
        // an off-center single cell exercises the outer patches
        let (s, t) = g.basis().coords(q);
        let part = PartitionSpec { cells: vec![Cell { patches: vec![Patch::new(s - 0.3, s + 0.7, t - 0.6, t + 0.4)], q_index: 0 }], delta: 0.01 };
        let shifted = d2_functional(&g, &cfg, &BlowupConfig::new(vec![q]).with_partition(part), &settings()).unwrap();
        assert!(
            (closed.value - shifted.value).abs() <= 2.0 * (closed.error + shifted.error) + 1e-9 * closed.value.abs(),
            "closed {} ± {}, partition {} ± {}",
            closed.value,
            closed.error,
            shifted.value,
            shifted.error
        );
        assert!(closed.value > 0.0);
    }

    #[test]
    fn report_flags_half_period_configuration() {
        let g = GreenFunction::new(LatticeBasis::from_tau(c(0.5, 0.85)).unwrap());
        let p1 = c(0.0, 0.0);
        let p2 = g.basis().omega1() * 0.5;
        let q = g.basis().omega2() * 0.5;
        let cfg = VortexConfig::new(vec![p1, p1], vec![p2, p2]);
        let r = necessary_conditions_report(&g, &cfg, &BlowupConfig::new(vec![q]), &settings(), &ReportOptions { census_grid: 0, ..Default::default() })
            .unwrap();
        assert!(r.cond1 < 1e-12);
        assert!(r.cond2[0] < 1e-8 && r.cond2[1] < 1e-8);
        assert_eq!(r.cond3_sign, SignClass::Positive);
        assert!(!r.verdict.admissible());
    }

    #[test]
    fn detuned_point_fails_condition_two() {
        let g = GreenFunction::new(LatticeBasis::square());
        let cfg = VortexConfig::new(vec![c(0.0, 0.0); 2], vec![c(0.5, 0.0); 2]);
        let q = c(0.5, 0.5) + c(0.01, 0.003);
        let r = necessary_conditions_report(&g, &cfg, &BlowupConfig::new(vec![q]), &settings(), &ReportOptions { census_grid: 0, ..Default::default() });
        if let Ok(r) = r {
            assert!(r.cond2[0].max(r.cond2[1]) > 1e-4);
            assert!(!r.verdict.cond2);
        }
    }

    #[test]
    fn mass_precondition() {
        let g = GreenFunction::new(LatticeBasis::square());
        let cfg = VortexConfig::new(vec![c(0.0, 0.0)], vec![c(0.5, 0.0); 2]);
        assert!(matches!(
            d2_functional(&g, &cfg, &BlowupConfig::new(vec![c(0.5, 0.5)]), &settings()),
            Err(AdmissibilityError::Config(_))
        ));
    }
}
