//! One function per command. Each returns the record it produced plus any
//! side files; nothing here touches stdout or the output directory.

use crate::config::{complex, load_json, BasisSpec, Frame, RunConfig};
use crate::error::RunError;
use crate::record::ResultRecord;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use torus_bubbling::admissibility::{d2_functional, d_functional, necessary_conditions_report, D2Value};
use torus_bubbling::census::find_critical_points;
use torus_bubbling::green::{Backend, ConstantCache, EwaldGreen};
use torus_bubbling::liouville::{masses, shoot, solve_equal_masses, MassPair, RadialProfile, ShootSettings};
use torus_bubbling::partition::CenteredParallelogram;
use torus_bubbling::quadrature::{exterior_closed_form, exterior_monte_carlo, SingularQuadratureSettings};
use torus_bubbling::{GreenFunction, LatticeBasis};

/// State shared by every command of one invocation.
#[derive(Debug, Default)]
pub struct Context {
    pub cache: ConstantCache,
    pub seed: u64,
}

impl Context {
    pub fn green(&self, basis: LatticeBasis) -> GreenFunction {
        GreenFunction::with_cache(basis, &self.cache)
    }
}

/// A file produced alongside the record.
#[derive(Debug, Clone, PartialEq)]
pub struct SideFile {
    pub path: PathBuf,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub record: Option<ResultRecord>,
    /// Main table of table-producing commands, with its file name.
    pub table: Option<(String, String)>,
    pub side_files: Vec<SideFile>,
}

impl Output {
    fn record(record: ResultRecord) -> Self {
        Self { record: Some(record), table: None, side_files: Vec::new() }
    }
}

pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected `re,im`, got `{s}`"));
    }
    let re: f64 = parts[0].parse().map_err(|e| format!("bad real part `{}`: {e}", parts[0]))?;
    let im: f64 = parts[1].parse().map_err(|e| format!("bad imaginary part `{}`: {e}", parts[1]))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(format!("non-finite point `{s}`"));
    }
    Ok([re, im])
}

fn load_basis(path: &Path) -> Result<(LatticeBasis, Value), RunError> {
    let (spec, raw): (BasisSpec, Value) = load_json(path)?;
    let basis = LatticeBasis::new(complex(spec.omega1), complex(spec.omega2)).map_err(RunError::from)?;
    Ok((basis, raw))
}

fn basis_json(basis: &LatticeBasis) -> Value {
    let (a, b) = (basis.omega1(), basis.omega2());
    json!({ "omega1": [a.re, a.im], "omega2": [b.re, b.im] })
}

pub fn green_eval(ctx: &Context, basis_path: &Path, point: [f64; 2], backend: Backend) -> Result<Output, RunError> {
    let (basis, raw) = load_basis(basis_path)?;
    let z = complex(point);
    let outputs = match backend {
        Backend::Theta => {
            let e = ctx.green(basis).evaluate(z)?;
            json!({ "backend": backend, "value": e.value, "gradient": e.gradient, "hessian": e.hessian })
        }
        Backend::Ewald => {
            let v = EwaldGreen::new(basis).value(z)?;
            json!({ "backend": backend, "value": v, "gradient": null, "hessian": null })
        }
    };
    let input = json!({ "basis": raw, "point": point, "backend": backend });
    Ok(Output::record(ResultRecord::new("green eval", &input, outputs)))
}

pub fn census(ctx: &Context, basis_path: &Path, grid: usize, tol: f64) -> Result<Output, RunError> {
    let (basis, raw) = load_basis(basis_path)?;
    let census = find_critical_points(&ctx.green(basis), grid, tol)?;
    let mut outputs = serde_json::to_value(&census)?;
    outputs["basis"] = basis_json(&basis);
    let input = json!({ "basis": raw, "grid": grid, "tol": tol });
    Ok(Output::record(ResultRecord::new("census", &input, outputs)))
}

fn reduced_cell(basis: &LatticeBasis, q: Complex64) -> CenteredParallelogram {
    let (a, b) = basis.reduced_generators();
    CenteredParallelogram { center: q, a: a * 0.5, b: b * 0.5, half_width: 0.5 }
}

/// `D(q)`, optionally with a Monte-Carlo check of the exterior term and the
/// per-radius samples as CSV.
pub fn dfunc(
    ctx: &Context,
    basis_path: &Path,
    point: [f64; 2],
    mc_samples: usize,
    rings_csv: Option<&Path>,
) -> Result<Output, RunError> {
    let (basis, raw) = load_basis(basis_path)?;
    let settings = SingularQuadratureSettings::default();
    let g = ctx.green(basis);
    let d = d_functional(&g, complex(point), &settings)?;
    let mut outputs = serde_json::to_value(&d)?;
    if mc_samples > 0 {
        let cell = reduced_cell(&basis, d.q);
        let radius = 6.0 * basis.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let (mc, se) = exterior_monte_carlo(&cell, radius, mc_samples, &mut rng);
        outputs["exterior_check"] = json!({
            "closed_form": exterior_closed_form(&cell),
            "monte_carlo": mc,
            "standard_error": se,
            "samples": mc_samples,
            "seed": ctx.seed,
        });
    }
    let mut out = Output::record(ResultRecord::new(
        "dfunc",
        &json!({ "basis": raw, "point": point, "mc_samples": mc_samples, "seed": ctx.seed }),
        outputs,
    ));
    if let Some(path) = rings_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["delta", "regularized_integral"])?;
        for (f, t) in settings.delta_factors.iter().zip(&d.integral.samples) {
            w.write_record([num(d.integral.delta0 * f), num(*t)])?;
        }
        out.side_files.push(SideFile { path: path.to_path_buf(), contents: csv_string(w)? });
    }
    Ok(out)
}

/// Shortest round-trip text of `x`, in exponent form outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, RunError> {
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RunError::Internal(e.to_string()))
}

fn load_run_config(path: &Path) -> Result<(RunConfig, Value), RunError> {
    let (cfg, raw): (RunConfig, Value) = load_json(path)?;
    cfg.quadrature.validate().map_err(|e| RunError::from(e).at("quadrature"))?;
    Ok((cfg, raw))
}

fn d2_terms_csv(d2: &D2Value) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["j", "component", "weight", "integral", "integral_error", "delta0"])?;
    for t in &d2.terms {
        let component = match t.component.index() {
            0 => "1",
            _ => "2",
        };
        w.write_record([
            t.j.to_string(),
            component.to_string(),
            num(t.weight),
            num(t.integral.value),
            num(t.integral.error),
            num(t.integral.delta0),
        ])?;
    }
    csv_string(w)
}

pub fn d2func(ctx: &Context, config_path: &Path) -> Result<Output, RunError> {
    let (cfg, raw) = load_run_config(config_path)?;
    let basis = cfg.basis.to_basis()?;
    let vortices = cfg.vortices.to_config(&basis, Frame::Plane)?;
    let blowup = cfg.blowup.to_config(&basis, Frame::Plane)?;
    let d2 = d2_functional(&ctx.green(basis), &vortices, &blowup, &cfg.quadrature)?;
    let mut out = Output::record(ResultRecord::new("d2func", &raw, serde_json::to_value(&d2)?));
    if let Some(path) = &cfg.output.csv {
        out.side_files.push(SideFile { path: path.clone(), contents: d2_terms_csv(&d2)? });
    }
    Ok(out)
}

pub fn verify(ctx: &Context, config_path: &Path) -> Result<Output, RunError> {
    let (cfg, raw) = load_run_config(config_path)?;
    let basis = cfg.basis.to_basis()?;
    let vortices = cfg.vortices.to_config(&basis, Frame::Plane)?;
    let blowup = cfg.blowup.to_config(&basis, Frame::Plane)?;
    let report = necessary_conditions_report(&ctx.green(basis), &vortices, &blowup, &cfg.quadrature, &cfg.report)?;
    let outputs = json!({
        "verdict": if report.verdict.admissible() { "pass" } else { "fail" },
        "conditions": report.verdict,
        "cond1_residual": report.cond1,
        "cond2_residual": report.cond2,
        "d2": { "value": report.d2_value, "error": report.d2_error },
        "cond3_sign": report.cond3_sign,
        "cond3_tolerance": report.cond3_tolerance,
        "d_values": report.d_values,
        "warnings": report.warnings,
    });
    Ok(Output::record(ResultRecord::new("verify", &raw, outputs)))
}

fn mass_json(m: &MassPair) -> Value {
    json!({
        "M1": m.m1,
        "M2": m.m2,
        "I1": m.i1,
        "I2": m.i2,
        "M1_error": (m.m1 - m.m1_integral).abs(),
        "M2_error": (m.m2 - m.m2_integral).abs(),
        "identity_residual": m.identity_residual(),
    })
}

fn profile_csv(p: &RadialProfile) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "V1", "V2", "dV1", "dV2"])?;
    for i in 0..p.r_grid.len() {
        w.write_record([
            num(p.r_grid[i]),
            num(p.v1[i]),
            num(p.v2[i]),
            num(p.dv1[i]),
            num(p.dv2[i]),
        ])?;
    }
    csv_string(w)
}

pub fn liouville_shoot(c: [f64; 2], a: [f64; 2], r_max: f64, profile: Option<&Path>) -> Result<Output, RunError> {
    let settings = ShootSettings { r_max, ..ShootSettings::default() };
    let p = shoot(c[0], c[1], a[0], a[1], &settings)?;
    let m = masses(&p)?;
    let input = json!({ "c1": c[0], "c2": c[1], "a1": a[0], "a2": a[1], "r_max": r_max });
    let mut out = Output::record(ResultRecord::new("liouville shoot", &input, mass_json(&m)));
    if let Some(path) = profile {
        out.side_files.push(SideFile { path: path.to_path_buf(), contents: profile_csv(&p)? });
    }
    Ok(out)
}

pub fn liouville_equal_mass(c: [f64; 2], a1: f64, r_max: f64, profile: Option<&Path>) -> Result<Output, RunError> {
    let settings = ShootSettings { r_max, ..ShootSettings::default() };
    let sol = solve_equal_masses(c[0], c[1], a1, &settings)?;
    let mut outputs = mass_json(&sol.masses);
    outputs["a2"] = json!(sol.a2);
    outputs["brackets"] = json!(sol.brackets);
    let input = json!({ "c1": c[0], "c2": c[1], "a1": a1, "r_max": r_max });
    let mut out = Output::record(ResultRecord::new("liouville equal-mass", &input, outputs));
    if let Some(path) = profile {
        out.side_files.push(SideFile { path: path.to_path_buf(), contents: profile_csv(&sol.profile)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parser() {
        assert_eq!(parse_point("0.5, -1e-3").unwrap(), [0.5, -1e-3]);
        assert!(parse_point("0.5").is_err());
        assert!(parse_point("a,1").is_err());
        assert!(parse_point("nan,1").is_err());
    }

    #[test]
    fn number_text_round_trips() {
        for x in [0.0, 1.0, -52.981325724847345, 2.387791712429327e-10, 1e20, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.5e-10), "2.5e-10");
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn shoot_reports_symmetric_masses() {
        let out = liouville_shoot([1.0, 1.0], [0.0, 0.0], 1e4, None).unwrap();
        let o = out.record.unwrap().outputs;
        let m1 = o["M1"].as_f64().unwrap();
        assert!((m1 - 8.0 * std::f64::consts::PI).abs() < 1e-6);
        assert!(o["identity_residual"].as_f64().unwrap().abs() < 1e-9);
        assert!(o["M1_error"].as_f64().unwrap() < 1e-6);
    }

    #[test]
    fn infinite_mass_shot_is_a_numerical_error() {
        let err = liouville_shoot([1.0, 1.0], [0.0, -1.0], 1e4, None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
