//! Sweeps over a path of moduli. Rows run in parallel on the current rayon
//! pool and are written in path order by a single collector, so the table
//! does not depend on the thread count.

use crate::commands::{csv_string, num, Context, Output};
use crate::config::{load_json, CensusOptions, Frame, ModulusPath, SweepSpec};
use crate::error::RunError;
use crate::record::ResultRecord;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::path::Path;
use torus_bubbling::admissibility::{d2_functional, d_functional};
use torus_bubbling::census::{find_critical_points, CensusError, CriticalCensus};
use torus_bubbling::quadrature::SingularQuadratureSettings;
use torus_bubbling::{GreenFunction, LatticeBasis};

type Estimate = Option<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Default)]
struct Row {
    count: Option<usize>,
    extra: Option<Complex64>,
    d_half: [Estimate; 3],
    d_extra: Estimate,
    d2: Vec<Estimate>,
    error: Option<String>,
}

fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn torus(tau: Complex64, ctx: &Context) -> Result<(LatticeBasis, GreenFunction), String> {
    let basis = LatticeBasis::from_tau(tau).map_err(|e| format!("basis: {e}"))?;
    Ok((basis, ctx.green(basis)))
}

fn run_census(g: &GreenFunction, opts: &CensusOptions) -> Result<CriticalCensus, String> {
    find_critical_points(g, opts.grid, opts.tol).map_err(|e| format!("census: {e}"))
}

fn check_census_options(opts: &CensusOptions) -> Result<(), RunError> {
    let err = if opts.grid < 32 {
        CensusError::GridTooSmall(opts.grid)
    } else if !(opts.tol > 0.0 && opts.tol <= 1e-8) {
        CensusError::ToleranceTooLoose(opts.tol)
    } else {
        return Ok(());
    };
    Err(RunError::from(err).at("census"))
}

fn census_row(ctx: &Context, tau: Complex64, opts: &CensusOptions) -> Row {
    let mut row = Row::default();
    let result = torus(tau, ctx).and_then(|(_, g)| run_census(&g, opts));
    match result {
        Ok(c) => {
            row.count = Some(c.count);
            row.extra = c.extra_representative().map(|p| p.z());
        }
        Err(e) => row.error = Some(e),
    }
    row
}

fn full_row(ctx: &Context, tau: Complex64, spec: &SweepSpec) -> Row {
    let mut row = Row { d2: vec![None; spec.setups.len()], ..Row::default() };
    if let Err(e) = fill_row(ctx, tau, spec, &mut row) {
        row.error = Some(e);
    }
    row
}

fn fill_row(ctx: &Context, tau: Complex64, spec: &SweepSpec, row: &mut Row) -> Result<(), String> {
    let (basis, g) = torus(tau, ctx)?;
    let census = run_census(&g, &spec.census)?;
    row.count = Some(census.count);
    row.extra = census.extra_representative().map(|p| p.z());
    let settings: &SingularQuadratureSettings = &spec.quadrature;
    if spec.d_values {
        for (k, hp) in basis.half_periods().iter().enumerate() {
            let d = d_functional(&g, hp.z(), settings).map_err(|e| format!("D(half_period_{}): {e}", k + 1))?;
            row.d_half[k] = Some((d.value, d.error));
        }
        if let Some(x) = row.extra {
            let d = d_functional(&g, x, settings).map_err(|e| format!("D(extra): {e}"))?;
            row.d_extra = Some((d.value, d.error));
        }
    }
    for (i, setup) in spec.setups.iter().enumerate() {
        let tag = |e: String| format!("d2 {}: {e}", setup.name);
        let vortices = setup.vortices.to_config(&basis, Frame::Basis).map_err(|e| tag(e.to_string()))?;
        let blowup = setup.blowup.to_config(&basis, Frame::Basis).map_err(|e| tag(e.to_string()))?;
        let d2 = d2_functional(&g, &vortices, &blowup, settings).map_err(|e| tag(e.to_string()))?;
        row.d2[i] = Some((d2.value, d2.error));
    }
    Ok(())
}

fn collect_rows<F: Fn(Complex64) -> Row + Sync>(taus: &[Complex64], f: F) -> Vec<Row> {
    taus.par_iter().map(|t| f(*t)).collect()
}

fn write_table(header: &[String], taus: &[Complex64], rows: &[Row], full: bool) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for (tau, row) in taus.iter().zip(rows) {
        let mut rec = vec![
            num(tau.re),
            num(tau.im),
            row.count.map(|c| c.to_string()).unwrap_or_default(),
            cell(row.extra.map(|z| z.re)),
            cell(row.extra.map(|z| z.im)),
        ];
        if full {
            for est in row.d_half.iter().chain(std::iter::once(&row.d_extra)).chain(row.d2.iter()) {
                rec.push(cell(est.map(|e| e.0)));
                rec.push(cell(est.map(|e| e.1)));
            }
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    csv_string(w)
}

fn base_header() -> Vec<String> {
    ["tau_re", "tau_im", "count", "extra_re", "extra_im"].iter().map(|s| s.to_string()).collect()
}

fn table_output(command: &str, input: &Value, name: &str, csv: String, rows: &[Row]) -> Output {
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let outputs = json!({ "rows": rows.len(), "failed_rows": failed, "table": name });
    Output {
        record: Some(ResultRecord::new(command, input, outputs)),
        table: Some((name.to_string(), csv)),
        side_files: Vec::new(),
    }
}

/// `census sweep`: count and extra critical point along a modulus path.
pub fn census_sweep(ctx: &Context, path: &Path, opts: &CensusOptions) -> Result<Output, RunError> {
    let (moduli, raw): (ModulusPath, Value) = load_json(path)?;
    let taus = moduli.taus()?;
    check_census_options(opts)?;
    let rows = collect_rows(&taus, |t| census_row(ctx, t, opts));
    let mut header = base_header();
    header.push("error".into());
    let csv = write_table(&header, &taus, &rows, false)?;
    let input = json!({ "moduli": raw, "grid": opts.grid, "tol": opts.tol });
    Ok(table_output("census sweep", &input, "census_sweep.csv", csv, &rows))
}

/// `sweep`: census, `D` at the half-periods and extra point, and `D²` for
/// every configured setup, one row per modulus.
pub fn sweep(ctx: &Context, spec_path: &Path) -> Result<Output, RunError> {
    let (spec, raw): (SweepSpec, Value) = load_json(spec_path)?;
    let taus = spec.moduli.taus().map_err(|e| e.at("moduli"))?;
    check_census_options(&spec.census)?;
    spec.quadrature.validate().map_err(|e| RunError::from(e).at("quadrature"))?;
    let mut names = BTreeSet::new();
    for (i, s) in spec.setups.iter().enumerate() {
        let ok = !s.name.is_empty() && s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok || !names.insert(s.name.clone()) {
            return Err(RunError::Config(format!("setup name `{}` must be unique and match [A-Za-z0-9_-]+", s.name))
                .at(&format!("setups[{i}].name")));
        }
    }
    let rows = collect_rows(&taus, |t| full_row(ctx, t, &spec));
    let mut header = base_header();
    for k in 1..=3 {
        header.push(format!("d_half_{k}"));
        header.push(format!("d_half_{k}_error"));
    }
    header.push("d_extra".into());
    header.push("d_extra_error".into());
    for s in &spec.setups {
        header.push(format!("d2_{}", s.name));
        header.push(format!("d2_{}_error", s.name));
    }
    header.push("error".into());
    let csv = write_table(&header, &taus, &rows, true)?;
    Ok(table_output("sweep", &raw, "sweep.csv", csv, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_path_gives_header_only() {
        let f = spec_file(r#"{"moduli": {"points": []}}"#);
        let out = sweep(&Context::default(), f.path()).unwrap();
        let (_, csv) = out.table.unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("tau_re,tau_im,count,extra_re,extra_im,d_half_1,"));
        assert!(csv.trim_end().ends_with(",error"));
    }

    #[test]
    fn bad_modulus_fails_its_row_only() {
        let f = spec_file(r#"{"moduli": {"points": [[0.0, -1.0], [0.0, 1.0]]}, "d_values": false}"#);
        let out = sweep(&Context::default(), f.path()).unwrap();
        let (_, csv) = out.table.unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains("basis:"), "{}", lines[1]);
        assert!(lines[2].starts_with("0,1,3,"), "{}", lines[2]);
        assert_eq!(out.record.unwrap().outputs["failed_rows"], 1);
    }

    #[test]
    fn duplicate_setup_names_are_rejected() {
        let setup = r#"{"name": "a", "vortices": {"p1": [], "p2": []}, "blowup": {"q": [[0.5, 0.5]]}}"#;
        let f = spec_file(&format!(r#"{{"moduli": {{"points": []}}, "setups": [{setup}, {setup}]}}"#));
        let err = sweep(&Context::default(), f.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("setups[1].name"));
    }

    #[test]
    fn census_sweep_on_rectangles() {
        let f = spec_file(r#"{"start": [0.0, 0.5], "end": [0.0, 2.0], "samples": 3}"#);
        let out = census_sweep(&Context::default(), f.path(), &CensusOptions { grid: 64, tol: 1e-10 }).unwrap();
        let (_, csv) = out.table.unwrap();
        let counts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(counts, ["3", "3", "3"]);
    }
}
