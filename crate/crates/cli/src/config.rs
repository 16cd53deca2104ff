//! JSON inputs. Every struct rejects unknown keys, and every parse error
//! names the key it happened at.

use crate::error::RunError;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use torus_bubbling::admissibility::ReportOptions;
use torus_bubbling::partition::{Cell, Patch, PartitionSpec};
use torus_bubbling::potentials::{BlowupConfig, VortexConfig};
use torus_bubbling::quadrature::SingularQuadratureSettings;
use torus_bubbling::LatticeBasis;

/// Read `path` as JSON and deserialize it, keeping the raw value for hashing.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<(T, serde_json::Value), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| match e {
        RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<(T, serde_json::Value), RunError> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("invalid JSON: {e}")))?;
    let parsed = serde_path_to_error::deserialize(raw.clone()).map_err(|e| {
        let key = e.path().to_string();
        RunError::Config(format!("at `{key}`: {}", e.inner()))
    })?;
    Ok((parsed, raw))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub omega1: [f64; 2],
    pub omega2: [f64; 2],
}

impl BasisSpec {
    pub fn to_basis(&self) -> Result<LatticeBasis, RunError> {
        LatticeBasis::new(complex(self.omega1), complex(self.omega2)).map_err(|e| RunError::from(e).at("basis"))
    }
}

pub fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// How point arrays are read: plane coordinates `[re, im]`, or coefficients
/// `[s, t]` of `s·ω₁ + t·ω₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Plane,
    Basis,
}

fn point(basis: &LatticeBasis, frame: Frame, p: [f64; 2]) -> Complex64 {
    match frame {
        Frame::Plane => complex(p),
        Frame::Basis => basis.from_coords(p[0], p[1]),
    }
}

fn check_finite(points: &[[f64; 2]], key: &str) -> Result<(), RunError> {
    for (i, p) in points.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(RunError::Config(format!("non-finite coordinate {p:?}")).at(&format!("{key}[{i}]")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub p1: Vec<[f64; 2]>,
    pub p2: Vec<[f64; 2]>,
}

impl VortexSpec {
    pub fn to_config(&self, basis: &LatticeBasis, frame: Frame) -> Result<VortexConfig, RunError> {
        check_finite(&self.p1, "vortices.p1")?;
        check_finite(&self.p2, "vortices.p2")?;
        let conv = |v: &[[f64; 2]]| v.iter().map(|p| point(basis, frame, *p)).collect();
        Ok(VortexConfig::new(conv(&self.p1), conv(&self.p2)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub s: [f64; 2],
    pub t: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub cell: Vec<PatchSpec>,
    pub q_index: usize,
}

/// Cells are unions of axis-aligned patches in basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub cells: Vec<CellSpec>,
    pub delta: f64,
}

impl PartitionConfig {
    pub fn to_spec(&self) -> PartitionSpec {
        let cells = self
            .cells
            .iter()
            .map(|c| Cell {
                patches: c.cell.iter().map(|p| Patch::new(p.s[0], p.s[1], p.t[0], p.t[1])).collect(),
                q_index: c.q_index,
            })
            .collect();
        PartitionSpec { cells, delta: self.delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSpec {
    pub q: Vec<[f64; 2]>,
    /// `[m₁ⱼ, m₂ⱼ]` per point; `8π` each when absent.
    #[serde(default)]
    pub masses: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
}

impl BlowupSpec {
    pub fn to_config(&self, basis: &LatticeBasis, frame: Frame) -> Result<BlowupConfig, RunError> {
        if self.q.is_empty() {
            return Err(RunError::Config("at least one blow-up point is required".into()).at("blowup.q"));
        }
        check_finite(&self.q, "blowup.q")?;
        let mut cfg = BlowupConfig::new(self.q.iter().map(|p| point(basis, frame, *p)).collect());
        if let Some(m) = &self.masses {
            if m.len() != self.q.len() {
                return Err(RunError::Config(format!("{} mass pairs for {} points", m.len(), self.q.len()))
                    .at("blowup.masses"));
            }
            cfg.masses = m.clone();
        }
        if let Some(p) = &self.partition {
            let spec = p.to_spec();
            spec.validate(basis, &cfg.q).map_err(|e| RunError::from(e).at("blowup.partition"))?;
            cfg = cfg.with_partition(spec);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Per-term CSV of the `D²` evaluation.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

/// Input of `d2func` and `verify`. Points are plane coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub basis: BasisSpec,
    pub vortices: VortexSpec,
    pub blowup: BlowupSpec,
    #[serde(default)]
    pub quadrature: SingularQuadratureSettings,
    #[serde(default)]
    pub report: ReportOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A path of moduli `τ`: either explicit points or `samples` evenly spaced
/// points from `start` to `end` inclusive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusPath {
    #[serde(default)]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    #[serde(default)]
    pub end: Option<[f64; 2]>,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl ModulusPath {
    pub fn taus(&self) -> Result<Vec<Complex64>, RunError> {
        match (&self.points, self.start, self.end, self.samples) {
            (Some(p), None, None, None) => Ok(p.iter().map(|z| complex(*z)).collect()),
            (None, Some(a), Some(b), Some(n)) => {
                let (a, b) = (complex(a), complex(b));
                Ok(match n {
                    0 => Vec::new(),
                    1 => vec![a],
                    _ => (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect(),
                })
            }
            _ => Err(RunError::Config("give either `points` or all of `start`, `end`, `samples`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusOptions {
    pub grid: usize,
    pub tol: f64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self { grid: 128, tol: 1e-10 }
    }
}

/// A vortex setup evaluated on every torus of a sweep. Points are basis
/// coordinates, so the same setup makes sense for every modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSetup {
    pub name: String,
    pub vortices: VortexSpec,
    pub blowup: BlowupSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub moduli: ModulusPath,
    #[serde(default)]
    pub census: CensusOptions,
    #[serde(default = "yes")]
    pub d_values: bool,
    #[serde(default)]
    pub setups: Vec<SweepSetup>,
    #[serde(default)]
    pub quadrature: SingularQuadratureSettings,
}

fn yes() -> bool {
    true
}
