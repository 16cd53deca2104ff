//! Vortex background potentials, interaction energies and the local data
//! attached to a candidate set of blow-up points.
//!
//! Component indices are `First`/`Second`; vortex multiplicity is expressed by
//! repeating a point in the vortex list.

use crate::green::{GreenError, GreenFunction};
use crate::partition::PartitionSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const EIGHT_PI: f64 = 8.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    First,
    Second,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::First, Component::Second];

    pub fn other(self) -> Self {
        match self {
            Component::First => Component::Second,
            Component::Second => Component::First,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Component::First => 0,
            Component::Second => 1,
        }
    }
}

/// Vortex locations of the two components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexConfig {
    pub p1: Vec<Complex64>,
    pub p2: Vec<Complex64>,
}

impl VortexConfig {
    pub fn new(p1: Vec<Complex64>, p2: Vec<Complex64>) -> Self {
        Self { p1, p2 }
    }

    pub fn vortices(&self, c: Component) -> &[Complex64] {
        match c {
            Component::First => &self.p1,
            Component::Second => &self.p2,
        }
    }

    pub fn count(&self, c: Component) -> usize {
        self.vortices(c).len()
    }

    /// Translate every vortex by `shift`.
    pub fn translated(&self, shift: Complex64) -> Self {
        Self {
            p1: self.p1.iter().map(|p| p + shift).collect(),
            p2: self.p2.iter().map(|p| p + shift).collect(),
        }
    }
}

/// Candidate blow-up points with their masses `m[j] = [m_{1,j}, m_{2,j}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    pub q: Vec<Complex64>,
    pub masses: Vec<[f64; 2]>,
    pub partition: Option<PartitionSpec>,
}

impl BlowupConfig {
    /// All masses `8π`, no partition.
    pub fn new(q: Vec<Complex64>) -> Self {
        let masses = vec![[EIGHT_PI; 2]; q.len()];
        Self { q, masses, partition: None }
    }

    pub fn with_partition(mut self, partition: PartitionSpec) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn mass(&self, c: Component, j: usize) -> f64 {
        self.masses[j][c.index()]
    }

    pub fn translated(&self, shift: Complex64) -> Self {
        Self { q: self.q.iter().map(|q| q + shift).collect(), masses: self.masses.clone(), partition: self.partition.clone() }
    }
}

fn add(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

/// `u_{0,c}(x) = -4π Σ_l G(x - p_{c,l})`
pub fn u0(g: &GreenFunction, cfg: &VortexConfig, c: Component, x: Complex64) -> Result<f64, GreenError> {
    let mut acc = 0.0;
    for p in cfg.vortices(c) {
        acc += g.value(x - p)?;
    }
    Ok(-4.0 * PI * acc)
}

pub fn u0_gradient(g: &GreenFunction, cfg: &VortexConfig, c: Component, x: Complex64) -> Result<[f64; 2], GreenError> {
    let mut acc = [0.0; 2];
    for p in cfg.vortices(c) {
        acc = add(acc, g.gradient(x - p)?, -4.0 * PI);
    }
    Ok(acc)
}

pub fn u0_hessian(g: &GreenFunction, cfg: &VortexConfig, c: Component, x: Complex64) -> Result<[[f64; 2]; 2], GreenError> {
    let mut acc = [[0.0; 2]; 2];
    for p in cfg.vortices(c) {
        let h = g.hessian(x - p)?;
        for a in 0..2 {
            for b in 0..2 {
                acc[a][b] -= 4.0 * PI * h[a][b];
            }
        }
    }
    Ok(acc)
}

/// `G_c*(q) = Σ_j u_{0,c}(q_j) + 8π Σ_{i<j} G(q_i - q_j)`
pub fn g_star(g: &GreenFunction, cfg: &VortexConfig, c: Component, q: &[Complex64]) -> Result<f64, GreenError> {
    let mut acc = 0.0;
    for (i, qi) in q.iter().enumerate() {
        acc += u0(g, cfg, c, *qi)?;
        for qj in &q[i + 1..] {
            acc += EIGHT_PI * g.value(qi - qj)?;
        }
    }
    Ok(acc)
}

/// Gradient of `G_c*` with respect to `q_j`.
pub fn g_star_gradient(
    g: &GreenFunction,
    cfg: &VortexConfig,
    c: Component,
    j: usize,
    q: &[Complex64],
) -> Result<[f64; 2], GreenError> {
    let mut acc = u0_gradient(g, cfg, c, q[j])?;
    for (l, ql) in q.iter().enumerate() {
        if l != j {
            acc = add(acc, g.gradient(q[j] - ql)?, EIGHT_PI);
        }
    }
    Ok(acc)
}

/// The non-self part of `f_{c,j}`: everything except `m_{c,j}(γ(x,q_j) - γ(q_j,q_j))`.
/// Vanishes at `x = q_j`.
pub fn f_rest(
    g: &GreenFunction,
    cfg: &VortexConfig,
    blowup: &BlowupConfig,
    c: Component,
    j: usize,
    x: Complex64,
) -> Result<f64, GreenError> {
    let qj = blowup.q[j];
    let mut acc = u0(g, cfg, c, x)? - u0(g, cfg, c, qj)?;
    for (l, ql) in blowup.q.iter().enumerate() {
        if l != j {
            acc += blowup.mass(c, l) * (g.value(x - ql)? - g.value(qj - ql)?);
        }
    }
    Ok(acc)
}

/// `f_{c,j}(x) = m_{c,j}(γ(x,q_j) - γ(q_j,q_j)) + Σ_{l≠j} m_{c,l}(G(x-q_l) - G(q_j-q_l)) + u_{0,c}(x) - u_{0,c}(q_j)`
pub fn f_ij(
    g: &GreenFunction,
    cfg: &VortexConfig,
    blowup: &BlowupConfig,
    c: Component,
    j: usize,
    x: Complex64,
) -> Result<f64, GreenError> {
    let qj = blowup.q[j];
    let selfpart = blowup.mass(c, j) * (g.regular_part(x, qj) - g.robin_constant());
    Ok(selfpart + f_rest(g, cfg, blowup, c, j, x)?)
}

/// `∇f_{c,j}(x)`; at `x = q_j` the self term drops out since `γ(·, q_j)` is even about `q_j`.
pub fn f_ij_gradient(
    g: &GreenFunction,
    cfg: &VortexConfig,
    blowup: &BlowupConfig,
    c: Component,
    j: usize,
    x: Complex64,
) -> Result<[f64; 2], GreenError> {
    let qj = blowup.q[j];
    let mut acc = u0_gradient(g, cfg, c, x)?;
    let d = g.basis().centered(x - qj);
    if d.norm() > 0.0 {
        let gr = g.gradient(d)?;
        let r2 = d.norm_sqr();
        let selfgrad = [gr[0] + d.re / (2.0 * PI * r2), gr[1] + d.im / (2.0 * PI * r2)];
        acc = add(acc, selfgrad, blowup.mass(c, j));
    }
    for (l, ql) in blowup.q.iter().enumerate() {
        if l != j {
            acc = add(acc, g.gradient(x - ql)?, blowup.mass(c, l));
        }
    }
    Ok(acc)
}

/// `ρ_{c,j} = exp(8π(γ(q_j,q_j) + Σ_{l≠j} G(q_j - q_l)) + u_{0,c}(q_j))`
pub fn rho_ij(g: &GreenFunction, cfg: &VortexConfig, blowup: &BlowupConfig, c: Component, j: usize) -> Result<f64, GreenError> {
    Ok(log_rho_ij(g, cfg, blowup, c, j)?.exp())
}

pub fn log_rho_ij(g: &GreenFunction, cfg: &VortexConfig, blowup: &BlowupConfig, c: Component, j: usize) -> Result<f64, GreenError> {
    let qj = blowup.q[j];
    let mut s = g.robin_constant();
    for (l, ql) in blowup.q.iter().enumerate() {
        if l != j {
            s += g.value(qj - ql)?;
        }
    }
    Ok(EIGHT_PI * s + u0(g, cfg, c, qj)?)
}

/// Left side of the Pohozaev identity at each `q_j`, as `[h = x, h = y]`.
pub fn pohozaev_residual(g: &GreenFunction, cfg: &VortexConfig, blowup: &BlowupConfig) -> Result<Vec<[f64; 2]>, GreenError> {
    let q = &blowup.q;
    let mut out = Vec::with_capacity(q.len());
    for j in 0..q.len() {
        let mut inner = [u0_gradient(g, cfg, Component::Second, q[j])?, u0_gradient(g, cfg, Component::First, q[j])?];
        for (l, ql) in q.iter().enumerate() {
            if l != j {
                let gr = g.gradient(q[j] - ql)?;
                inner[0] = add(inner[0], gr, blowup.mass(Component::Second, l));
                inner[1] = add(inner[1], gr, blowup.mass(Component::First, l));
            }
        }
        let m1 = blowup.mass(Component::First, j);
        let m2 = blowup.mass(Component::Second, j);
        out.push([m1 * inner[0][0] + m2 * inner[1][0], m1 * inner[0][1] + m2 * inner[1][1]]);
    }
    Ok(out)
}

/// `max_{i,j} |(u_{0,1} - u_{0,2})(q_i) - (u_{0,1} - u_{0,2})(q_j)|`
pub fn condition1_residual(g: &GreenFunction, cfg: &VortexConfig, q: &[Complex64]) -> Result<f64, GreenError> {
    let mut diffs = Vec::with_capacity(q.len());
    for x in q {
        diffs.push(u0(g, cfg, Component::First, *x)? - u0(g, cfg, Component::Second, *x)?);
    }
    let mut worst: f64 = 0.0;
    for (i, a) in diffs.iter().enumerate() {
        for b in &diffs[i + 1..] {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Bubble heights `β_j` from
/// `-β_j = 8πγ(q_j,q_j) + 8π Σ_{l≠j} G(q_j,q_l) - I_j - 4 ln ε + mean_u`,
/// where `tail_constants[j]` is the radial tail constant `I` of the chosen
/// component at `q_j`.
pub fn predict_height(
    g: &GreenFunction,
    q: &[Complex64],
    tail_constants: &[f64],
    mean_u: f64,
    epsilon: f64,
) -> Result<Vec<f64>, GreenError> {
    assert_eq!(q.len(), tail_constants.len(), "one tail constant per blow-up point");
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut out = Vec::with_capacity(q.len());
    for (j, qj) in q.iter().enumerate() {
        let mut s = g.robin_constant();
        for (l, ql) in q.iter().enumerate() {
            if l != j {
                s += g.value(qj - ql)?;
            }
        }
        let minus_beta = EIGHT_PI * s - tail_constants[j] - 4.0 * epsilon.ln() + mean_u;
        out.push(-minus_beta);
    }
    Ok(out)
}
