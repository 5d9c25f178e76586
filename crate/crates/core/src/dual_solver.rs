//! The truncated, discretized dual problem.
//!
//! For a kernel matrix `ψ` we look for a nonnegative vector `F` with
//! `ψ_{ℓm} <= F_ℓ + F_m` that makes `4πM⁴·Σ F_m/m⁵` small. Starting from a
//! feasible vector, the averaging map `F ↦ (F + F^ψ)/2` with the ψ-transform
//! `F^ψ_m = max_ℓ(ψ_{ℓm} − F_ℓ)` decreases `F` while keeping it feasible.
//!
//! All arithmetic that feeds the certificate is rounded upward, so every
//! returned vector passes [`verify_feasible`] exactly in floating point.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psi::{read_grid_header, write_grid_header, Grid, Kernel, PsiMatrix};

/// Largest grid accepted by [`lp_oracle`].
pub const LP_ORACLE_MAX_LEN: usize = 40;

/// Error-free transformation `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a + b` rounded toward `+∞`.
#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// `a − b` rounded toward `+∞`.
#[inline]
fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// Exact test of `psi <= a + b`.
#[inline]
fn dominated(psi: f64, a: f64, b: f64) -> bool {
    let (s, e) = two_sum(a, b);
    psi < s || (psi == s && e >= 0.0)
}

/// A candidate `F` on the grid of a [`PsiMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundVector {
    grid: Grid,
    values: Vec<f64>,
}

impl BoundVector {
    /// Wraps `values`, which must have length `RM`, start with 0 and be
    /// nonnegative.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "bound vector has {} entries, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid(format!("F_0 must be 0, got {}", values[0])));
        }
        if let Some((m, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("F_{m} must be finite and >= 0, got {v}")));
        }
        Ok(BoundVector { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        BoundVector {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// The discretized majorant `min(2a⁶, 8a³)`, rounded up.
    pub fn polynomial_majorant(grid: Grid) -> Self {
        let values = (0..grid.len())
            .map(|m| {
                let a = grid.point(m);
                let v = (2.0 * a.powi(6)).min(8.0 * a.powi(3));
                if v > 0.0 {
                    v.next_up().next_up()
                } else {
                    0.0
                }
            })
            .collect();
        BoundVector { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every entry by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        BoundVector {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Writes the grid header followed by `RM` little-endian f64 values.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
        write_grid_header(&mut write, self.grid)?;
        let mut buf = Vec::with_capacity(8 * self.len());
        self.values.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        write(&buf)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let grid = read_grid_header(&mut input, path)?;
        let mut buf = Vec::new();
        input.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
        if buf.len() != 8 * grid.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("expected {} values, found {} bytes", grid.len(), buf.len()),
            });
        }
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        BoundVector::new(grid, values).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn check_shapes(psi: &PsiMatrix, f: &BoundVector) -> Result<()> {
    if psi.grid() != f.grid() {
        return Err(Error::invalid("bound vector and kernel matrix live on different grids"));
    }
    Ok(())
}

/// `G_m = max_{0<=ℓ<=m}(ψ_{ℓm} − (ψ_{ℓℓ})₊/2)`, a feasible starting point.
pub fn g_vector(psi: &PsiMatrix) -> BoundVector {
    let values = (0..psi.len())
        .into_par_iter()
        .map(|m| {
            let row = psi.row(m);
            let upto = row.len().min(m + 1);
            row[..upto]
                .iter()
                .enumerate()
                .fold(0.0f64, |acc, (ell, &v)| acc.max(sub_up(v, 0.5 * psi.diagonal(ell).max(0.0))))
        })
        .collect();
    BoundVector {
        grid: psi.grid(),
        values,
    }
}

/// The ψ-transform `F^ψ_m = max_ℓ(ψ_{ℓm} − F_ℓ)`, each difference rounded up.
pub fn psi_transform(psi: &PsiMatrix, f: &BoundVector) -> Result<BoundVector> {
    check_shapes(psi, f)?;
    BoundVector::new(f.grid, f.values.clone())?;
    Ok(transform_unchecked(psi, f))
}

fn transform_unchecked(psi: &PsiMatrix, f: &BoundVector) -> BoundVector {
    // ℓ = 0 contributes ψ_{0m} − F_0 = 0, which dominates every unstored zero entry
    let values = (0..psi.len())
        .into_par_iter()
        .map(|m| {
            psi.row(m)
                .iter()
                .zip(&f.values)
                .fold(f64::NEG_INFINITY, |acc, (&v, &fl)| acc.max(sub_up(v, fl)))
        })
        .collect();
    BoundVector { grid: f.grid, values }
}

/// `4π·M⁴·Σ_{m=1}^{RM−1} F_m/m⁵`.
pub fn objective(f: &BoundVector) -> f64 {
    let per_unit = f.grid.per_unit() as f64;
    let sum: f64 = f.values[1..]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let ratio = per_unit / (i + 1) as f64;
            v * ratio.powi(4) / (i + 1) as f64
        })
        .sum();
    4.0 * PI * sum
}

/// A violated constraint `ψ_{ℓm} > F_ℓ + F_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub ell: usize,
    pub m: usize,
    pub psi: f64,
    pub sum: f64,
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Self {
        Error::Infeasible {
            ell: v.ell,
            m: v.m,
            psi: v.psi,
            sum: v.sum,
        }
    }
}

/// First pair violating `ψ_{ℓm} <= F_ℓ + F_m`, checked without tolerance.
pub fn find_violation(psi: &PsiMatrix, f: &BoundVector) -> Option<Violation> {
    if psi.grid() != f.grid() {
        return Some(Violation {
            ell: 0,
            m: 0,
            psi: f64::NAN,
            sum: f64::NAN,
        });
    }
    // entries outside the stored support are zero
    if let Some(m) = f.values.iter().position(|v| !(*v >= 0.0)) {
        return Some(Violation {
            ell: m,
            m,
            psi: 0.0,
            sum: 2.0 * f.values[m],
        });
    }
    (0..psi.len()).into_par_iter().find_map_first(|m| {
        let fm = f.values[m];
        psi.row(m).iter().zip(&f.values).enumerate().find_map(|(ell, (&v, &fl))| {
            (!dominated(v, fl, fm)).then_some(Violation {
                ell,
                m,
                psi: v,
                sum: fl + fm,
            })
        })
    })
}

/// Whether `F` is a certificate for `ψ`.
pub fn verify_feasible(psi: &PsiMatrix, f: &BoundVector) -> bool {
    find_violation(psi, f).is_none()
}

/// Result of [`iterate_to_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub vector: BoundVector,
    pub iterations: usize,
    /// Relative objective change of the last step.
    pub relative_gap: f64,
    /// Objective after each step, starting with the initial vector.
    pub objectives: Vec<f64>,
}

/// Runs `F ← (F + F^ψ)/2` from a feasible `f0` until the relative objective
/// change drops below `eps` (or `max_iterations` steps were taken).
pub fn iterate_to_fixed_point(psi: &PsiMatrix, f0: BoundVector, eps: f64, max_iterations: usize) -> Result<FixedPoint> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    check_shapes(psi, &f0)?;
    let f0 = BoundVector::new(f0.grid, f0.values)?;
    if let Some(v) = find_violation(psi, &f0) {
        return Err(v.into());
    }
    let mut f = f0;
    let mut value = objective(&f);
    let mut objectives = vec![value];
    let mut iterations = 0;
    let mut relative_gap = f64::INFINITY;
    while iterations < max_iterations {
        let transform = transform_unchecked(psi, &f);
        let values: Vec<f64> = f
            .values
            .iter()
            .zip(&transform.values)
            .map(|(&a, &b)| 0.5 * add_up(a, b))
            .collect();
        f = BoundVector { grid: f.grid, values };
        iterations += 1;
        let next = objective(&f);
        objectives.push(next);
        relative_gap = if next == 0.0 { 0.0 } else { (value - next).abs() / next.abs() };
        value = next;
        if relative_gap < eps {
            break;
        }
    }
    Ok(FixedPoint {
        vector: f,
        iterations,
        relative_gap,
        objectives,
    })
}

/// How the integral beyond the cutoff `R` is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    /// `4π·g(r)/r⁴` with `g(r)` the last grid value of `G` at `r = (RM−1)/M`.
    #[default]
    Heuristic,
    /// `8πR²/(R−1)³`, valid for every admissible pair of measures.
    Rigorous,
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMode::Heuristic => "heuristic",
            TailMode::Rigorous => "rigorous",
        })
    }
}

impl std::str::FromStr for TailMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heuristic" => Ok(TailMode::Heuristic),
            "rigorous" => Ok(TailMode::Rigorous),
            other => Err(Error::invalid(format!("unknown tail mode {other:?}"))),
        }
    }
}

/// Correction added to the truncated integral.
pub fn tail_correction(g: &BoundVector, mode: TailMode) -> f64 {
    match mode {
        TailMode::Heuristic => {
            let r = g.grid.last_point();
            4.0 * PI * g.values[g.len() - 1] / r.powi(4)
        }
        TailMode::Rigorous => {
            let r = g.grid.radius();
            8.0 * PI * r * r / (r - 1.0).powi(3)
        }
    }
}

/// `(3/2)·(2·I·D²)^{1/3}`.
pub fn assemble_constant(integral: f64, self_energy: f64) -> f64 {
    1.5 * (2.0 * integral * self_energy * self_energy).cbrt()
}

/// Initial vector of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// The vector `G` of [`g_vector`].
    #[default]
    G,
    /// The universal majorant `min(2a⁶, 8a³)`.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub eps: f64,
    pub max_iterations: usize,
    pub tail: TailMode,
    pub start: StartMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps: 1e-6,
            max_iterations: 10_000,
            tail: TailMode::Heuristic,
            start: StartMode::G,
        }
    }
}

/// Everything needed to audit one bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub per_unit: usize,
    pub radius: f64,
    /// Truncated, discretized integral `I_{R,M}` at the final iterate.
    pub i_value: f64,
    pub tail_mode: TailMode,
    /// Tail of the selected mode.
    pub tail_value: f64,
    pub heuristic_tail: f64,
    pub rigorous_tail: f64,
    /// `D(μ, μ)`.
    pub d_self: f64,
    /// Constant with the selected tail.
    pub constant: f64,
    pub constant_heuristic: f64,
    pub constant_rigorous: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub relative_gap_at_stop: f64,
    /// `I_{R,M}` at `G`, before iterating.
    pub g_objective: f64,
}

/// Solves the dual problem for a precomputed `ψ` and assembles the bound.
pub fn certify(psi: &PsiMatrix, self_energy: f64, options: &SolverOptions) -> Result<(BoundReport, BoundVector)> {
    if !(self_energy > 0.0) || !self_energy.is_finite() {
        return Err(Error::invalid(format!("D(mu, mu) must be finite and > 0, got {self_energy}")));
    }
    let g = g_vector(psi);
    let start = match options.start {
        StartMode::G => g.clone(),
        StartMode::Polynomial => BoundVector::polynomial_majorant(psi.grid()),
    };
    let fixed = iterate_to_fixed_point(psi, start, options.eps, options.max_iterations).map_err(|e| e.at_stage("iterate"))?;
    let feasible = verify_feasible(psi, &fixed.vector);
    if !feasible {
        let v = find_violation(psi, &fixed.vector).expect("violation");
        return Err(Error::from(v).at_stage("verify"));
    }
    let i_value = objective(&fixed.vector);
    let heuristic_tail = tail_correction(&g, TailMode::Heuristic);
    let rigorous_tail = tail_correction(&g, TailMode::Rigorous);
    let tail_value = match options.tail {
        TailMode::Heuristic => heuristic_tail,
        TailMode::Rigorous => rigorous_tail,
    };
    let grid = psi.grid();
    let report = BoundReport {
        per_unit: grid.per_unit(),
        radius: grid.radius(),
        i_value,
        tail_mode: options.tail,
        tail_value,
        heuristic_tail,
        rigorous_tail,
        d_self: self_energy,
        constant: assemble_constant(i_value + tail_value, self_energy),
        constant_heuristic: assemble_constant(i_value + heuristic_tail, self_energy),
        constant_rigorous: assemble_constant(i_value + rigorous_tail, self_energy),
        feasible,
        iterations: fixed.iterations,
        relative_gap_at_stop: fixed.relative_gap,
        g_objective: objective(&g),
    };
    Ok((report, fixed.vector))
}

/// Samples `kernel` on `grid` and runs [`certify`].
pub fn certified_bound<K: Kernel + ?Sized>(kernel: &K, grid: Grid, options: &SolverOptions) -> Result<BoundReport> {
    let psi = PsiMatrix::from_kernel(kernel, grid);
    Ok(certify(&psi, kernel.smearing_self_energy(), options)?.0)
}

/// Exact optimum of `min Σ w_m F_m` subject to `F_ℓ + F_m >= ψ_{ℓm}`,
/// `F >= 0`, `F_0 = 0`, with the weights of [`objective`]. Small grids only.
pub fn lp_oracle(psi: &PsiMatrix) -> Result<f64> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};

    let n = psi.len();
    if n > LP_ORACLE_MAX_LEN {
        return Err(Error::invalid(format!(
            "LP oracle is limited to RM <= {LP_ORACLE_MAX_LEN}, got {n}"
        )));
    }
    let per_unit = psi.grid().per_unit() as f64;
    // objective scaled to keep the simplex well conditioned
    let weights: Vec<f64> = (1..n).map(|m| (per_unit / m as f64).powi(4) / m as f64).collect();
    let scale = weights.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = weights.iter().map(|w| problem.add_var(w / scale, (0.0, f64::INFINITY))).collect();
    for m in 1..n {
        for ell in 1..=m {
            let v = psi.get(ell, m);
            if v <= 0.0 {
                continue;
            }
            if ell == m {
                problem.add_constraint([(vars[m - 1], 2.0)], ComparisonOp::Ge, v);
            } else {
                problem.add_constraint([(vars[ell - 1], 1.0), (vars[m - 1], 1.0)], ComparisonOp::Ge, v);
            }
        }
    }
    let solution = problem
        .solve()
        .map_err(|e| Error::Numeric(format!("LP oracle failed: {e}")))?;
    Ok(4.0 * PI * scale * solution.objective())
}
