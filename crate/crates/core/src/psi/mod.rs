//! Interaction-deficit kernels `Φ_μν` and `Ψ_μν = Φ_μν + Φ_νμ − Φ_νν`.
//!
//! `Ψ_μν(a, b)` measures how much the Coulomb interaction of two unit point
//! charges at distance one drops when the charges are smeared by `μ` and `ν`
//! at scales `1/a` and `1/b`, multiplied by `a³b³`. Closed forms exist for the
//! unit sphere and the uniform ball; sphere combinations are expanded over
//! pairs of shells.

mod matrix;
mod oracle;
mod tensor;

pub use matrix::{Grid, PsiMatrix};
pub(crate) use matrix::{read_grid_header, write_grid_header};
pub use oracle::{phi_quadrature_oracle, psi_quadrature_oracle, OracleMeasure};
pub use tensor::{build_psi_matrix, SphereTensor};

use std::fmt;

use crate::error::{Error, Result};
use crate::measures::RadialMeasure;
use crate::quadrature;

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `Ψ_σσ(a,b) = (a²b²/4)·((a+b−ab)₊² − (|a−b|−ab)₊²)` for the unit sphere.
#[inline]
pub fn psi_sphere_sphere(a: f64, b: f64) -> f64 {
    let ab = a * b;
    let outer = pos(a + b - ab);
    let inner = pos((a - b).abs() - ab);
    0.25 * ab * ab * (outer * outer - inner * inner)
}

/// `Ψ_BB` for the uniform measure of the unit ball.
pub fn psi_ball_ball(a: f64, b: f64) -> f64 {
    let ab = a * b;
    let (a2, b2) = (a * a, b * b);
    let diff = (a - b).abs();
    let outer = pos(a + b - ab).powi(4);
    let inner = pos(diff - ab).powi(4);
    let mut value = outer / 160.0 * (ab * ab - 5.0 * a2 - 5.0 * b2 + 4.0 * a * b2 + 4.0 * b * a2 + 20.0 * ab);
    if inner > 0.0 {
        value -= inner / 160.0 * (ab * ab - 5.0 * a2 - 5.0 * b2 + 4.0 * diff * ab - 20.0 * ab);
    }
    value
}

/// `Φ_σB(a, b)`: unit sphere smeared at scale `1/a` against the uniform ball
/// at scale `1/b`.
///
/// Decomposing the ball into shells gives
/// `(3a²b²/4)·∫₀¹ s·((as+b−ab)₊² − (|as−b|−ab)₊²) ds`, a piecewise cubic in
/// `s`; three Gauss nodes per piece integrate it exactly.
pub fn phi_sphere_ball(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let ab = a * b;
    let breaks = [b * (a - 1.0) / a, b / a, b * (1.0 + a) / a, b * (1.0 - a) / a];
    let integral = quadrature::integrate_pieces(3, 0.0, 1.0, &breaks, |s| {
        let outer = pos(a * s + b - ab);
        let inner = pos((a * s - b).abs() - ab);
        s * (outer * outer - inner * inner)
    });
    0.75 * ab * ab * integral
}

/// `a·V(a·e₁)` for the uniform unit ball.
#[inline]
fn ball_scaled_potential(a: f64) -> f64 {
    if a >= 1.0 {
        1.0
    } else {
        0.5 * a * (3.0 - a * a)
    }
}

/// A kernel `Ψ_μν` evaluated pointwise, together with the self-energy
/// `D(μ,μ)` of its smearing measure.
pub trait Kernel: Sync {
    fn psi(&self, a: f64, b: f64) -> f64;

    fn smearing_self_energy(&self) -> f64;

    fn describe(&self) -> String;
}

/// Measures whose kernel is available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExactMeasure {
    Sphere,
    Ball,
    Delta,
}

impl ExactMeasure {
    fn scaled_potential(self, a: f64) -> f64 {
        match self {
            ExactMeasure::Sphere => a.min(1.0),
            ExactMeasure::Ball => ball_scaled_potential(a),
            ExactMeasure::Delta => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExactMeasure::Sphere => "sphere",
            ExactMeasure::Ball => "ball",
            ExactMeasure::Delta => "delta",
        }
    }
}

impl fmt::Display for ExactMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed-form kernel for `μ ∈ {σ, B}` and `ν ∈ {σ, B, δ₀}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactKernel {
    mu: ExactMeasure,
    nu: ExactMeasure,
}

impl ExactKernel {
    pub fn new(mu: ExactMeasure, nu: ExactMeasure) -> Result<Self> {
        if mu == ExactMeasure::Delta {
            return Err(Error::invalid("the smearing measure mu cannot be a point mass"));
        }
        Ok(ExactKernel { mu, nu })
    }

    pub fn mu(&self) -> ExactMeasure {
        self.mu
    }

    pub fn nu(&self) -> ExactMeasure {
        self.nu
    }
}

impl Kernel for ExactKernel {
    fn psi(&self, a: f64, b: f64) -> f64 {
        use ExactMeasure::*;
        match (self.mu, self.nu) {
            (Sphere, Sphere) => psi_sphere_sphere(a, b),
            (Ball, Ball) => psi_ball_ball(a, b),
            (mu, Delta) => {
                let cube = (a * b).powi(3);
                cube * (2.0 - mu.scaled_potential(a) - mu.scaled_potential(b))
            }
            (Sphere, Ball) => phi_sphere_ball(a, b) + phi_sphere_ball(b, a) - psi_ball_ball(a, b),
            (Ball, Sphere) => phi_sphere_ball(a, b) + phi_sphere_ball(b, a) - psi_sphere_sphere(a, b),
            (Delta, _) => unreachable!("rejected by ExactKernel::new"),
        }
    }

    fn smearing_self_energy(&self) -> f64 {
        match self.mu {
            ExactMeasure::Sphere => 0.5,
            ExactMeasure::Ball => 0.6,
            ExactMeasure::Delta => f64::INFINITY,
        }
    }

    fn describe(&self) -> String {
        format!("exact kernel mu={} nu={}", self.mu, self.nu)
    }
}

/// One pair of shells in the expansion: radii and `c_pq / (r s)`.
#[derive(Debug, Clone, Copy)]
struct ShellPair {
    r: f64,
    s: f64,
    coeff: f64,
}

/// Shell weights on a common lattice `j/K`, used for tensor contraction.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub shells: usize,
    /// `c_jk = m_j n_k + n_j m_k − n_j n_k` in mass units, row-major `K×K`.
    pub coupling: Vec<f64>,
}

/// Kernel of two sphere combinations, `ν` possibly charging the origin.
#[derive(Debug, Clone)]
pub struct ShellKernel {
    mu: RadialMeasure,
    nu: RadialMeasure,
    pairs: Vec<ShellPair>,
    mu_shells: Vec<(f64, f64)>,
    nu_shells: Vec<(f64, f64)>,
    lattice: Option<Lattice>,
    self_energy: f64,
}

impl ShellKernel {
    pub fn new(mu: RadialMeasure, nu: RadialMeasure) -> Result<Self> {
        mu.require_no_atom("mu")?;
        let self_energy = mu.coulomb_self_energy()?;
        let mu_shells: Vec<(f64, f64)> = mu.shell_masses().collect();
        let nu_shells: Vec<(f64, f64)> = nu.shell_masses().collect();

        // merge both shell lists on their union of radii
        let mut radii: Vec<f64> = mu_shells.iter().chain(&nu_shells).map(|(r, _)| *r).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let mass_on = |shells: &[(f64, f64)], r: f64| shells.iter().find(|(s, _)| *s == r).map_or(0.0, |(_, m)| *m);
        let m: Vec<f64> = radii.iter().map(|&r| mass_on(&mu_shells, r)).collect();
        let n: Vec<f64> = radii.iter().map(|&r| mass_on(&nu_shells, r)).collect();
        let mut pairs = Vec::new();
        for (p, &r) in radii.iter().enumerate() {
            for (q, &s) in radii.iter().enumerate() {
                let c = m[p] * n[q] + n[p] * m[q] - n[p] * n[q];
                if c != 0.0 {
                    pairs.push(ShellPair {
                        r,
                        s,
                        coeff: c / (r * s),
                    });
                }
            }
        }

        let nu_has_shells = !nu_shells.is_empty();
        let lattice = if !nu_has_shells || nu.shells() == mu.shells() {
            let k = mu.shells();
            let mw: Vec<f64> = mu.weights().iter().map(|w| w / k as f64).collect();
            let nw: Vec<f64> = if nu_has_shells {
                nu.weights().iter().map(|w| w / k as f64).collect()
            } else {
                vec![0.0; k]
            };
            let mut coupling = vec![0.0; k * k];
            for j in 0..k {
                for l in 0..k {
                    coupling[j * k + l] = mw[j] * nw[l] + nw[j] * mw[l] - nw[j] * nw[l];
                }
            }
            Some(Lattice { shells: k, coupling })
        } else {
            None
        };

        Ok(ShellKernel {
            mu,
            nu,
            pairs,
            mu_shells,
            nu_shells,
            lattice,
            self_energy,
        })
    }

    pub fn mu(&self) -> &RadialMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &RadialMeasure {
        &self.nu
    }

    pub(crate) fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// Sum over shell pairs of `r³s³·Ψ_σσ(a/r, b/s)·c_rs`.
    pub(crate) fn shell_part(&self, a: f64, b: f64) -> f64 {
        let ab = a * b;
        let sum: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let (x, y) = (a * p.s, b * p.r);
                let outer = x + y - ab;
                if outer <= 0.0 {
                    return 0.0;
                }
                let inner = pos((x - y).abs() - ab);
                p.coeff * (outer * outer - inner * inner)
            })
            .sum();
        0.25 * ab * ab * sum
    }

    /// Contribution of the origin atom of `ν`:
    /// `a³b³ν₀(2ν₀ − aV_μ(a) − bV_μ(b) + aV_ν'(a) + bV_ν'(b))`.
    pub(crate) fn atom_part(&self, a: f64, b: f64) -> f64 {
        let nu0 = self.nu.delta_weight();
        if nu0 == 0.0 {
            return 0.0;
        }
        let potential = |shells: &[(f64, f64)], t: f64| shells.iter().map(|(r, m)| m * (t / r).min(1.0)).sum::<f64>();
        let bracket = 2.0 * nu0 - potential(&self.mu_shells, a) - potential(&self.mu_shells, b)
            + potential(&self.nu_shells, a)
            + potential(&self.nu_shells, b);
        (a * b).powi(3) * nu0 * bracket
    }
}

impl Kernel for ShellKernel {
    fn psi(&self, a: f64, b: f64) -> f64 {
        self.shell_part(a, b) + self.atom_part(a, b)
    }

    fn smearing_self_energy(&self) -> f64 {
        self.self_energy
    }

    fn describe(&self) -> String {
        format!(
            "shell kernel mu(K={}) nu(K={}, delta={})",
            self.mu.shells(),
            self.nu.shells(),
            self.nu.delta_weight()
        )
    }
}

/// `Ψ_μν(a, b)` for two sphere combinations.
pub fn psi_general(mu: &RadialMeasure, nu: &RadialMeasure, a: f64, b: f64) -> Result<f64> {
    Ok(ShellKernel::new(mu.clone(), nu.clone())?.psi(a, b))
}
