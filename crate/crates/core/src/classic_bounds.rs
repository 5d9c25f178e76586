//! The original Lieb-Oxford route: bound the kernel against a point charge by
//! a nondecreasing majorant of `χ(a) = a³(1 − aV_μ(a))`.
//!
//! Two majorants are available: `ζ`, the smallest nondecreasing function
//! above `χ`, and `ξ(a) = ∫₀ᵃ χ'(s)₊ ds`, which is what the classic proof
//! uses. Both lead to `c <= (3/2)(2D(μ,μ)²·4π∫₀^∞ v(r)/r² dr)^{1/3}`.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::dual_solver::assemble_constant;
use crate::error::{Error, Result};
use crate::measures::RadialMeasure;

pub const MIN_GRID_POINTS: usize = 1000;

/// `χ(a) = a³(1 − aV_μ(a))`; zero for `a >= 1`.
pub fn chi(mu: &RadialMeasure, a: f64) -> f64 {
    if a >= 1.0 {
        return 0.0;
    }
    a.powi(3) * (1.0 - mu.scaled_potential(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Zeta,
    Xi,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Zeta => "zeta",
            Variant::Xi => "xi",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeta" => Ok(Variant::Zeta),
            "xi" => Ok(Variant::Xi),
            other => Err(Error::invalid(format!("unknown majorant variant {other:?}"))),
        }
    }
}

/// `χ`, `ζ` and `ξ` sampled on a uniform grid of `[0, 1]`. Beyond `a = 1`
/// both majorants are constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantCurve {
    pub a: Vec<f64>,
    pub chi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
}

impl MajorantCurve {
    pub fn values(&self, variant: Variant) -> &[f64] {
        match variant {
            Variant::Zeta => &self.zeta,
            Variant::Xi => &self.xi,
        }
    }
}

pub fn build_majorants(mu: &RadialMeasure, grid_points: usize) -> Result<MajorantCurve> {
    mu.require_no_atom("mu")?;
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::invalid(format!(
            "majorants need at least {MIN_GRID_POINTS} grid points, got {grid_points}"
        )));
    }
    let n = grid_points - 1;
    let a: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let chi: Vec<f64> = a.iter().map(|&x| chi(mu, x)).collect();
    let mut zeta = Vec::with_capacity(chi.len());
    let mut xi = Vec::with_capacity(chi.len());
    let (mut running_max, mut climbed) = (0.0f64, 0.0f64);
    for (i, &c) in chi.iter().enumerate() {
        running_max = running_max.max(c);
        if i > 0 {
            climbed += (c - chi[i - 1]).max(0.0);
        }
        zeta.push(running_max);
        xi.push(climbed);
    }
    Ok(MajorantCurve { a, chi, zeta, xi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicReport {
    pub variant: Variant,
    /// `4π∫₀^∞ v(r)/r² dr`.
    pub integral: f64,
    pub d_self: f64,
    pub constant: f64,
}

/// `4π(∫₀¹ v(r)/r² dr + v(1))` by the trapezoidal rule; the part beyond 1 is
/// exact since `v` is constant there.
fn radial_integral(curve: &MajorantCurve, variant: Variant) -> f64 {
    let v = curve.values(variant);
    let integrand = |i: usize| {
        let r = curve.a[i];
        // v(r) = O(r³) near 0
        if r == 0.0 {
            0.0
        } else {
            v[i] / (r * r)
        }
    };
    let h = curve.a[1] - curve.a[0];
    let n = v.len() - 1;
    let inner = h * ((1..n).map(integrand).sum::<f64>() + 0.5 * (integrand(0) + integrand(n)));
    4.0 * PI * (inner + v[n])
}

pub fn classic_constant(mu: &RadialMeasure, variant: Variant, grid_points: usize) -> Result<ClassicReport> {
    let curve = build_majorants(mu, grid_points)?;
    let d_self = mu.coulomb_self_energy()?;
    let integral = radial_integral(&curve, variant);
    Ok(ClassicReport {
        variant,
        integral,
        d_self,
        constant: assemble_constant(integral, d_self),
    })
}
