//! Independent evaluation of `Φ_μν` from first principles.
//!
//! Two uniform shells of radii `r₁`, `r₂` whose centers sit at distance one
//! interact (Newton) through
//! `W(r₁, r₂) = (1/(2r₁))·∫_{|1−r₁|}^{1+r₁} ρ / max(ρ, r₂) dρ`,
//! which is evaluated in closed form. Measures are split into atoms, shells
//! and the continuous uniform ball; the ball is integrated with piecewise
//! Gauss-Legendre rules cut at every kink of `W`.

use crate::error::{Error, Result};
use crate::measures::RadialMeasure;
use crate::quadrature;

/// Measures the oracle can integrate against.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleMeasure {
    Shells(RadialMeasure),
    /// The continuous uniform measure of the unit ball.
    UniformBall,
}

#[derive(Debug, Clone, Copy)]
enum Part {
    /// Uniform shell (radius 0 is the atom at the origin) with its mass.
    Shell(f64, f64),
    /// Uniform ball of unit radius and unit mass.
    Ball,
}

impl OracleMeasure {
    fn parts(&self) -> Vec<Part> {
        match self {
            OracleMeasure::UniformBall => vec![Part::Ball],
            OracleMeasure::Shells(m) => {
                let mut parts: Vec<Part> = m.shell_masses().map(|(r, w)| Part::Shell(r, w)).collect();
                if m.has_atom_at_origin() {
                    parts.push(Part::Shell(0.0, m.delta_weight()));
                }
                parts
            }
        }
    }

    fn has_atom(&self) -> bool {
        matches!(self, OracleMeasure::Shells(m) if m.has_atom_at_origin())
    }
}

/// Mean of `1/|x − y|` over two unit-mass shells of radii `r1`, `r2` with
/// centers at distance one.
pub(crate) fn shell_interaction(r1: f64, r2: f64) -> f64 {
    if r1 == 0.0 {
        return 1.0 / r2.max(1.0);
    }
    if r2 == 0.0 {
        return 1.0 / r1.max(1.0);
    }
    if r1 + r2 <= 1.0 {
        return 1.0;
    }
    if r2 >= 1.0 + r1 {
        return 1.0 / r2;
    }
    if r1 >= 1.0 + r2 {
        return 1.0 / r1;
    }
    let lo = (1.0 - r1).abs();
    let hi = 1.0 + r1;
    // ρ < r₂ contributes ρ/r₂, ρ > r₂ contributes 1
    let below = if r2 > lo {
        let top = r2.min(hi);
        (top * top - lo * lo) / (2.0 * r2)
    } else {
        0.0
    };
    let above = (hi - r2.max(lo)).max(0.0);
    (below + above) / (2.0 * r1)
}

const ORDER: usize = 24;
const CHECK_ORDER: usize = 12;

/// `∫₀¹ 3s² W(r1, s/b) ds`: shell at scale-reduced radius `r1` against the
/// ball dilated by `1/b`.
fn shell_ball(order: usize, r1: f64, b: f64) -> f64 {
    let breaks = [b * (1.0 - r1), b * (r1 - 1.0), b * (1.0 + r1)];
    quadrature::integrate_pieces(order, 0.0, 1.0, &breaks, |s| 3.0 * s * s * shell_interaction(r1, s / b))
}

fn ball_ball(order: usize, a: f64, b: f64) -> f64 {
    let inv_b = 1.0 / b;
    let breaks = [a, a * (1.0 - inv_b), a * (1.0 + inv_b), a * (inv_b - 1.0)];
    quadrature::integrate_pieces(order, 0.0, 1.0, &breaks, |r| 3.0 * r * r * shell_ball(order, r / a, b))
}

/// `∬ dX(u) dY(v) / |e₁ + u/a − v/b|` for two parts.
fn part_interaction(order: usize, x: Part, y: Part, a: f64, b: f64) -> f64 {
    match (x, y) {
        (Part::Shell(r, p), Part::Shell(s, q)) => p * q * shell_interaction(r / a, s / b),
        (Part::Shell(r, p), Part::Ball) => p * shell_ball(order, r / a, b),
        // W is symmetric in its two radii
        (Part::Ball, Part::Shell(s, q)) => q * shell_ball(order, s / b, a),
        (Part::Ball, Part::Ball) => ball_ball(order, a, b),
    }
}

fn phi_with_order(order: usize, mu: &[Part], nu: &[Part], a: f64, b: f64) -> f64 {
    let mut overlap = 0.0;
    for &x in mu {
        for &y in nu {
            overlap += part_interaction(order, x, y, a, b);
        }
    }
    (a * b).powi(3) * (1.0 - overlap)
}

/// `Φ_μν(a, b) = a³b³(1 − ∬ dμ(u)dν(v)/|e₁ + u/a − v/b|)` by quadrature.
///
/// Two rule orders are compared; a disagreement above `1e-9` (relative to
/// `a³b³`) is reported as a numeric error.
pub fn phi_quadrature_oracle(mu: &OracleMeasure, nu: &OracleMeasure, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("oracle needs a, b > 0, got ({a}, {b})")));
    }
    if mu.has_atom() && nu.has_atom() {
        return Err(Error::invalid("two atoms at the origin have no finite interaction"));
    }
    let (mp, np) = (mu.parts(), nu.parts());
    let fine = phi_with_order(ORDER, &mp, &np, a, b);
    let coarse = phi_with_order(CHECK_ORDER, &mp, &np, a, b);
    let scale = (a * b).powi(3).max(1.0);
    if !fine.is_finite() || (fine - coarse).abs() > 1e-9 * scale {
        return Err(Error::Numeric(format!(
            "oracle quadrature not converged at ({a}, {b}): {fine} vs {coarse}"
        )));
    }
    Ok(fine)
}

/// `Ψ_μν = Φ_μν + Φ_νμ − Φ_νν` assembled from [`phi_quadrature_oracle`].
///
/// When `ν` charges the origin the atom-atom term of `Φ_νν` is the exact
/// point-charge value `a³b³ν₀²(1 − 1) = 0` and is handled separately.
pub fn psi_quadrature_oracle(mu: &OracleMeasure, nu: &OracleMeasure, a: f64, b: f64) -> Result<f64> {
    if mu.has_atom() {
        return Err(Error::invalid("the smearing measure mu cannot charge the origin"));
    }
    let nu_nu = match nu {
        OracleMeasure::Shells(m) if m.has_atom_at_origin() => {
            // split ν = ν₀δ₀ + ν', then Φ_νν = ν₀²·0 + ν₀(Φ_δν' + Φ_ν'δ) + Φ_ν'ν' with
            // the "1" in each Φ weighted by the product of masses
            let nu0 = m.delta_weight();
            let atom = OracleMeasure::Shells(RadialMeasure::delta());
            let rest_mass = 1.0 - nu0;
            let rest: Vec<(f64, f64)> = m.shell_masses().collect();
            if rest.is_empty() {
                0.0
            } else {
                let masses: Vec<f64> = m.weights().to_vec();
                let shells = RadialMeasure::new(0.0, masses.iter().map(|w| w / rest_mass).collect())?;
                let prime = OracleMeasure::Shells(shells);
                nu0 * rest_mass * (phi_quadrature_oracle(&atom, &prime, a, b)? + phi_quadrature_oracle(&prime, &atom, a, b)?)
                    + rest_mass * rest_mass * phi_quadrature_oracle(&prime, &prime, a, b)?
            }
        }
        _ => phi_quadrature_oracle(nu, nu, a, b)?,
    };
    Ok(phi_quadrature_oracle(mu, nu, a, b)? + phi_quadrature_oracle(nu, mu, a, b)? - nu_nu)
}
