//! Lieb-Oxford-type bound for the exchange (negatively correlated) case.
//!
//! Here the kernel is the explicit polynomial `Θ(a,b) = a³b³(1−a−b)`, the
//! optimal majorant `g` is known in closed form up to the root of a cubic,
//! and the constant follows from `J = 4π∫₀¹ g(a)/a⁵ da`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;

/// Switch point of the optimizer `b(a)`.
pub const SWITCH: f64 = 3.0 / 8.0;

const GAUSS_ORDER: usize = 8;
const J_TOLERANCE: f64 = 1e-12;

/// `Θ(a,b) = a³b³(1 − a − b)`.
#[inline]
pub fn theta(a: f64, b: f64) -> f64 {
    (a * b).powi(3) * (1.0 - a - b)
}

fn cubic(a: f64, b: f64) -> f64 {
    let c = 7.0 * a - 3.0;
    -3.0 * a * a * (1.0 - a) + c * a * b + c * b * b + 7.0 * b * b * b
}

fn cubic_slope(a: f64, b: f64) -> f64 {
    let c = 7.0 * a - 3.0;
    c * a + 2.0 * c * b + 21.0 * b * b
}

/// The root `R(a) ∈ [0, 1)` of
/// `−3a²(1−a) + (7a−3)ab + (7a−3)b² + 7b³` for `3/8 <= a <= 1`.
pub fn cubic_root_r(a: f64) -> Result<f64> {
    if !(SWITCH..=1.0).contains(&a) {
        return Err(Error::invalid(format!("R(a) is defined for 3/8 <= a <= 1, got {a}")));
    }
    // p(0) = −3a²(1−a) <= 0 < p(1) = 3a³ + 4a² + 4a + 4
    if cubic(a, 0.0) == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cubic(a, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..4 {
        let slope = cubic_slope(a, b);
        if slope == 0.0 {
            break;
        }
        let next = b - cubic(a, b) / slope;
        if !(lo..=hi).contains(&next) {
            break;
        }
        b = next;
    }
    Ok(b)
}

/// `b(a) = a` on `[0, 3/8]` and `R(a)` on `[3/8, 1]`.
pub fn b_opt(a: f64) -> f64 {
    if a <= SWITCH {
        a
    } else {
        cubic_root_r(a.min(1.0)).expect("a is in [3/8, 1]")
    }
}

/// `g(a) = Θ(a, b(a)) − Θ(b(a), b(a))₊/2`, supported on `[0, 1]`.
pub fn g_exchange(a: f64) -> f64 {
    if !(a > 0.0) || a >= 1.0 {
        return 0.0;
    }
    let b = b_opt(a);
    theta(a, b) - 0.5 * theta(b, b).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeReport {
    pub j_value: f64,
    /// `(3/2)(2J)^{1/3}`.
    pub constant_general: f64,
    /// `(3/2)(π/6)^{1/3}`.
    pub constant_uniform: f64,
    pub quadrature_error_estimate: f64,
    /// Panels used on `[3/8, 1]` at convergence.
    pub panels: usize,
}

/// Evaluates `J = 4π∫₀¹ g(a)/a⁵ da`.
///
/// On `[0, 3/8]` the integrand is `2πa(1 − 2a)`, integrated exactly; the
/// rest uses composite Gauss-Legendre starting from about
/// `quadrature_points` nodes and refined until stable.
pub fn compute_j(quadrature_points: usize) -> Result<ExchangeReport> {
    if quadrature_points < 100 {
        return Err(Error::invalid(format!("need at least 100 quadrature points, got {quadrature_points}")));
    }
    let s = SWITCH;
    let head = 2.0 * PI * (s * s / 2.0 - 2.0 * s * s * s / 3.0);
    let panels = quadrature_points.div_ceil(GAUSS_ORDER);
    let tail = quadrature::composite(|a| 4.0 * PI * g_exchange(a) / a.powi(5), s, 1.0, GAUSS_ORDER, panels, J_TOLERANCE)?;
    let j_value = head + tail.value;
    Ok(ExchangeReport {
        j_value,
        constant_general: 1.5 * (2.0 * j_value).cbrt(),
        constant_uniform: 1.5 * (PI / 6.0).cbrt(),
        quadrature_error_estimate: tail.error,
        panels: tail.panels,
    })
}

/// One sample of the curves `b(a)` and `g(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeSample {
    pub a: f64,
    pub b: f64,
    pub g: f64,
}

/// `points` equally spaced samples on `[0, 1]`.
pub fn sample_curves(points: usize) -> Vec<ExchangeSample> {
    let n = points.max(2) - 1;
    (0..=n)
        .map(|i| {
            let a = i as f64 / n as f64;
            ExchangeSample {
                a,
                b: b_opt(a),
                g: g_exchange(a),
            }
        })
        .collect()
}
