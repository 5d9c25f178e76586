//! Gauss-Legendre helpers: cached rules, piecewise integration across known
//! kinks, and a panel-doubling composite rule with a convergence check.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

const MAX_CACHED_ORDER: usize = 64;

/// Nodes and weights on `[-1, 1]` for the given order (1..=64).
pub fn rule(order: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    assert!((1..=MAX_CACHED_ORDER).contains(&order), "Gauss-Legendre order {order} out of range");
    let rules = RULES.get_or_init(|| {
        (1..=MAX_CACHED_ORDER)
            .map(|n| {
                let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(NonZeroUsize::new(n).unwrap())
                    .as_node_weight_pairs()
                    .to_vec();
                pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
                pairs
            })
            .collect()
    });
    &rules[order - 1]
}

/// Integrates `f` over `[a, b]` with one Gauss-Legendre rule.
#[inline]
pub fn integrate<F: FnMut(f64) -> f64>(order: usize, a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule(order).iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Integrates over `[a, b]`, splitting at every breakpoint strictly inside.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(order: usize, a: f64, b: f64, breaks: &[f64], mut f: F) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        if hi > lo {
            total += integrate(order, lo, hi, &mut f);
        }
        lo = hi;
    }
    total
}

/// Result of a converged composite integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Difference between the last two refinements.
    pub error: f64,
    pub panels: usize,
}

/// Composite Gauss-Legendre with `order` nodes per panel, starting from
/// `panels` equal panels and doubling until two successive estimates differ
/// by less than `tol`.
pub fn composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize, panels: usize, tol: f64) -> Result<Estimate> {
    const MAX_DOUBLINGS: usize = 16;
    let eval = |n: usize| {
        let h = (b - a) / n as f64;
        (0..n)
            .map(|i| integrate(order, a + i as f64 * h, a + (i + 1) as f64 * h, &f))
            .sum::<f64>()
    };
    let mut n = panels.max(1);
    let mut previous = eval(n);
    for _ in 0..MAX_DOUBLINGS {
        n *= 2;
        let current = eval(n);
        let error = (current - previous).abs();
        if !current.is_finite() {
            return Err(Error::Numeric(format!("integrand is not finite on [{a}, {b}]")));
        }
        if error < tol {
            return Ok(Estimate {
                value: current,
                error,
                panels: n,
            });
        }
        previous = current;
    }
    Err(Error::Numeric(format!(
        "composite quadrature on [{a}, {b}] did not reach tolerance {tol:e} with {n} panels"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let v = integrate(3, 0.0, 2.0, |x| x.powi(5) - x);
        assert!((v - (64.0 / 6.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pieces_handle_kinks() {
        // |x - 0.3| has a kink that a single rule misses
        let v = integrate_pieces(2, 0.0, 1.0, &[0.3, 5.0, -1.0], |x| (x - 0.3f64).abs());
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn composite_converges() {
        let est = composite(|x: f64| x.sqrt(), 0.0, 1.0, 8, 4, 1e-8).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-7);
        assert!(composite(|x: f64| 1.0 / x, 0.0, 1.0, 2, 1, 1e-12).is_err());
    }
}
