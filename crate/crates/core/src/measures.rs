//! Radial probability measures built from concentric spheres.
//!
//! A [`RadialMeasure`] is `delta·δ₀ + (1/K)·Σ_j w_j·σ_{j/K}` where `σ_r` is the
//! normalized uniform measure on the sphere of radius `r`. All supports lie in
//! the closed unit ball.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass drift accepted (and silently removed) by the constructors.
const RENORMALIZE_TOLERANCE: f64 = 1e-6;
/// Mass drift allowed on a finished measure.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialMeasure {
    delta_weight: f64,
    weights: Vec<f64>,
}

/// On-disk description of a measure (`{"K": .., "delta": .., "weights": [..]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(rename = "K")]
    pub shells: usize,
    #[serde(default)]
    pub delta: f64,
    pub weights: Vec<f64>,
}

impl RadialMeasure {
    /// Builds a measure from the origin mass and the `K` sphere coefficients.
    ///
    /// The total mass `delta + (1/K)·Σ w_j` must be 1; a drift below `1e-6` is
    /// renormalized away, anything larger is rejected.
    pub fn new(delta_weight: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("a radial measure needs at least one shell (K >= 1)"));
        }
        if !delta_weight.is_finite() || delta_weight < 0.0 {
            return Err(Error::invalid(format!("origin weight must be finite and >= 0, got {delta_weight}")));
        }
        if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("shell weight {} must be finite and >= 0, got {w}", j + 1)));
        }
        let k = weights.len() as f64;
        let total = delta_weight + weights.iter().sum::<f64>() / k;
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::invalid(format!("measure is not a probability measure: total mass {total}")));
        }
        let mut measure = RadialMeasure {
            delta_weight,
            weights,
        };
        if (total - 1.0).abs() > 0.0 {
            measure.delta_weight /= total;
            measure.weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(measure)
    }

    /// Normalizes arbitrary nonnegative masses into a probability measure.
    pub fn from_unnormalized(delta_mass: f64, shell_masses: &[f64]) -> Result<Self> {
        let k = shell_masses.len() as f64;
        let total = delta_mass + shell_masses.iter().sum::<f64>();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid(format!("cannot normalize a measure of total mass {total}")));
        }
        let weights = shell_masses.iter().map(|m| k * m / total).collect();
        RadialMeasure::new(delta_mass / total, weights)
    }

    /// The uniform measure on the unit sphere.
    pub fn sphere() -> Self {
        RadialMeasure {
            delta_weight: 0.0,
            weights: vec![1.0],
        }
    }

    /// The uniform ball represented by `K` shells with weights `∝ j²`.
    pub fn ball(shells: usize) -> Result<Self> {
        if shells == 0 {
            return Err(Error::invalid("ball discretization needs K >= 1"));
        }
        let masses: Vec<f64> = (1..=shells).map(|j| (j * j) as f64).collect();
        RadialMeasure::from_unnormalized(0.0, &masses)
    }

    /// The Dirac mass at the origin. Only meaningful as a background measure.
    pub fn delta() -> Self {
        RadialMeasure {
            delta_weight: 1.0,
            weights: vec![0.0],
        }
    }

    /// Number of shells `K`.
    pub fn shells(&self) -> usize {
        self.weights.len()
    }

    pub fn delta_weight(&self) -> f64 {
        self.delta_weight
    }

    /// Sphere coefficients `w_1..w_K` (so that shell `j` carries mass `w_j / K`).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Radius `j/K` of shell `j` (1-based).
    pub fn radius(&self, j: usize) -> f64 {
        j as f64 / self.shells() as f64
    }

    /// Iterates over `(radius, mass)` of the shells carrying positive mass.
    pub fn shell_masses(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let k = self.shells() as f64;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(move |(i, w)| ((i + 1) as f64 / k, w / k))
    }

    pub fn total_mass(&self) -> f64 {
        self.delta_weight + self.weights.iter().sum::<f64>() / self.shells() as f64
    }

    pub fn has_atom_at_origin(&self) -> bool {
        self.delta_weight > 0.0
    }

    pub(crate) fn require_no_atom(&self, role: &str) -> Result<()> {
        if self.has_atom_at_origin() {
            Err(Error::invalid(format!(
                "{role} must not charge the origin (delta weight {})",
                self.delta_weight
            )))
        } else {
            Ok(())
        }
    }

    /// Coulomb self-energy `D(m,m) = (1/(2K))·Σ_{j,k} w_j w_k / max(j,k)`.
    pub fn coulomb_self_energy(&self) -> Result<f64> {
        if self.has_atom_at_origin() {
            return Err(Error::InfiniteSelfEnergy(self.delta_weight));
        }
        // Σ_{j,k} w_j w_k / max(j,k) = Σ_m (w_m² + 2 w_m Σ_{j<m} w_j) / m
        let mut below = 0.0;
        let mut sum = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            sum += w * (w + 2.0 * below) / (i + 1) as f64;
            below += w;
        }
        Ok(sum / (2.0 * self.shells() as f64))
    }

    /// Coulomb scalar product `D(self, other)` of two measures, at most one of
    /// which may charge the origin.
    pub fn coulomb_pair_energy(&self, other: &RadialMeasure) -> Result<f64> {
        if self.has_atom_at_origin() && other.has_atom_at_origin() {
            return Err(Error::InfiniteSelfEnergy(self.delta_weight.min(other.delta_weight)));
        }
        let mut sum = 0.0;
        for (r, p) in self.shell_masses() {
            for (s, q) in other.shell_masses() {
                sum += p * q / r.max(s);
            }
        }
        sum += self.delta_weight * other.shell_masses().map(|(s, q)| q / s).sum::<f64>();
        sum += other.delta_weight * self.shell_masses().map(|(r, p)| p / r).sum::<f64>();
        Ok(0.5 * sum)
    }

    /// `a·V(a·e₁)`, the potential of the measure at distance `a` scaled by `a`.
    ///
    /// By Newton's theorem this is `delta + (1/K)·Σ_j w_j·min(aK/j, 1)`.
    pub fn scaled_potential(&self, a: f64) -> f64 {
        let k = self.shells() as f64;
        let shells: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (a * k / (i + 1) as f64).min(1.0))
            .sum();
        self.delta_weight + shells / k
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            shells: self.shells(),
            delta: self.delta_weight,
            weights: self.weights.clone(),
        }
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        if spec.weights.len() != spec.shells {
            return Err(Error::invalid(format!(
                "measure spec declares K = {} but lists {} weights",
                spec.shells,
                spec.weights.len()
            )));
        }
        let measure = RadialMeasure::new(spec.delta, spec.weights.clone())?;
        Ok(measure)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: MeasureSpec = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        RadialMeasure::from_spec(&spec).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_spec()).expect("measure spec serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sphere_and_delta() {
        let s = RadialMeasure::sphere();
        assert_eq!(s.shells(), 1);
        assert_eq!(s.delta_weight(), 0.0);
        assert_eq!(s.weights(), &[1.0]);
        assert_eq!(s.coulomb_self_energy().unwrap(), 0.5);

        let d = RadialMeasure::delta();
        assert_eq!(d.delta_weight(), 1.0);
        assert_eq!(d.scaled_potential(0.3), 1.0);
        assert!(matches!(d.coulomb_self_energy(), Err(Error::InfiniteSelfEnergy(_))));
    }

    #[test]
    fn two_shell_self_energy() {
        let m = RadialMeasure::new(0.0, vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.coulomb_self_energy().unwrap(), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn ball_shells() {
        assert_eq!(RadialMeasure::ball(1).unwrap(), RadialMeasure::sphere());
        assert!(RadialMeasure::ball(0).is_err());
        let b = RadialMeasure::ball(10).unwrap();
        assert!(b.weights().iter().all(|w| *w >= 0.0));
        assert_abs_diff_eq!(b.total_mass(), 1.0, epsilon = 1e-12);
        // D(B,B) = 3/5 for the uniform ball
        assert_abs_diff_eq!(RadialMeasure::ball(100).unwrap().coulomb_self_energy().unwrap(), 0.6, epsilon = 1e-2);
        assert_abs_diff_eq!(RadialMeasure::ball(200).unwrap().coulomb_self_energy().unwrap(), 0.6, epsilon = 5e-3);
    }

    #[test]
    fn scaled_potential_of_sphere() {
        let s = RadialMeasure::sphere();
        assert_eq!(s.scaled_potential(0.5), 0.5);
        assert_eq!(s.scaled_potential(2.0), 1.0);
        assert_eq!(s.scaled_potential(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RadialMeasure::new(0.0, vec![]).is_err());
        assert!(RadialMeasure::new(0.0, vec![1.0, -0.5, 1.5]).is_err());
        assert!(RadialMeasure::new(0.0, vec![0.5]).is_err());
        assert!(RadialMeasure::new(f64::NAN, vec![1.0]).is_err());
        let m = RadialMeasure::new(0.0, vec![1.0 + 5e-7]).unwrap();
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spec_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.json");
        let m = RadialMeasure::new(0.25, vec![0.5, 1.0, 0.75]).unwrap();
        m.save(&path).unwrap();
        assert_eq!(RadialMeasure::load(&path).unwrap(), m);

        std::fs::write(&path, r#"{"K": 2, "weights": [1.0, 1.0]}"#).unwrap();
        assert_eq!(RadialMeasure::load(&path).unwrap().delta_weight(), 0.0);
        std::fs::write(&path, r#"{"K": 3, "weights": [1.0, 1.0]}"#).unwrap();
        assert!(RadialMeasure::load(&path).is_err());
        std::fs::write(&path, r#"{"K": 2, "weights": [1.0, 2.0]}"#).unwrap();
        assert!(RadialMeasure::load(&path).is_err());
    }

    fn measure_strategy() -> impl Strategy<Value = RadialMeasure> {
        prop::collection::vec(0.0f64..1.0, 1..12)
            .prop_filter("nonzero mass", |v| v.iter().sum::<f64>() > 1e-3)
            .prop_map(|v| RadialMeasure::from_unnormalized(0.0, &v).unwrap())
    }

    proptest! {
        #[test]
        fn scaled_potential_is_monotone_and_saturates(m in measure_strategy(), a in 0.001f64..1.5) {
            let h = 1e-4;
            let lo = m.scaled_potential(a);
            let hi = m.scaled_potential(a + h);
            prop_assert!(hi >= lo - 1e-15);
            // slope bounded by 1/a
            prop_assert!((hi - lo) / h <= 1.0 / a + 1e-9);
            prop_assert!((m.scaled_potential(1.0 + a) - m.total_mass()).abs() < 1e-12);
        }

        #[test]
        fn self_energy_scales_quadratically(m in measure_strategy(), t in 0.1f64..3.0) {
            // the closed sum is a quadratic form in the weights
            let d = m.coulomb_self_energy().unwrap();
            let scaled = RadialMeasure { delta_weight: 0.0, weights: m.weights().iter().map(|w| w * t).collect() };
            prop_assert!((scaled.coulomb_self_energy().unwrap() - t * t * d).abs() < 1e-12 * (1.0 + t * t));
        }

        #[test]
        fn self_energy_matches_pair_energy(m in measure_strategy()) {
            let d = m.coulomb_self_energy().unwrap();
            prop_assert!((m.coulomb_pair_energy(&m).unwrap() - d).abs() < 1e-12);
        }

        #[test]
        fn newton_monotonicity(m1 in measure_strategy(), m2 in measure_strategy()) {
            // replacing either measure by a point charge can only increase D
            let d = m1.coulomb_pair_energy(&m2).unwrap();
            let point = RadialMeasure::delta();
            prop_assert!(d <= m1.coulomb_pair_energy(&point).unwrap() + 1e-12);
            prop_assert!(d <= m2.coulomb_pair_energy(&point).unwrap() + 1e-12);
        }
    }
}
