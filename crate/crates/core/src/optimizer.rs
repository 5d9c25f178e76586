//! Local search over the smearing measures.
//!
//! Both measures are parametrized by unconstrained logits `θ`: masses are
//! `θ_j² / Σθ²`, so every point is a probability measure. For `ν` the first
//! logit is the mass at the origin. The certified constant is minimized by
//! BFGS with central finite-difference gradients (evaluated concurrently) and
//! a backtracking line search that only accepts decrease. Restarts after the
//! first one draw standard normal logits from a seeded ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dual_solver::{certify, BoundReport, SolverOptions, TailMode};
use crate::error::{Error, Result};
use crate::measures::RadialMeasure;
use crate::psi::{build_psi_matrix, Grid, Kernel, ShellKernel, SphereTensor};

const GRADIENT_TOLERANCE: f64 = 1e-5;
const STALL_TOLERANCE: f64 = 1e-7;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub shells: usize,
    pub per_unit: usize,
    pub radius: f64,
    /// Tolerance of the inner fixed-point iteration.
    pub eps: f64,
    pub fd_step: f64,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tensor_budget_bytes: u64,
    pub tail: TailMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            shells: 20,
            per_unit: 100,
            radius: 10.0,
            eps: 1e-6,
            fd_step: 1e-4,
            max_evals: 2000,
            restarts: 4,
            seed: 7,
            tensor_budget_bytes: 1 << 30,
            tail: TailMode::Heuristic,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<Grid> {
        if self.shells == 0 || self.max_evals == 0 || self.restarts == 0 {
            return Err(Error::invalid("K, max_evals and restarts must be positive"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(1e-6..=1e-2).contains(&self.fd_step) {
            return Err(Error::invalid(format!(
                "finite-difference step must lie in [1e-6, 1e-2], got {}",
                self.fd_step
            )));
        }
        Grid::new(self.per_unit, self.radius)
    }
}

/// Starting point of the first restart.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Logits { mu: Vec<f64>, nu: Vec<f64> },
    Ball,
    Sphere,
    Random,
}

impl Init {
    /// Logits `(θ_μ, θ_ν)` for `K` shells. Presets avoid exact zeros, where
    /// the squared map has a vanishing derivative.
    pub fn logits(&self, shells: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        match self {
            Init::Logits { mu, nu } => (mu.clone(), nu.clone()),
            Init::Ball => {
                let mu: Vec<f64> = (1..=shells).map(|j| j as f64 / shells as f64).collect();
                let mut nu = vec![0.01];
                nu.extend(&mu);
                (mu, nu)
            }
            Init::Sphere => {
                let mut mu = vec![0.05; shells];
                mu[shells - 1] = 1.0;
                let mut nu = vec![0.05];
                nu.extend(&mu);
                (mu, nu)
            }
            Init::Random => {
                let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
                let mu = draw(shells);
                let nu = draw(shells + 1);
                (mu, nu)
            }
        }
    }
}

/// Measures encoded by a pair of logit vectors.
pub fn measures_from_logits(theta_mu: &[f64], theta_nu: &[f64]) -> Result<(RadialMeasure, RadialMeasure)> {
    let k = theta_mu.len();
    if k == 0 || theta_nu.len() != k + 1 {
        return Err(Error::invalid(format!(
            "expected K mu logits and K+1 nu logits, got {} and {}",
            theta_mu.len(),
            theta_nu.len()
        )));
    }
    if theta_mu.iter().chain(theta_nu).any(|t| !t.is_finite()) {
        return Err(Error::invalid("logits must be finite"));
    }
    let square = |t: &[f64]| t.iter().map(|x| x * x).collect::<Vec<f64>>();
    let mu = RadialMeasure::from_unnormalized(0.0, &square(theta_mu))?;
    let nu_masses = square(theta_nu);
    let nu = RadialMeasure::from_unnormalized(nu_masses[0], &nu_masses[1..])?;
    Ok((mu, nu))
}

/// Evaluates certified constants for one `(K, M, R)`, sharing a tensor when
/// it fits in the memory budget.
pub struct Evaluator {
    config: OptimizerConfig,
    grid: Grid,
    tensor: Option<SphereTensor>,
}

impl Evaluator {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        let grid = config.validate()?;
        let tensor = if SphereTensor::required_bytes(config.shells, grid) <= config.tensor_budget_bytes {
            Some(SphereTensor::build(config.shells, grid, config.tensor_budget_bytes)?)
        } else {
            None
        };
        Ok(Evaluator { config, grid, tensor })
    }

    pub fn uses_tensor(&self) -> bool {
        self.tensor.is_some()
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    fn options(&self) -> SolverOptions {
        SolverOptions {
            eps: self.config.eps,
            tail: self.config.tail,
            ..SolverOptions::default()
        }
    }

    pub fn report(&self, mu: &RadialMeasure, nu: &RadialMeasure) -> Result<BoundReport> {
        if mu.shells() != self.config.shells || nu.shells() != self.config.shells {
            return Err(Error::invalid(format!("measures must use K = {} shells", self.config.shells)));
        }
        let kernel = ShellKernel::new(mu.clone(), nu.clone())?;
        let psi = build_psi_matrix(&kernel, self.grid, self.tensor.as_ref())?;
        Ok(certify(&psi, kernel.smearing_self_energy(), &self.options())?.0)
    }

    /// Certified constant for the measures encoded by the logits.
    pub fn objective_from_logits(&self, theta_mu: &[f64], theta_nu: &[f64]) -> Result<f64> {
        let (mu, nu) = measures_from_logits(theta_mu, theta_nu)?;
        Ok(self.report(&mu, &nu)?.constant)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let k = self.config.shells;
        self.objective_from_logits(&x[..k], &x[k..]).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = self.config.fd_step;
        (0..x.len())
            .into_par_iter()
            .map(|i| {
                let mut forward = x.to_vec();
                let mut backward = x.to_vec();
                forward[i] += h;
                backward[i] -= h;
                (self.value(&forward) - self.value(&backward)) / (2.0 * h)
            })
            .collect()
    }
}

/// Certified constant for the measures encoded by the logits.
pub fn objective_from_logits(theta_mu: &[f64], theta_nu: &[f64], config: &OptimizerConfig) -> Result<f64> {
    Evaluator::new(config.clone())?.objective_from_logits(theta_mu, theta_nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Stall,
    LineSearch,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub initial_constant: f64,
    pub final_constant: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub restart: usize,
    /// Objective evaluations spent so far, over all restarts.
    pub evaluation: usize,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_mu: RadialMeasure,
    pub best_nu: RadialMeasure,
    pub best_report: BoundReport,
    pub trajectory: Vec<TrajectoryPoint>,
    pub restarts: Vec<RestartSummary>,
    /// Whether some restart ran out of evaluations.
    pub incomplete: bool,
    pub used_tensor: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Run {
    x: Vec<f64>,
    value: f64,
    summary: RestartSummary,
}

fn bfgs(evaluator: &Evaluator, start: Vec<f64>, restart: usize, spent: &mut usize, trajectory: &mut Vec<TrajectoryPoint>) -> Run {
    let n = start.len();
    let budget = evaluator.config.max_evals;
    let mut evals = 0usize;
    let mut x = start;
    let mut fx = evaluator.value(&x);
    evals += 1;
    let initial = fx;
    trajectory.push(TrajectoryPoint {
        restart,
        evaluation: *spent + evals,
        constant: fx,
    });
    let identity = |scale: f64| {
        let mut h = vec![0.0; n * n];
        (0..n).for_each(|i| h[i * n + i] = scale);
        h
    };
    let mut h = identity(1.0);
    let mut iterations = 0;
    let mut g = Vec::new();
    let stop = loop {
        if !fx.is_finite() {
            break StopReason::LineSearch;
        }
        if g.is_empty() {
            if evals + 2 * n > budget {
                break StopReason::Budget;
            }
            g = evaluator.gradient(&x);
            evals += 2 * n;
        }
        if dot(&g, &g).sqrt() < GRADIENT_TOLERANCE {
            break StopReason::Gradient;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                h = identity(1.0);
            }
            let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
            let mut slope = dot(&g, &d);
            if slope >= 0.0 {
                h = identity(1.0);
                d = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }
            // keep the first trial step moderate in logit space
            let longest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut t = if longest > 1.0 { 1.0 / longest } else { 1.0 };
            for _ in 0..MAX_BACKTRACKS {
                if evals >= budget {
                    break;
                }
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let ft = evaluator.value(&trial);
                evals += 1;
                if ft < fx && ft <= fx + ARMIJO * t * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || evals >= budget {
                break;
            }
        }
        let Some((next, fnext)) = accepted else {
            break if evals >= budget { StopReason::Budget } else { StopReason::LineSearch };
        };
        iterations += 1;
        let improvement = (fx - fnext) / fx.abs().max(f64::MIN_POSITIVE);
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        x = next;
        fx = fnext;
        trajectory.push(TrajectoryPoint {
            restart,
            evaluation: *spent + evals,
            constant: fx,
        });
        if improvement < STALL_TOLERANCE {
            break StopReason::Stall;
        }
        if evals + 2 * n > budget {
            break StopReason::Budget;
        }
        let g_new = evaluator.gradient(&x);
        evals += 2 * n;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if iterations == 1 {
                h = identity(sy / dot(&y, &y));
            }
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        g = g_new;
    };
    *spent += evals;
    Run {
        x,
        value: fx,
        summary: RestartSummary {
            restart,
            initial_constant: initial,
            final_constant: fx,
            iterations,
            evaluations: evals,
            stop,
        },
    }
}

/// Runs `config.restarts` local searches and keeps the best certified result.
pub fn optimize(config: &OptimizerConfig, init: &Init) -> Result<OptimizationResult> {
    let evaluator = Evaluator::new(config.clone())?;
    optimize_with(&evaluator, init)
}

/// [`optimize`] with a prepared evaluator.
pub fn optimize_with(evaluator: &Evaluator, init: &Init) -> Result<OptimizationResult> {
    let config = &evaluator.config;
    let k = config.shells;
    let mut trajectory = Vec::new();
    let mut summaries = Vec::new();
    let mut spent = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let (mu, nu) = if restart == 0 { init.logits(k, &mut rng) } else { Init::Random.logits(k, &mut rng) };
        measures_from_logits(&mu, &nu)?;
        let start: Vec<f64> = mu.into_iter().chain(nu).collect();
        let run = bfgs(evaluator, start, restart, &mut spent, &mut trajectory);
        if best.as_ref().is_none_or(|(_, v)| run.value < *v) {
            best = Some((run.x.clone(), run.value));
        }
        summaries.push(run.summary);
    }
    let (x, _) = best.expect("at least one restart");
    let (best_mu, best_nu) = measures_from_logits(&x[..k], &x[k..])?;
    let best_report = evaluator
        .report(&best_mu, &best_nu)
        .map_err(|e| e.at_stage("final certification"))?;
    Ok(OptimizationResult {
        best_mu,
        best_nu,
        best_report,
        trajectory,
        incomplete: summaries.iter().any(|s| s.stop == StopReason::Budget),
        restarts: summaries,
        used_tensor: evaluator.uses_tensor(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> OptimizerConfig {
        OptimizerConfig {
            shells: 4,
            per_unit: 10,
            radius: 4.0,
            max_evals: 150,
            restarts: 2,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn logits_map_to_probability_measures() {
        let (mu, nu) = measures_from_logits(&[1.0, -2.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert!((nu.delta_weight() - 0.5).abs() < 1e-12);
        assert!(measures_from_logits(&[1.0], &[1.0]).is_err());
        assert!(measures_from_logits(&[0.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
        assert!(measures_from_logits(&[f64::NAN], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ball_preset_is_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (mu, _) = Init::Ball.logits(6, &mut rng);
        let (m, _) = measures_from_logits(&mu, &[1.0; 7]).unwrap();
        let ball = RadialMeasure::ball(6).unwrap();
        for (a, b) in m.weights().iter().zip(ball.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_is_scale_invariant() {
        let config = small_config();
        let evaluator = Evaluator::new(config).unwrap();
        let mu = [0.3, 0.5, 0.9, 1.0];
        let nu = [0.2, 0.1, 0.4, 0.6, 1.0];
        let value = evaluator.objective_from_logits(&mu, &nu).unwrap();
        let doubled: Vec<f64> = mu.iter().map(|v| 2.0 * v).collect();
        let nu2: Vec<f64> = nu.iter().map(|v| 2.0 * v).collect();
        assert!((evaluator.objective_from_logits(&doubled, &nu2).unwrap() - value).abs() < 1e-12);
        let delta_only = evaluator.objective_from_logits(&[1.0; 4], &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(delta_only.is_finite() && delta_only > 0.0);
    }

    #[test]
    fn search_descends_and_is_deterministic() {
        let config = small_config();
        let first = optimize(&config, &Init::Ball).unwrap();
        assert!(first.best_report.feasible);
        for s in &first.restarts {
            assert!(s.final_constant <= s.initial_constant);
        }
        let best = first.restarts.iter().map(|s| s.final_constant).fold(f64::INFINITY, f64::min);
        assert_eq!(first.best_report.constant, best);
        let second = optimize(&config, &Init::Ball).unwrap();
        assert_eq!(first.trajectory, second.trajectory);
        assert!(first.restarts.iter().all(|s| s.evaluations <= config.max_evals));
    }

    #[test]
    fn rejects_bad_config() {
        let mut config = small_config();
        config.fd_step = 0.5;
        assert!(Evaluator::new(config).is_err());
        let config = OptimizerConfig {
            restarts: 0,
            ..small_config()
        };
        assert!(optimize(&config, &Init::Ball).is_err());
    }
}
