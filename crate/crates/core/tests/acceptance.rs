//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use lo_bound::classic_bounds::{classic_constant, Variant};
use lo_bound::dual_solver::{
    assemble_constant, certify, g_vector, iterate_to_fixed_point, lp_oracle, objective, psi_transform, verify_feasible,
    BoundVector, SolverOptions,
};
use lo_bound::exchange::{compute_j, g_exchange, theta};
use lo_bound::measures::RadialMeasure;
use lo_bound::optimizer::{optimize, Init, OptimizerConfig};
use lo_bound::psi::{
    psi_ball_ball, psi_general, psi_quadrature_oracle, psi_sphere_sphere, ExactKernel, ExactMeasure, Grid, Kernel,
    OracleMeasure, PsiMatrix, ShellKernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Check>);

fn within(name: &str, value: f64, target: f64, tol: f64) -> Check {
    let line = format!("{name} = {value:.7} (target {target}, tol {tol:e})");
    if (value - target).abs() <= tol {
        Ok(line)
    } else {
        Err(line)
    }
}

fn all(checks: Vec<Check>) -> Check {
    let failed: Vec<String> = checks.iter().filter_map(|c| c.as_ref().err().cloned()).collect();
    let text: Vec<String> = checks.into_iter().map(|c| c.unwrap_or_else(|e| e)).collect();
    if failed.is_empty() {
        Ok(text.join("; "))
    } else {
        Err(format!("failed: {}", failed.join("; ")))
    }
}

fn exact(mu: ExactMeasure, nu: ExactMeasure, per_unit: usize, radius: f64) -> f64 {
    let kernel = ExactKernel::new(mu, nu).unwrap();
    let psi = PsiMatrix::from_kernel(&kernel, Grid::new(per_unit, radius).unwrap());
    let (report, vector) = certify(&psi, kernel.smearing_self_energy(), &SolverOptions::default()).unwrap();
    assert!(report.feasible && verify_feasible(&psi, &vector));
    report.constant
}

fn kernel_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sphere = RadialMeasure::sphere();
    let mut worst_general = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let diff = (psi_general(&sphere, &sphere, a, b).unwrap() - psi_sphere_sphere(a, b)).abs();
        worst_general = worst_general.max(diff);
    }
    let sigma = OracleMeasure::Shells(sphere);
    let mut worst_oracle = 0.0f64;
    for _ in 0..50 {
        let (a, b) = (rng.gen_range(0.05..2.5), rng.gen_range(0.05..2.5));
        let s = psi_quadrature_oracle(&sigma, &sigma, a, b).map_err(|e| e.to_string())?;
        let bb = psi_quadrature_oracle(&OracleMeasure::UniformBall, &OracleMeasure::UniformBall, a, b).map_err(|e| e.to_string())?;
        worst_oracle = worst_oracle.max((s - psi_sphere_sphere(a, b)).abs()).max((bb - psi_ball_ball(a, b)).abs());
    }
    let line = format!("shell expansion max error {worst_general:.1e}, oracle max error {worst_oracle:.1e}");
    if worst_general <= 1e-12 && worst_oracle <= 1e-5 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn table_one() -> Check {
    use ExactMeasure::*;
    let cells = [
        (Sphere, Delta, 1.7829),
        (Sphere, Sphere, 1.7019),
        (Sphere, Ball, 1.7172),
        (Ball, Delta, 1.6583),
        (Ball, Sphere, 1.6444),
        (Ball, Ball, 1.6044),
    ];
    all(cells
        .iter()
        .map(|&(mu, nu, target)| within(&format!("{mu}/{nu}"), exact(mu, nu, 500, 30.0), target, 5e-4))
        .collect())
}

fn table_three() -> Check {
    all([(10, 1.606748), (20, 1.604961)]
        .iter()
        .map(|&(k, target)| {
            let ball = RadialMeasure::ball(k).unwrap();
            let kernel = ShellKernel::new(ball.clone(), ball).unwrap();
            let psi = PsiMatrix::from_kernel(&kernel, Grid::new(300, 20.0).unwrap());
            let (report, _) = certify(&psi, kernel.smearing_self_energy(), &SolverOptions::default()).unwrap();
            within(&format!("K={k}"), report.constant, target, 2e-4)
        })
        .collect())
}

fn exchange_constants() -> Check {
    let r = compute_j(400).map_err(|e| e.to_string())?;
    all(vec![
        within("J", r.j_value, 0.2887, 1e-4),
        within("general", r.constant_general, 1.2490, 1e-3),
        within("uniform", r.constant_uniform, 1.2090, 1e-4),
    ])
}

fn property_suite() -> Check {
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // soundness and descent on several kernels, from both starting points
    let shells = ShellKernel::new(
        RadialMeasure::from_unnormalized(0.0, &[0.1, 0.3, 0.2, 0.4]).unwrap(),
        RadialMeasure::from_unnormalized(0.2, &[0.3, 0.0, 0.1, 0.4]).unwrap(),
    )
    .unwrap();
    let kernels: Vec<Box<dyn Kernel>> = vec![
        Box::new(ExactKernel::new(ExactMeasure::Sphere, ExactMeasure::Sphere).unwrap()),
        Box::new(ExactKernel::new(ExactMeasure::Ball, ExactMeasure::Delta).unwrap()),
        Box::new(ExactKernel::new(ExactMeasure::Sphere, ExactMeasure::Ball).unwrap()),
        Box::new(shells),
    ];
    for kernel in &kernels {
        let grid = Grid::new(40, 10.0).unwrap();
        let psi = PsiMatrix::from_kernel(kernel.as_ref(), grid);
        let g = g_vector(&psi);
        for start in [g.clone(), BoundVector::polynomial_majorant(grid)] {
            let fixed = iterate_to_fixed_point(&psi, start, 1e-9, 10_000).map_err(|e| e.to_string())?;
            if !verify_feasible(&psi, &fixed.vector) {
                return Err(format!("{}: iterate is not a certificate", kernel.describe()));
            }
            if fixed.objectives.windows(2).any(|w| w[1] > w[0]) {
                return Err(format!("{}: objective increased", kernel.describe()));
            }
            // fixed point dominated by G beyond r = 2
            for m in 80..grid.len() {
                if fixed.vector.values()[m] > g.values()[m] * (1.0 + 1e-6) + 1e-12 {
                    return Err(format!("{}: F_{m} exceeds G_{m}", kernel.describe()));
                }
            }
        }
    }
    notes.push("certificates, descent, F <= G beyond 2".to_string());

    // antitone transform on random ordered pairs
    let psi = PsiMatrix::from_kernel(&ExactKernel::new(ExactMeasure::Ball, ExactMeasure::Ball).unwrap(), Grid::new(20, 5.0).unwrap());
    for _ in 0..50 {
        let mut low = vec![0.0];
        let mut high = vec![0.0];
        for _ in 1..psi.len() {
            let v: f64 = rng.gen_range(0.0..0.3);
            low.push(v);
            high.push(v + rng.gen_range(0.0..0.1));
        }
        let tl = psi_transform(&psi, &BoundVector::new(psi.grid(), low).unwrap()).unwrap();
        let th = psi_transform(&psi, &BoundVector::new(psi.grid(), high).unwrap()).unwrap();
        if tl.values().iter().zip(th.values()).any(|(a, b)| a < b) {
            return Err("psi-transform is not antitone".into());
        }
    }
    notes.push("antitone".into());

    // LP sandwich on small grids
    let mut worst_ratio = 0.0f64;
    for (mu, nu, per_unit, radius) in [
        (ExactMeasure::Sphere, ExactMeasure::Sphere, 4, 5.0),
        (ExactMeasure::Ball, ExactMeasure::Ball, 4, 10.0),
        (ExactMeasure::Ball, ExactMeasure::Delta, 5, 8.0),
        (ExactMeasure::Sphere, ExactMeasure::Delta, 8, 5.0),
    ] {
        let psi = PsiMatrix::from_kernel(&ExactKernel::new(mu, nu).unwrap(), Grid::new(per_unit, radius).unwrap());
        let lp = lp_oracle(&psi).map_err(|e| e.to_string())?;
        let fixed = iterate_to_fixed_point(&psi, g_vector(&psi), 1e-10, 10_000).unwrap();
        let value = objective(&fixed.vector);
        if lp > value * (1.0 + 1e-9) || value > 1.05 * lp {
            return Err(format!("LP sandwich violated for {mu}/{nu}: lp {lp}, iterate {value}"));
        }
        worst_ratio = worst_ratio.max(value / lp - 1.0);
    }
    notes.push(format!("LP gap <= {:.2}%", 100.0 * worst_ratio));

    // exchange majorant: fixed point and feasibility
    let mut residual = 0.0f64;
    for i in 0..=1000 {
        let a = i as f64 / 1000.0;
        let best = (0..=4000)
            .map(|k| {
                let b = a * k as f64 / 4000.0;
                theta(a, b) - g_exchange(b)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        // grid maximum can only fall short of the true maximum
        residual = residual.max(best - g_exchange(a));
    }
    if residual > 1e-8 {
        return Err(format!("g_exchange fixed-point residual {residual:e}"));
    }
    let n = 500;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            if theta(a, b) > g_exchange(a) + g_exchange(b) + 1e-15 {
                return Err(format!("Theta({a}, {b}) exceeds g(a) + g(b)"));
            }
        }
    }
    notes.push(format!("exchange residual {residual:.1e}, Theta-feasible on 500x500"));
    Ok(notes.join("; "))
}

fn optimization() -> Check {
    let config = OptimizerConfig {
        shells: 20,
        per_unit: 100,
        radius: 10.0,
        restarts: 4,
        max_evals: 1200,
        seed: 7,
        ..OptimizerConfig::default()
    };
    let result = optimize(&config, &Init::Ball).map_err(|e| e.to_string())?;
    let starts: Vec<String> = result
        .restarts
        .iter()
        .map(|s| format!("{:.4}->{:.4}", s.initial_constant, s.final_constant))
        .collect();
    let line = format!(
        "best {:.6} (restarts {}), feasible {}",
        result.best_report.constant,
        starts.join(", "),
        result.best_report.feasible
    );
    if result.best_report.feasible && result.best_report.constant <= 1.60 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("kernel exactness", Box::new(kernel_exactness)),
        (
            "ball/ball M=100 R=10",
            Box::new(|| within("constant", exact(ExactMeasure::Ball, ExactMeasure::Ball, 100, 10.0), 1.604358, 5e-5)),
        ),
        (
            "ball/ball M=500 R=30",
            Box::new(|| within("constant", exact(ExactMeasure::Ball, ExactMeasure::Ball, 500, 30.0), 1.604336, 1e-5)),
        ),
        ("sphere/ball table M=500 R=30", Box::new(table_one)),
        ("ball as K spheres, M=300 R=20", Box::new(table_three)),
        ("exchange constants", Box::new(exchange_constants)),
        (
            "elementary bound",
            Box::new(|| within("constant", assemble_constant(2f64.cbrt() * 12.0 * std::f64::consts::PI, 0.5), 4.3117, 1e-4)),
        ),
        (
            "classic bound, ball K=200",
            Box::new(|| {
                let ball = RadialMeasure::ball(200).unwrap();
                let r = classic_constant(&ball, Variant::Xi, 20_000).map_err(|e| e.to_string())?;
                within("xi constant", r.constant, 1.68, 1e-2)
            }),
        ),
        ("property suite", Box::new(property_suite)),
        ("optimization K=20 M=100 R=10", Box::new(optimization)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{elapsed:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{elapsed:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
