//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classic_bounds::{self, Variant};
use crate::dual_solver::{certify, BoundReport, SolverOptions, StartMode, TailMode};
use crate::error::{Error, Result};
use crate::exchange;
use crate::measures::RadialMeasure;
use crate::optimizer::{self, Init, OptimizerConfig};
use crate::psi::{build_psi_matrix, ExactKernel, ExactMeasure, Grid, Kernel, PsiMatrix, ShellKernel};

#[derive(Debug, Parser)]
#[command(name = "lo-bound", version, about = "Certified upper bounds on the Lieb-Oxford constant")]
pub struct Cli {
    /// Worker threads for matrix construction and optimization.
    #[arg(long, global = true, env = "LO_BOUND_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a bound for one pair of measures.
    Eval(EvalArgs),
    /// Recompute one of the reference tables.
    Reproduce(ReproduceArgs),
    /// Constants of the exchange (negatively correlated) problem.
    Exchange(ExchangeArgs),
    /// The classic majorant route for a single smearing measure.
    Classic(ClassicArgs),
    /// Search for better smearing measures.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailArg {
    Heuristic,
    Rigorous,
}

impl From<TailArg> for TailMode {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::Heuristic => TailMode::Heuristic,
            TailArg::Rigorous => TailMode::Rigorous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartArg {
    G,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Smearing measure: `ball`, `sphere` or a measure file.
    #[arg(long)]
    pub mu: String,
    /// Background measure: `ball`, `sphere`, `delta` or a measure file.
    #[arg(long)]
    pub nu: String,
    /// Shells used for `ball`/`sphere` in the shell expansion.
    #[arg(short = 'K', default_value_t = 10)]
    pub shells: usize,
    #[arg(short = 'M', default_value_t = 100)]
    pub per_unit: usize,
    #[arg(short = 'R', default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = TailArg::Heuristic)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = StartArg::G)]
    pub start: StartArg,
    /// Use the closed-form kernels (sphere/ball against sphere/ball/delta).
    #[arg(long)]
    pub exact_kernel: bool,
    /// Read the kernel matrix from this file if it exists, else write it there.
    /// Only the grid is checked on reuse; keep one file per measure pair.
    #[arg(long)]
    pub psi_cache: Option<PathBuf>,
    /// Write the report (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Small,
    Full,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub table: u8,
    #[arg(long, value_enum, default_value_t = Budget::Small)]
    pub budget: Budget,
    /// Smearing measure file for table 4 (defaults to a fresh optimization).
    #[arg(long, requires = "nu")]
    pub mu: Option<PathBuf>,
    /// Background measure file for table 4.
    #[arg(long, requires = "mu")]
    pub nu: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExchangeArgs {
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// Dump `(a, b(a), g(a))` samples as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassicArgs {
    /// `ball`, `sphere` or a measure file.
    #[arg(long)]
    pub mu: String,
    #[arg(short = 'K', default_value_t = 200)]
    pub shells: usize,
    #[arg(long, default_value = "xi")]
    pub variant: Variant,
    #[arg(long, default_value_t = 20_000)]
    pub points: usize,
    /// Dump `(a, chi, zeta, xi)` as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Ball,
    Sphere,
    Random,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(short = 'K', default_value_t = 20)]
    pub shells: usize,
    #[arg(short = 'M', default_value_t = 100)]
    pub per_unit: usize,
    #[arg(short = 'R', default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_evals: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Memory allowed for the shared sphere tensor, in MiB.
    #[arg(long, default_value_t = 1024)]
    pub tensor_budget_mib: u64,
    #[arg(long, value_enum, default_value_t = TailArg::Heuristic)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = InitArg::Ball)]
    pub init: InitArg,
    /// Report with manifest (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trajectory CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Best smearing measure, in the measure file format.
    #[arg(long)]
    pub mu_out: Option<PathBuf>,
    /// Best background measure, in the measure file format.
    #[arg(long)]
    pub nu_out: Option<PathBuf>,
}

/// Provenance attached to every result file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub wall_time_seconds: f64,
    pub version: String,
}

impl RunManifest {
    fn new(subcommand: &str, parameters: Value, inputs: Vec<PathBuf>, output: Option<PathBuf>, started: Instant) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            parameters,
            inputs,
            output,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn csv_header(&self) -> String {
        format!("# lo-bound {}\n# manifest: {}\n", self.version, serde_json::to_string(self).expect("manifest serializes"))
    }
}

fn write_json(path: &Path, manifest: &RunManifest, body: Value) -> Result<()> {
    let doc = json!({ "manifest": manifest, "result": body });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Exit status of a finished command: `Ok(true)` when a certified bound (or
/// a non-certificate result) was produced.
pub fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot configure {threads} threads: {e}")))?;
    }
    match cli.command {
        Command::Eval(args) => cmd_eval(&args),
        Command::Reproduce(args) => cmd_reproduce(&args).map(|_| true),
        Command::Exchange(args) => cmd_exchange(&args).map(|_| true),
        Command::Classic(args) => cmd_classic(&args).map(|_| true),
        Command::Optimize(args) => cmd_optimize(&args),
    }
}

fn exact_measure(name: &str) -> Option<ExactMeasure> {
    match name {
        "sphere" => Some(ExactMeasure::Sphere),
        "ball" => Some(ExactMeasure::Ball),
        "delta" => Some(ExactMeasure::Delta),
        _ => None,
    }
}

/// Resolves a measure argument on the lattice of `shells` spheres.
fn shell_measure(spec: &str, shells: usize, inputs: &mut Vec<PathBuf>) -> Result<RadialMeasure> {
    if shells == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    match spec {
        "ball" => RadialMeasure::ball(shells),
        "sphere" => {
            let mut masses = vec![0.0; shells];
            masses[shells - 1] = 1.0;
            RadialMeasure::from_unnormalized(0.0, &masses)
        }
        "delta" => RadialMeasure::new(1.0, vec![0.0; shells]),
        path => {
            let path = PathBuf::from(path);
            let m = RadialMeasure::load(&path)?;
            inputs.push(path);
            Ok(m)
        }
    }
}

fn load_or_build_psi(cache: Option<&Path>, grid: Grid, build: impl FnOnce() -> Result<PsiMatrix>) -> Result<PsiMatrix> {
    match cache {
        Some(path) if path.exists() => {
            let psi = PsiMatrix::read_dense(path)?;
            if psi.grid() != grid {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!(
                        "cached matrix uses M={}, R={}, requested M={}, R={}",
                        psi.grid().per_unit(),
                        psi.grid().radius(),
                        grid.per_unit(),
                        grid.radius()
                    ),
                });
            }
            Ok(psi)
        }
        Some(path) => {
            let psi = build()?;
            psi.write_dense(path)?;
            Ok(psi)
        }
        None => build(),
    }
}

fn print_report(label: &str, report: &BoundReport) {
    let kind = match report.tail_mode {
        TailMode::Heuristic => "cutoff-extrapolated",
        TailMode::Rigorous => "fully certified",
    };
    println!("{label}");
    println!("  M = {}, R = {}", report.per_unit, report.radius);
    println!("  I_(R,M)        {:.6}", report.i_value);
    println!("  tail ({})  {:.6}", report.tail_mode, report.tail_value);
    println!("  D(mu,mu)       {:.6}", report.d_self);
    println!("  iterations     {}", report.iterations);
    println!("  feasible       {}", report.feasible);
    println!("  constant       {:.6} ({kind})", report.constant);
    println!("  rigorous tail  {:.6}", report.constant_rigorous);
}

/// Builds and certifies the bound requested by `eval`.
pub fn evaluate(args: &EvalArgs, inputs: &mut Vec<PathBuf>) -> Result<(String, BoundReport)> {
    let grid = Grid::new(args.per_unit, args.radius)?;
    let options = SolverOptions {
        eps: args.eps,
        tail: args.tail.into(),
        start: match args.start {
            StartArg::G => StartMode::G,
            StartArg::Polynomial => StartMode::Polynomial,
        },
        ..SolverOptions::default()
    };
    let cache = args.psi_cache.as_deref();
    if let Some(path) = cache {
        if path.exists() {
            inputs.push(path.to_path_buf());
        }
    }
    let (label, psi, d_self) = if args.exact_kernel {
        let (Some(mu), Some(nu)) = (exact_measure(&args.mu), exact_measure(&args.nu)) else {
            return Err(Error::invalid("--exact-kernel needs --mu sphere|ball and --nu sphere|ball|delta"));
        };
        let kernel = ExactKernel::new(mu, nu)?;
        let psi = load_or_build_psi(cache, grid, || Ok(PsiMatrix::from_kernel(&kernel, grid))).map_err(|e| e.at_stage("kernel"))?;
        (kernel.describe(), psi, kernel.smearing_self_energy())
    } else {
        let mu = shell_measure(&args.mu, args.shells, inputs)?;
        let nu = shell_measure(&args.nu, args.shells, inputs)?;
        let kernel = ShellKernel::new(mu, nu)?;
        let psi = load_or_build_psi(cache, grid, || build_psi_matrix(&kernel, grid, None)).map_err(|e| e.at_stage("kernel"))?;
        (kernel.describe(), psi, kernel.smearing_self_energy())
    };
    let (report, _) = certify(&psi, d_self, &options)?;
    Ok((label, report))
}

fn cmd_eval(args: &EvalArgs) -> Result<bool> {
    let started = Instant::now();
    let mut inputs = Vec::new();
    let (label, report) = evaluate(args, &mut inputs)?;
    print_report(&label, &report);
    if let Some(out) = &args.out {
        let parameters = json!({
            "mu": args.mu, "nu": args.nu, "K": args.shells, "M": args.per_unit, "R": args.radius,
            "eps": args.eps, "tail": args.tail, "start": args.start, "exact_kernel": args.exact_kernel,
            "psi_cache": args.psi_cache,
        });
        let manifest = RunManifest::new("eval", parameters, inputs, Some(out.clone()), started);
        write_json(out, &manifest, json!({ "kernel": label, "report": report }))?;
    }
    Ok(report.feasible)
}

/// One computed table cell next to the reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub row: String,
    pub column: String,
    pub computed: f64,
    pub reference: Option<f64>,
}

impl TableCell {
    pub fn deviation(&self) -> Option<f64> {
        self.reference.map(|p| (self.computed - p).abs())
    }
}

fn exact_constant(mu: ExactMeasure, nu: ExactMeasure, per_unit: usize, radius: f64) -> Result<f64> {
    let kernel = ExactKernel::new(mu, nu)?;
    let grid = Grid::new(per_unit, radius)?;
    let psi = PsiMatrix::from_kernel(&kernel, grid);
    Ok(certify(&psi, kernel.smearing_self_energy(), &SolverOptions::default())?.0.constant)
}

fn shell_constant(mu: &RadialMeasure, nu: &RadialMeasure, per_unit: usize, radius: f64) -> Result<f64> {
    let kernel = ShellKernel::new(mu.clone(), nu.clone())?;
    let grid = Grid::new(per_unit, radius)?;
    let psi = build_psi_matrix(&kernel, grid, None)?;
    Ok(certify(&psi, kernel.smearing_self_energy(), &SolverOptions::default())?.0.constant)
}

const TABLE_RADII: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

/// `(M, [reference value for R = 10, 20, 30, 40])` of the ball/ball table.
const TABLE_2: [(usize, [Option<f64>; 4]); 5] = [
    (100, [Some(1.604358), Some(1.604317), Some(1.604312), Some(1.604311)]),
    (200, [Some(1.604373), Some(1.604334), Some(1.604330), Some(1.604329)]),
    (300, [Some(1.604375), Some(1.604337), Some(1.604334), Some(1.604333)]),
    (500, [Some(1.604377), Some(1.604340), Some(1.604336), None]),
    (1000, [Some(1.604377), Some(1.604340), None, None]),
];

const TABLE_4: [(usize, [Option<f64>; 4]); 4] = [
    (100, [Some(1.576395), Some(1.576364), Some(1.576360), Some(1.576359)]),
    (200, [Some(1.576441), Some(1.576410), Some(1.576406), Some(1.576405)]),
    (300, [Some(1.576446), Some(1.576417), Some(1.576413), None]),
    (400, [Some(1.576446), Some(1.576419), None, None]),
];

/// Computes the cells of a reference table. Cells left blank in the
/// publication are skipped.
pub fn reproduce_table(table: u8, budget: Budget, measures: Option<(RadialMeasure, RadialMeasure)>) -> Result<Vec<TableCell>> {
    use ExactMeasure::*;
    let mut cells = Vec::new();
    match table {
        1 => {
            let reference = [
                (Sphere, Delta, 1.7829),
                (Sphere, Sphere, 1.7019),
                (Sphere, Ball, 1.7172),
                (Ball, Delta, 1.6583),
                (Ball, Sphere, 1.6444),
                (Ball, Ball, 1.6044),
            ];
            let (per_unit, radius) = match budget {
                Budget::Small => (200, 30.0),
                Budget::Full => (500, 30.0),
            };
            for (mu, nu, value) in reference {
                cells.push(TableCell {
                    row: format!("mu={mu}"),
                    column: format!("nu={nu}"),
                    computed: exact_constant(mu, nu, per_unit, radius)?,
                    reference: Some(value),
                });
            }
        }
        2 => {
            for (per_unit, row) in TABLE_2 {
                if budget == Budget::Small && per_unit > 200 {
                    continue;
                }
                for (radius, reference) in TABLE_RADII.iter().zip(row) {
                    let Some(reference) = reference else { continue };
                    cells.push(TableCell {
                        row: format!("M={per_unit}"),
                        column: format!("R={radius}"),
                        computed: exact_constant(Ball, Ball, per_unit, *radius)?,
                        reference: Some(reference),
                    });
                }
            }
        }
        3 => {
            let reference = [(10, 1.606748), (20, 1.604961), (50, 1.604440), (100, 1.604364)];
            for (shells, value) in reference {
                if budget == Budget::Small && shells > 20 {
                    continue;
                }
                let ball = RadialMeasure::ball(shells)?;
                cells.push(TableCell {
                    row: "mu=nu=ball".into(),
                    column: format!("K={shells}"),
                    computed: shell_constant(&ball, &ball, 300, 20.0)?,
                    reference: Some(value),
                });
            }
            cells.push(TableCell {
                row: "mu=nu=ball".into(),
                column: "K=inf".into(),
                computed: exact_constant(Ball, Ball, 300, 20.0)?,
                reference: Some(1.604337),
            });
        }
        4 => {
            let (mu, nu) = match measures {
                Some(pair) => pair,
                None => {
                    let config = match budget {
                        Budget::Small => OptimizerConfig {
                            shells: 20,
                            restarts: 1,
                            max_evals: 1000,
                            ..OptimizerConfig::default()
                        },
                        Budget::Full => OptimizerConfig {
                            shells: 50,
                            restarts: 4,
                            max_evals: 20_000,
                            ..OptimizerConfig::default()
                        },
                    };
                    let result = optimizer::optimize(&config, &Init::Ball)?;
                    (result.best_mu, result.best_nu)
                }
            };
            for (per_unit, row) in TABLE_4 {
                if budget == Budget::Small && per_unit > 100 {
                    continue;
                }
                for (radius, reference) in TABLE_RADII.iter().zip(row) {
                    let Some(reference) = reference else { continue };
                    if budget == Budget::Small && *radius > 20.0 {
                        continue;
                    }
                    cells.push(TableCell {
                        row: format!("M={per_unit}"),
                        column: format!("R={radius}"),
                        computed: shell_constant(&mu, &nu, per_unit, *radius)?,
                        reference: Some(reference),
                    });
                }
            }
        }
        other => return Err(Error::invalid(format!("there is no table {other}"))),
    }
    Ok(cells)
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    let started = Instant::now();
    let mut inputs = Vec::new();
    let measures = match (&args.mu, &args.nu) {
        (Some(mu), Some(nu)) => {
            inputs.push(mu.clone());
            inputs.push(nu.clone());
            Some((RadialMeasure::load(mu)?, RadialMeasure::load(nu)?))
        }
        _ => None,
    };
    let cells = reproduce_table(args.table, args.budget, measures)?;
    let parameters = json!({ "table": args.table, "budget": args.budget });
    let manifest = RunManifest::new("reproduce", parameters, inputs, args.out.clone(), started);
    let mut csv = manifest.csv_header();
    csv.push_str("table,row,column,computed,reference,deviation\n");
    for c in &cells {
        let reference = c.reference.map_or(String::new(), |p| format!("{p:.6}"));
        let deviation = c.deviation().map_or(String::new(), |d| format!("{d:.2e}"));
        csv.push_str(&format!("{},{},{},{:.6},{reference},{deviation}\n", args.table, c.row, c.column, c.computed));
    }
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    let worst = cells.iter().filter_map(TableCell::deviation).fold(0.0, f64::max);
    eprintln!("table {}: {} cells, largest deviation {worst:.2e}", args.table, cells.len());
    Ok(())
}

fn cmd_exchange(args: &ExchangeArgs) -> Result<()> {
    let started = Instant::now();
    let report = exchange::compute_j(args.points)?;
    println!("J                  {:.6}", report.j_value);
    println!("(3/2)(2J)^(1/3)    {:.6}", report.constant_general);
    println!("(3/2)(pi/6)^(1/3)  {:.6}", report.constant_uniform);
    let parameters = json!({ "points": args.points });
    if let Some(path) = &args.curves {
        let manifest = RunManifest::new("exchange", parameters.clone(), vec![], Some(path.clone()), started);
        let mut csv = manifest.csv_header();
        csv.push_str("a,b,g\n");
        for s in exchange::sample_curves(1001) {
            csv.push_str(&format!("{},{},{}\n", s.a, s.b, s.g));
        }
        write_text(path, &csv)?;
    }
    if let Some(out) = &args.out {
        let manifest = RunManifest::new("exchange", parameters, vec![], Some(out.clone()), started);
        write_json(out, &manifest, serde_json::to_value(report).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_classic(args: &ClassicArgs) -> Result<()> {
    let started = Instant::now();
    let mut inputs = Vec::new();
    let mu = shell_measure(&args.mu, args.shells, &mut inputs)?;
    let report = classic_bounds::classic_constant(&mu, args.variant, args.points)?;
    println!("variant    {}", report.variant);
    println!("integral   {:.6}", report.integral);
    println!("D(mu,mu)   {:.6}", report.d_self);
    println!("constant   {:.6}", report.constant);
    let parameters = json!({ "mu": args.mu, "K": args.shells, "variant": args.variant, "points": args.points });
    if let Some(path) = &args.curves {
        let curve = classic_bounds::build_majorants(&mu, args.points)?;
        let manifest = RunManifest::new("classic", parameters.clone(), inputs.clone(), Some(path.clone()), started);
        let mut csv = manifest.csv_header();
        csv.push_str("a,chi,zeta,xi\n");
        for i in 0..curve.a.len() {
            csv.push_str(&format!("{},{},{},{}\n", curve.a[i], curve.chi[i], curve.zeta[i], curve.xi[i]));
        }
        write_text(path, &csv)?;
    }
    if let Some(out) = &args.out {
        let manifest = RunManifest::new("classic", parameters, inputs, Some(out.clone()), started);
        write_json(out, &manifest, serde_json::to_value(report).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<bool> {
    let started = Instant::now();
    let config = OptimizerConfig {
        shells: args.shells,
        per_unit: args.per_unit,
        radius: args.radius,
        eps: args.eps,
        fd_step: args.fd_step,
        max_evals: args.max_evals,
        restarts: args.restarts,
        seed: args.seed,
        tensor_budget_bytes: args.tensor_budget_mib.saturating_mul(1 << 20),
        tail: args.tail.into(),
    };
    let init = match args.init {
        InitArg::Ball => Init::Ball,
        InitArg::Sphere => Init::Sphere,
        InitArg::Random => Init::Random,
    };
    let result = optimizer::optimize(&config, &init)?;
    for s in &result.restarts {
        println!(
            "restart {}: {:.6} -> {:.6} ({} iterations, {} evaluations, {:?})",
            s.restart, s.initial_constant, s.final_constant, s.iterations, s.evaluations, s.stop
        );
    }
    print_report("best measures", &result.best_report);
    if result.incomplete {
        println!("  (evaluation budget exhausted in at least one restart)");
    }
    let parameters = serde_json::to_value(&config).expect("config serializes");
    let parameters = json!({ "config": parameters, "init": args.init });
    if let Some(path) = &args.mu_out {
        result.best_mu.save(path)?;
    }
    if let Some(path) = &args.nu_out {
        result.best_nu.save(path)?;
    }
    if let Some(path) = &args.trajectory {
        let manifest = RunManifest::new("optimize", parameters.clone(), vec![], Some(path.clone()), started);
        let mut csv = manifest.csv_header();
        csv.push_str("evaluation_index,restart,constant\n");
        for p in &result.trajectory {
            csv.push_str(&format!("{},{},{}\n", p.evaluation, p.restart, p.constant));
        }
        write_text(path, &csv)?;
    }
    if let Some(out) = &args.out {
        let manifest = RunManifest::new("optimize", parameters, vec![], Some(out.clone()), started);
        let body = json!({
            "report": result.best_report,
            "restarts": result.restarts,
            "incomplete": result.incomplete,
            "used_tensor": result.used_tensor,
            "mu": result.best_mu.to_spec(),
            "nu": result.best_nu.to_spec(),
        });
        write_json(out, &manifest, body)?;
    }
    std::io::stdout().flush().ok();
    Ok(result.best_report.feasible)
}
