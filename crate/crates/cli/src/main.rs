//! `funkgeo`: geodesics on weakly deformed spheres from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use funk_geodesics::averaged::{geodesic_reduced_surface, integrate_averaged};
use funk_geodesics::dynamics::{default_stride, integrate_trajectory_with_stride, ParticleState};
use funk_geodesics::funk::{run_identity_checks, QuadratureRule, DEFAULT_NODES};
use funk_geodesics::harness::{
    compare_full_vs_averaged, epsilon_convergence_study, generic_start, DEFAULT_DT_AVG,
    DEFAULT_DT_FULL, GENERIC_V0, GENERIC_X0,
};
use funk_geodesics::portrait::{
    emit_portrait, evenly_spaced_levels, extract_contours, find_critical_points, refine_contours,
    sample_grid, CriticalKind, PortraitFormat, DEFAULT_RESOLUTION,
};
use funk_geodesics::surface::SurfaceConfig;
use nalgebra::Vector3;

use config::RunConfig;

const DEFAULT_T_END: f64 = 100.0;
const DEFAULT_LEVELS: usize = 12;
const DEFAULT_HORIZON: f64 = 2.0;
const DEFAULT_SEED: u64 = 1;

const DEFAULTS: &str = "\
Defaults (config keys in parentheses; flags override the config):
  --dt          1e-3     full-dynamics step (dt)
  --dt-avg      1e-2     reduced-flow step (dt_avg)
  --t-end       100      integration horizon (t_end)
  --nodes       64       quadrature nodes per great circle (n_nodes)
  --resolution  181,360  portrait grid, colatitude x longitude (resolution)
  --levels      12       portrait contour levels (n_levels, or explicit `levels`)
  --threads     1        worker threads for sweeps
  horizon       2        convergence study runs to t_end = horizon / epsilon

Config: {\"epsilon\": 0.05, \"psi\": {\"terms\": [[2,0,0,1.0],[0,0,2,-1.0]]}}
    or: {\"epsilon\": 0.05, \"psi_preset\": {\"name\": \"ellipsoid\", \"params\": [1,2,3]}}
Optional keys: start_x, start_v, l0, eps_list, horizon, levels, n_levels, stride.

Exit codes: 0 success, 1 check or integration failure, 2 usage or config error.";

#[derive(Parser)]
#[command(name = "funkgeo", version, about = "Geodesics on weakly deformed spheres and their averaged flow", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full geodesic dynamics; writes a trajectory CSV.
    #[command(after_help = DEFAULTS)]
    Simulate(SimulateArgs),
    /// Integrate the averaged momentum flow; writes a reduced-path CSV.
    #[command(after_help = DEFAULTS)]
    Average(AverageArgs),
    /// Sample the reduced Hamiltonian; writes critical points and contours.
    #[command(after_help = DEFAULTS)]
    Portrait(PortraitArgs),
    /// Compare full and averaged dynamics; writes a JSON report.
    #[command(after_help = DEFAULTS)]
    Compare(CompareArgs),
    /// Run the Funk transform identity checks and print a table.
    #[command(name = "funk-test", after_help = DEFAULTS)]
    FunkTest(FunkTestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = positive_f64)]
    t_end: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    dt: Option<f64>,
    /// Store every N-th step (default: about 256 rows per time unit).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    stride: Option<u64>,
}

#[derive(Args)]
struct AverageArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = positive_f64)]
    t_end: Option<f64>,
    /// Reduced-flow step.
    #[arg(long, value_parser = positive_f64)]
    dt: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    nodes: Option<u64>,
    /// Use strength epsilon/2, the averaged model of geodesics on the configured surface.
    #[arg(long)]
    geodesic: bool,
}

#[derive(Args)]
struct PortraitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// svg, csv or json (default: from the --out extension, else json).
    #[arg(long)]
    format: Option<String>,
    /// Grid size as T,P.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<(usize, usize)>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    nodes: Option<u64>,
    /// Number of evenly spaced contour levels.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    levels: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    /// Use strength epsilon/2, the averaged model of geodesics on the configured surface.
    #[arg(long)]
    geodesic: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// json, or csv for the summary table of a convergence study.
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_parser = positive_f64)]
    t_end: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    dt: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    dt_avg: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    nodes: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
}

#[derive(Args)]
struct FunkTestArgs {
    /// Optional configuration; only `n_nodes` is read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    nodes: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (t, p) = s.split_once(',').ok_or_else(|| format!("expected T,P, got {s}"))?;
    let t = t.trim().parse().map_err(|e| format!("{e}"))?;
    let p = p.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((t, p))
}

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn run_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(e.into())
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))
                .map_err(usage)?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn load(path: &Path) -> Result<(RunConfig, SurfaceConfig), Failure> {
    RunConfig::load(path).map_err(usage)
}

fn rule(nodes: Option<u64>, config: Option<&RunConfig>) -> Result<QuadratureRule, Failure> {
    let n = nodes
        .map(|n| n as usize)
        .or(config.and_then(|c| c.n_nodes))
        .unwrap_or(DEFAULT_NODES);
    QuadratureRule::new(n).map_err(usage)
}

fn set_threads(n: u64) -> CmdResult {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n as usize)
        .build_global()
        .map_err(|e| usage(anyhow!("cannot start thread pool: {e}")))
}

fn start_state(config: &RunConfig, surface: &SurfaceConfig) -> Result<ParticleState, Failure> {
    match (config.start_x, config.start_v) {
        (Some(x), Some(v)) => ParticleState::prepare(x.into(), v.into(), surface).map_err(usage),
        (None, None) => generic_start(surface).map_err(run_err),
        _ => Err(usage(anyhow!("give both `start_x` and `start_v`, or neither"))),
    }
}

fn finish(mut out: Box<dyn Write>) -> CmdResult {
    out.flush().map_err(run_err)
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let (config, surface) = load(&args.config)?;
    let start = start_state(&config, &surface)?;
    let t_end = args.t_end.or(config.t_end).unwrap_or(DEFAULT_T_END);
    let dt = args.dt.or(config.dt).unwrap_or(DEFAULT_DT_FULL);
    let stride = args
        .stride
        .map(|s| s as usize)
        .or(config.stride)
        .unwrap_or_else(|| default_stride(dt));
    let mut out = open_out(&args.out)?;
    let traj = integrate_trajectory_with_stride(&start, &surface, t_end, dt, stride).map_err(run_err)?;
    log::info!("integrated {} stored states to t = {t_end}", traj.len());
    traj.write_csv(&mut out).map_err(run_err)?;
    finish(out)
}

fn average(args: AverageArgs) -> CmdResult {
    let (config, surface) = load(&args.config)?;
    let model = if args.geodesic { geodesic_reduced_surface(&surface) } else { surface.clone() };
    let rule = rule(args.nodes, Some(&config))?;
    let l0: Vector3<f64> = match config.l0 {
        Some(l) => l.into(),
        None => start_state(&config, &surface)?.angular_momentum(),
    };
    let t_end = args.t_end.or(config.t_end).unwrap_or(DEFAULT_T_END);
    let dt = args.dt.or(config.dt_avg).unwrap_or(DEFAULT_DT_AVG);
    let mut out = open_out(&args.out)?;
    let path = integrate_averaged(&l0, &model, t_end, dt, &rule).map_err(run_err)?;
    log::info!("max |H - H0| = {:e}", path.max_energy_drift());
    path.write_csv(&mut out).map_err(run_err)?;
    finish(out)
}

fn format_from(format: &Option<String>, out: &Option<PathBuf>) -> Result<PortraitFormat, Failure> {
    let name = match (format, out) {
        (Some(f), _) => f.clone(),
        (None, Some(path)) => path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("json")
            .to_string(),
        (None, None) => "json".into(),
    };
    name.parse().map_err(usage)
}

fn portrait(args: PortraitArgs) -> CmdResult {
    set_threads(args.threads)?;
    let (config, surface) = load(&args.config)?;
    let model = if args.geodesic { geodesic_reduced_surface(&surface) } else { surface.clone() };
    let rule = rule(args.nodes, Some(&config))?;
    let format = format_from(&args.format, &args.out)?;
    let resolution = args
        .resolution
        .or(config.resolution.map(|[t, p]| (t, p)))
        .unwrap_or(DEFAULT_RESOLUTION);

    let grid = sample_grid(&model, resolution, &rule).map_err(usage)?;
    let critical = find_critical_points(&grid).map_err(run_err)?;
    let mut levels = match &config.levels {
        Some(levels) => levels.clone(),
        None => {
            let n = args.levels.map(|n| n as usize).or(config.n_levels).unwrap_or(DEFAULT_LEVELS);
            evenly_spaced_levels(&grid, n)
        }
    };
    if config.levels.is_none() {
        for p in critical.points.iter().filter(|p| p.kind == CriticalKind::Saddle) {
            if !levels.iter().any(|l| (l - p.value).abs() <= 1e-12 * p.value.abs().max(1e-300)) {
                levels.push(p.value);
            }
        }
        levels.sort_by(f64::total_cmp);
    }
    let contours = refine_contours(&grid, &extract_contours(&grid, &levels)).map_err(run_err)?;

    log::info!(
        "{} maxima, {} minima, {} saddles, {} degenerate; Euler count {}",
        critical.count(CriticalKind::Maximum),
        critical.count(CriticalKind::Minimum),
        critical.count(CriticalKind::Saddle),
        critical.degenerate.len(),
        critical.euler_characteristic()
    );
    if critical.flat {
        log::warn!("Hamiltonian is constant on the sphere; portrait is not Morse");
    } else if !critical.is_morse() {
        log::warn!("portrait is not Morse: degenerate critical points or Euler count != 2");
    }
    let mut out = open_out(&args.out)?;
    emit_portrait(&grid, &contours, &critical.points, format, &mut out).map_err(run_err)?;
    finish(out)
}

fn compare(args: CompareArgs) -> CmdResult {
    set_threads(args.threads)?;
    let (config, surface) = load(&args.config)?;
    let rule = rule(args.nodes, Some(&config))?;
    let dt = args.dt.or(config.dt).unwrap_or(DEFAULT_DT_FULL);
    let dt_avg = args.dt_avg.or(config.dt_avg).unwrap_or(DEFAULT_DT_AVG);
    let csv = match args.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(usage(anyhow!("unsupported compare format `{other}` (expected json or csv)"))),
    };

    if let Some(eps_list) = &config.eps_list {
        let x0 = config.start_x.unwrap_or(GENERIC_X0).into();
        let v0 = config.start_v.unwrap_or(GENERIC_V0).into();
        let c = config.horizon.unwrap_or(DEFAULT_HORIZON);
        let study = epsilon_convergence_study(surface.psi(), x0, v0, c, eps_list, dt, dt_avg, &rule)
            .map_err(run_err)?;
        for row in &study.rows {
            log::info!("epsilon {}: max direction error {:e}", row.epsilon, row.max_direction_error);
        }
        let mut out = open_out(&args.out)?;
        if csv {
            study.write_csv(&mut out).map_err(run_err)?;
        } else {
            serde_json::to_writer_pretty(&mut out, &study).map_err(run_err)?;
            writeln!(out).map_err(run_err)?;
        }
        return finish(out);
    }

    if csv {
        return Err(usage(anyhow!("csv output needs `eps_list` in the config")));
    }
    let start = start_state(&config, &surface)?;
    let t_end = args.t_end.or(config.t_end).unwrap_or(DEFAULT_T_END);
    let mut out = open_out(&args.out)?;
    let report = compare_full_vs_averaged(&surface, &start, t_end, dt, dt_avg, &rule).map_err(run_err)?;
    log::info!("max direction error {:e}", report.max_direction_error);
    writeln!(out, "{}", report.to_json_string()).map_err(run_err)?;
    finish(out)
}

fn funk_test(args: FunkTestArgs) -> CmdResult {
    let config = match &args.config {
        Some(path) => Some(load(path)?.0),
        None => None,
    };
    let rule = rule(args.nodes, config.as_ref())?;
    let checks = run_identity_checks(&rule, args.seed).map_err(run_err)?;
    let mut out = open_out(&args.out)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let table = (|| -> io::Result<()> {
        writeln!(out, "{:<width$}  {:>12}  {:>10}  result", "check", "discrepancy", "tolerance")?;
        for c in &checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{:<width$}  {:>12.3e}  {:>10.1e}  {verdict}", c.name, c.discrepancy, c.tolerance)?;
        }
        Ok(())
    })();
    table.map_err(run_err)?;
    finish(out)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(run_err(anyhow!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Average(a) => average(a),
        Command::Portrait(a) => portrait(a),
        Command::Compare(a) => compare(a),
        Command::FunkTest(a) => funk_test(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
