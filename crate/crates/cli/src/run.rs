//! Pipeline orchestration and artifact writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::Serialize;
use tcmv_core::sim::write_trace_csv;
use tcmv_core::{
    feasible_targets, simulate, Error, FeasibilityReport, MeanVarianceSolver, MvSolution, Position, Region,
    SimulationReport, TargetBound, TargetInterval,
};

use crate::config::{FrontierConfig, RunConfig};
use crate::schema;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Infeasible(String),
    Numerical(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
            Failure::Io(e) => write!(f, "output error: {e:#}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) => Failure::Config(e.into()),
            Error::Infeasible { z, interval } => Failure::Infeasible(format!("target {z} outside {interval}")),
            Error::Io(_) => Failure::Io(e.into()),
            _ => Failure::Numerical(e.into()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn io<T>(r: std::io::Result<T>, path: &Path) -> Outcome<T> {
    r.with_context(|| format!("writing {}", path.display())).map_err(Failure::Io)
}

#[derive(Debug, Serialize)]
struct PositionRecord {
    bond_dollars: f64,
    stock_dollars: f64,
}

impl From<Position> for PositionRecord {
    fn from(p: Position) -> Self {
        Self { bond_dollars: p.bond, stock_dollars: p.stock }
    }
}

#[derive(Debug, Serialize)]
struct IntervalRecord {
    kind: &'static str,
    lower_dollars: Option<f64>,
    upper_dollars: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FeasibilityRecord {
    position: PositionRecord,
    critical_horizon_years: f64,
    /// `null` when unbounded.
    z_hat_dollars: Option<f64>,
    feasible_targets: IntervalRecord,
}

impl FeasibilityRecord {
    fn new(initial: Position, report: &FeasibilityReport) -> Self {
        let feasible_targets = match report.interval {
            TargetInterval::Empty => IntervalRecord { kind: "empty", lower_dollars: None, upper_dollars: None },
            TargetInterval::Bounded { lower, upper } => {
                IntervalRecord { kind: "bounded", lower_dollars: Some(lower), upper_dollars: Some(upper) }
            }
            TargetInterval::Unbounded { lower } => {
                IntervalRecord { kind: "unbounded", lower_dollars: Some(lower), upper_dollars: None }
            }
        };
        let z_hat_dollars = match report.z_hat {
            TargetBound::Finite(z) => Some(z),
            TargetBound::Unbounded => None,
        };
        Self {
            position: initial.into(),
            critical_horizon_years: report.critical_horizon,
            z_hat_dollars,
            feasible_targets,
        }
    }
}

#[derive(Debug, Serialize)]
struct SolutionRecord {
    target_dollars: f64,
    stay_put: bool,
    ell_star_dollars: Option<f64>,
    adjusted_position: Option<PositionRecord>,
    initial_region: Option<Region>,
    /// Stock dollars bought at time zero; negative for a sale.
    initial_trade_stock_dollars: f64,
    post_trade_position_adjusted: PositionRecord,
    post_trade_position: PositionRecord,
    variance_dollars_squared: f64,
}

impl SolutionRecord {
    fn new(sol: &MvSolution, solver: &MeanVarianceSolver) -> Self {
        Self {
            target_dollars: sol.z,
            stay_put: sol.stay_put,
            ell_star_dollars: sol.ell_star,
            adjusted_position: sol.adjusted_initial.map(Into::into),
            initial_region: sol.region,
            initial_trade_stock_dollars: sol.initial_trade,
            post_trade_position_adjusted: sol.post_trade.into(),
            post_trade_position: sol.post_trade_actual(solver.params()).into(),
            variance_dollars_squared: sol.variance,
        }
    }
}

#[derive(Debug, Serialize)]
struct McRecord<'a> {
    target_dollars: f64,
    report: &'a SimulationReport,
}

/// Where artifacts go: the flag, then the config, then the environment default.
pub fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig, env_default: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.outputs.directory.clone()).or(env_default).unwrap_or_else(|| PathBuf::from("tcmv-out"))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Outcome<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.into()))?;
    text.push('\n');
    io(fs::write(&path, text), &path)
}

fn write_with<F>(dir: &Path, name: &str, body: F) -> Outcome<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let mut out = BufWriter::new(io(File::create(&path), &path)?);
    io(body(&mut out).and_then(|_| out.flush()), &path)
}

fn build_solver(cfg: &RunConfig) -> Outcome<MeanVarianceSolver> {
    let params = cfg.market_params().map_err(Failure::Config)?;
    let start = Instant::now();
    let solver = MeanVarianceSolver::new(&params, &cfg.solve_config())?;
    let b = solver.boundaries();
    info!(
        "free boundaries in {:.2?}: x_s*(0) = {}, x_b*(0) = {:?}, buy region vanishes at t = {}",
        start.elapsed(),
        b.sell()[0],
        b.buy()[0],
        b.t0()
    );
    Ok(solver)
}

fn write_boundaries(dir: &Path, solver: &MeanVarianceSolver) -> Outcome<()> {
    write_with(dir, "boundaries.csv", |out| solver.boundaries().write_csv(out))
}

fn write_frontier(dir: &Path, solver: &MeanVarianceSolver, initial: Position, zs: &[f64]) -> Outcome<()> {
    let points = solver.frontier(initial, zs);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Io(e.into());
    wtr.write_record(["z", "variance"]).map_err(csv_err)?;
    for pt in points {
        match pt.variance {
            Ok(v) => wtr.write_record([pt.z.to_string(), v.to_string()]).map_err(csv_err)?,
            Err(e) => warn!("frontier point z = {} skipped: {e}", pt.z),
        }
    }
    let bytes = wtr.into_inner().map_err(|e| Failure::Io(anyhow!("{e}")))?;
    let path = dir.join("frontier.csv");
    io(fs::write(&path, bytes), &path)
}

fn prepare(dir: &Path) -> Outcome<()> {
    io(fs::create_dir_all(dir), dir)?;
    write_json(dir, "schema.json", &schema::schema())
}

/// Feasibility, boundaries, one solution per target and the optional extras.
pub fn run_solve(cfg: &RunConfig, dir: &Path) -> Outcome<()> {
    let params = cfg.market_params().map_err(Failure::Config)?;
    let initial = cfg.initial();
    prepare(dir)?;
    let report = feasible_targets(initial, &params);
    write_json(dir, "feasibility.json", &FeasibilityRecord::new(initial, &report))?;
    let bad: Vec<String> =
        cfg.targets_dollars.iter().filter(|z| !report.interval.contains(**z)).map(f64::to_string).collect();
    if !bad.is_empty() {
        return Err(Failure::Infeasible(format!(
            "targets [{}] outside the feasible set {}",
            bad.join(", "),
            report.interval
        )));
    }

    let solver = build_solver(cfg)?;
    write_boundaries(dir, &solver)?;
    if let Some(stride) = cfg.outputs.grid_dump_stride {
        write_with(dir, "grid.csv", |out| solver.value().solution().write_grid_csv(out, stride))?;
    }

    let mut records = Vec::with_capacity(cfg.targets_dollars.len());
    let mut solutions = Vec::with_capacity(cfg.targets_dollars.len());
    for &z in &cfg.targets_dollars {
        let sol = solver.solve(initial, z)?;
        info!("z = {z}: ell* = {:?}, trade = {}, variance = {}", sol.ell_star, sol.initial_trade, sol.variance);
        records.push(SolutionRecord::new(&sol, &solver));
        solutions.push(sol);
    }
    write_json(dir, "solution.json", &records)?;

    if let Some(f) = cfg.frontier {
        write_frontier(dir, &solver, initial, &sweep(&f))?;
    }

    if let Some(sim) = cfg.sim_config() {
        let mut reports = Vec::new();
        for (idx, sol) in solutions.iter().enumerate() {
            let Some(ell) = sol.ell_star else {
                info!("z = {}: stay-put target, nothing to simulate", sol.z);
                continue;
            };
            let start = Instant::now();
            let rep = simulate(sol.post_trade, ell, solver.boundaries(), solver.params(), &sim)?;
            info!(
                "z = {}: {} paths in {:.2?}, mean {} +- {}, variance {}",
                sol.z,
                sim.n_paths,
                start.elapsed(),
                rep.mean_terminal_wealth,
                rep.mean_ci,
                rep.variance_terminal_wealth
            );
            for (k, trace) in rep.traces.iter().enumerate() {
                write_with(dir, &format!("trace_{idx}_{k}.csv"), |out| write_trace_csv(trace, out))?;
            }
            reports.push((sol.z, rep));
        }
        let records: Vec<McRecord> =
            reports.iter().map(|(z, report)| McRecord { target_dollars: *z, report }).collect();
        write_json(dir, "mc_report.json", &records)?;
    }
    Ok(())
}

/// Evenly spaced targets from `z_min_dollars` to `z_max_dollars` inclusive.
fn sweep(f: &FrontierConfig) -> Vec<f64> {
    if f.points == 1 {
        return vec![f.z_min_dollars];
    }
    (0..f.points)
        .map(|i| f.z_min_dollars + (f.z_max_dollars - f.z_min_dollars) * i as f64 / (f.points - 1) as f64)
        .collect()
}

/// Frontier sweep used when the config has none: the feasible set up to
/// `z_hat`, or twice the riskless outcome's distance from zero when unbounded.
fn default_sweep(report: &FeasibilityReport) -> Outcome<Vec<f64>> {
    let (lower, upper) = match report.interval {
        TargetInterval::Empty => {
            return Err(Failure::Infeasible(format!(
                "no target beats the riskless outcome; feasible set {}",
                report.interval
            )))
        }
        TargetInterval::Bounded { lower, upper } => (lower, upper),
        TargetInterval::Unbounded { lower } => (lower, lower + 2.0 * lower.abs().max(1.0)),
    };
    const POINTS: usize = 25;
    Ok((1..=POINTS).map(|i| lower + (upper - lower) * i as f64 / POINTS as f64).collect())
}

/// Boundaries and a frontier sweep for plotting.
pub fn run_plotdata(cfg: &RunConfig, dir: &Path) -> Outcome<()> {
    let params = cfg.market_params().map_err(Failure::Config)?;
    let initial = cfg.initial();
    let report = feasible_targets(initial, &params);
    let zs = match cfg.frontier {
        Some(f) => sweep(&f),
        None => default_sweep(&report)?,
    };
    prepare(dir)?;
    let solver = build_solver(cfg)?;
    write_boundaries(dir, &solver)?;
    write_frontier(dir, &solver, initial, &zs)
}
