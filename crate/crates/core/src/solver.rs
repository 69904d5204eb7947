//! Mean-variance layer: Lagrange multiplier, initial rebalancing, frontier.

use std::sync::Arc;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::market::{classify_region, feasible_targets, MarketParams, Position, Region};
use crate::obstacle::{extract_boundaries, solve_obstacle, GridSpec, PdeGrid, SolverConfig};
use crate::stationary::{solve_k_star, StationaryParams};
use crate::value::ValueFunction;

/// Pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    /// Multiplier tolerance relative to `max(1, |z|)`.
    pub multiplier_tol: f64,
    /// Samples used to confirm the multiplier equation is monotone.
    pub monotonicity_samples: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            multiplier_tol: 1e-10,
            monotonicity_samples: 64,
        }
    }
}

/// One mean-variance problem: initial holdings and expected terminal wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub initial: Position,
    pub z: f64,
}

/// Optimal policy summary for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvSolution {
    pub z: f64,
    /// The target is the maximum attainable mean; never trade.
    pub stay_put: bool,
    /// Lagrange multiplier; absent for the stay-put target.
    pub ell_star: Option<f64>,
    /// Initial holdings with `ell_star e^{-rT}` moved out of the bond.
    pub adjusted_initial: Option<Position>,
    /// Region of the adjusted initial holdings at time zero.
    pub region: Option<Region>,
    /// Holdings right after the time-zero trade, in adjusted coordinates.
    pub post_trade: Position,
    /// Stock bought at time zero; negative for a sale.
    pub initial_trade: f64,
    /// Minimum variance of terminal wealth.
    pub variance: f64,
}

impl MvSolution {
    /// Post-trade holdings in the original bond units.
    pub fn post_trade_actual(&self, params: &MarketParams) -> Position {
        let shift = self.ell_star.map_or(0.0, |l| l * (-params.r * params.horizon).exp());
        Position::new(self.post_trade.bond + shift, self.post_trade.stock)
    }
}

/// Stationary data, free boundaries and value function for one market.
///
/// Built once and shared by every target of the same market.
#[derive(Debug, Clone)]
pub struct MeanVarianceSolver {
    params: MarketParams,
    stationary: StationaryParams,
    value: Arc<ValueFunction>,
    cfg: SolveConfig,
}

impl MeanVarianceSolver {
    /// Runs the stationary root, obstacle solve and value-function assembly.
    pub fn new(params: &MarketParams, cfg: &SolveConfig) -> Result<Self> {
        params.validate()?;
        let stationary = solve_k_star(params)?;
        let grid = PdeGrid::new(params, &stationary, cfg.grid)?;
        let sol = solve_obstacle(params, &stationary, &grid, &cfg.solver)?;
        debug!("obstacle solve: {} Newton iterations", sol.newton_iterations());
        let bounds = extract_boundaries(&sol)?;
        let value = ValueFunction::new(Arc::new(sol), bounds)?;
        Ok(Self { params: *params, stationary, value: Arc::new(value), cfg: *cfg })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn stationary(&self) -> &StationaryParams {
        &self.stationary
    }

    pub fn value(&self) -> &ValueFunction {
        &self.value
    }

    pub fn boundaries(&self) -> &FreeBoundaries {
        self.value.boundaries()
    }

    /// Solves one target against the shared value function.
    pub fn solve(&self, initial: Position, z: f64) -> Result<MvSolution> {
        let params = &self.params;
        let report = feasible_targets(initial, params);
        if !report.interval.contains(z) {
            return Err(Error::Infeasible { z, interval: report.interval });
        }
        if report.interval.is_stay_put(z) {
            return Ok(stay_put(initial, z, params));
        }
        let ell = solve_multiplier(&self.value, initial, z, &self.cfg)?;
        let shift = ell * (-params.r * params.horizon).exp();
        let adjusted = Position::new(initial.bond - shift, initial.stock);
        let (post, trade, region) = initial_trade(0.0, adjusted, self.boundaries(), params)?;
        let v0 = self.value.eval_v(0.0, adjusted)?;
        let variance = v0 - (ell - z).powi(2);
        if variance < -1e-9 * v0.max(1.0) {
            return Err(Error::Integrity(format!("negative variance {variance} at z = {z}")));
        }
        Ok(MvSolution {
            z,
            stay_put: false,
            ell_star: Some(ell),
            adjusted_initial: Some(adjusted),
            region: Some(region),
            post_trade: post,
            initial_trade: trade,
            variance: variance.max(0.0),
        })
    }

    /// Variance for each target; infeasible or failed targets keep their error.
    pub fn frontier(&self, initial: Position, zs: &[f64]) -> Vec<FrontierPoint> {
        zs.par_iter().map(|&z| FrontierPoint { z, variance: self.solve(initial, z).map(|s| s.variance) }).collect()
    }
}

/// Never trading from `initial`; terminal wealth is the liquidated buy-and-hold position.
fn stay_put(initial: Position, z: f64, params: &MarketParams) -> MvSolution {
    let t = params.horizon;
    let spread = params.sell_factor() * initial.stock * (params.alpha * t).exp();
    let variance = spread * spread * ((params.sigma * params.sigma * t).exp() - 1.0);
    MvSolution {
        z,
        stay_put: true,
        ell_star: None,
        adjusted_initial: None,
        region: None,
        post_trade: initial,
        initial_trade: 0.0,
        variance,
    }
}

/// One point of the mean-variance frontier.
#[derive(Debug)]
pub struct FrontierPoint {
    pub z: f64,
    pub variance: Result<f64>,
}

/// Solves `e^{-rT} V_x(0, x - l e^{-rT}, y) + 2 l = 2 z` for `l`.
///
/// The left side is continuous and increasing with value below `2z` at
/// `l = z`; the bracket grows geometrically from there and is refined by
/// bisection. A sampled monotonicity check guards the uniqueness claim.
pub fn solve_multiplier(value: &ValueFunction, initial: Position, z: f64, cfg: &SolveConfig) -> Result<f64> {
    let params = value.params();
    let disc = (-params.r * params.horizon).exp();
    let f = |l: f64| -> Result<f64> {
        let adj = Position::new(initial.bond - l * disc, initial.stock);
        Ok(disc * value.eval_vx(0.0, adj)? + 2.0 * l)
    };
    let goal = 2.0 * z;
    let lo = z;
    if f(lo)? >= goal {
        return Err(Error::Integrity(format!("multiplier equation has no root above z = {z}")));
    }
    let mut step = z.abs().max(1.0);
    let mut hi = lo + step;
    let mut expansions = 0;
    while f(hi)? < goal {
        step *= 2.0;
        hi = lo + step;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::Integrity(format!("no multiplier bracket found for z = {z}")));
        }
    }

    let n = cfg.monotonicity_samples.max(2);
    let samples: Vec<f64> = (0..=n).map(|i| f(lo + (hi - lo) * i as f64 / n as f64)).collect::<Result<Vec<_>>>()?;
    let scale = goal.abs().max(1.0);
    if samples.windows(2).any(|w| w[1] < w[0] - 1e-9 * scale) {
        return Err(Error::Integrity(format!("multiplier equation not monotone for z = {z}")));
    }

    let (mut a, mut b) = (lo, hi);
    let tol = cfg.multiplier_tol * z.abs().max(1.0);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m)? < goal {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Moves `adjusted` onto the closure of the no-trade region at time `t`.
///
/// Returns the new holdings, the stock traded and the starting region.
/// Selling keeps `x + (1 - sell_fee) y`; buying keeps `x + (1 + buy_fee) y`.
pub fn initial_trade(
    t: f64,
    adjusted: Position,
    bounds: &FreeBoundaries,
    params: &MarketParams,
) -> Result<(Position, f64, Region)> {
    let region = classify_region(t, adjusted, bounds, params)?;
    let post = match region {
        Region::NoTrade => adjusted,
        Region::Sell => {
            let xs = bounds.sell_at(t);
            let y = (adjusted.bond + params.sell_factor() * adjusted.stock) / (xs + params.sell_factor());
            Position::new(xs * y, y)
        }
        Region::Buy => {
            let xb = bounds
                .buy_at(t)
                .ok_or_else(|| Error::Domain(format!("no buy boundary at t = {t} for holdings {adjusted:?}")))?;
            let y = (adjusted.bond + params.buy_factor() * adjusted.stock) / (xb + params.buy_factor());
            Position::new(xb * y, y)
        }
        Region::Solvent => {
            return Err(Error::Integrity("adjusted holdings already cover the target".into()));
        }
    };
    Ok((post, post.stock - adjusted.stock, region))
}

/// Full pipeline for one target; feasibility is checked before any PDE work.
pub fn solve(spec: &TargetSpec, params: &MarketParams, cfg: &SolveConfig) -> Result<MvSolution> {
    params.validate()?;
    let report = feasible_targets(spec.initial, params);
    if !report.interval.contains(spec.z) {
        return Err(Error::Infeasible { z: spec.z, interval: report.interval });
    }
    if report.interval.is_stay_put(spec.z) {
        return Ok(stay_put(spec.initial, spec.z, params));
    }
    MeanVarianceSolver::new(params, cfg)?.solve(spec.initial, spec.z)
}

/// Frontier over `zs` from a single PDE solve.
pub fn efficient_frontier(
    initial: Position,
    zs: &[f64],
    params: &MarketParams,
    cfg: &SolveConfig,
) -> Result<Vec<FrontierPoint>> {
    Ok(MeanVarianceSolver::new(params, cfg)?.frontier(initial, zs))
}
