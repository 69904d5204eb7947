//! Monte Carlo of the optimal policy as a reflected diffusion.
//!
//! Each step lets holdings evolve freely, then projects them back onto the
//! no-trade region along the fee-adjusted trade directions. Cumulative stock
//! bought and sold are tracked per path.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::market::{classify_region, net_wealth, MarketParams, Position, Region};

/// Largest tolerated fraction of discarded (non-finite) paths.
const MAX_DISCARD_FRACTION: f64 = 1e-3;
/// Relative distance to a boundary still counted as on it.
const ON_BOUNDARY_RTOL: f64 = 1e-9;

/// State of one path: time, bond and stock dollars, cumulative purchases and sales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Cumulative stock bought.
    pub bought: f64,
    /// Cumulative stock sold.
    pub sold: f64,
}

/// Gaussian sampler for the Brownian increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMethod {
    #[default]
    Ziggurat,
    InverseCdf,
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub normal: NormalMethod,
    /// Number of leading paths whose trajectories are kept.
    #[serde(default)]
    pub trace_paths: usize,
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEvents {
    pub sold: f64,
    pub bought: f64,
    /// Both projections fired in the same step.
    pub corner: bool,
    /// Negative stock holdings were bought back.
    pub short_cover: bool,
    /// Nonnegative net wealth; everything moved to the bond.
    pub liquidated: bool,
    /// Largest relative change of the conserved liquidation value across projections.
    pub conservation_error: f64,
}

fn relative_change(before: f64, after: f64, scale: f64) -> f64 {
    (after - before).abs() / scale.max(1.0)
}

/// Advances one path by `dt` with Brownian increment `db`, then projects at the new time.
///
/// No projection happens at the horizon itself. Sell projections run before
/// buy projections.
pub fn step(
    state: PathState,
    dt: f64,
    db: f64,
    bounds: &FreeBoundaries,
    params: &MarketParams,
) -> Result<(PathState, StepEvents)> {
    let t = state.t + dt;
    let mut s = PathState {
        t,
        x: state.x * (1.0 + params.r * dt),
        y: state.y * (1.0 + params.alpha * dt + params.sigma * db),
        ..state
    };
    let mut ev = StepEvents::default();
    if t >= params.horizon * (1.0 - 1e-12) {
        s.t = params.horizon;
        return Ok((s, ev));
    }
    let pos = Position::new(s.x, s.y);
    let scale = s.x.abs() + s.y.abs();
    match classify_region(t, pos, bounds, params)? {
        Region::NoTrade => {}
        Region::Solvent => {
            if s.y > 0.0 {
                ev.sold = s.y;
            } else {
                ev.bought = -s.y;
            }
            s.x = net_wealth(pos, params);
            s.y = 0.0;
            ev.liquidated = true;
        }
        Region::Sell => {
            let before = s.x + params.sell_factor() * s.y;
            let xs = bounds.sell_at(t);
            let n = (xs * s.y - s.x) / (xs + params.sell_factor());
            s.x += params.sell_factor() * n;
            s.y -= n;
            ev.sold = n;
            ev.conservation_error = relative_change(before, s.x + params.sell_factor() * s.y, scale);
            if let Some(xb) = bounds.buy_at(t) {
                if s.x <= xb * s.y {
                    ev.corner = true;
                    let before = s.x + params.buy_factor() * s.y;
                    let m = (s.x - xb * s.y) / (xb + params.buy_factor());
                    s.x -= params.buy_factor() * m;
                    s.y += m;
                    ev.bought = m;
                    ev.conservation_error =
                        ev.conservation_error.max(relative_change(before, s.x + params.buy_factor() * s.y, scale));
                }
            }
        }
        Region::Buy => {
            let before = s.x + params.buy_factor() * s.y;
            match bounds.buy_at(t) {
                Some(xb) => {
                    let m = (s.x - xb * s.y) / (xb + params.buy_factor());
                    s.x -= params.buy_factor() * m;
                    s.y += m;
                    ev.bought = m;
                }
                None => {
                    // Short stock with the buy region gone: cover to zero.
                    ev.bought = -s.y;
                    s.x += params.buy_factor() * s.y;
                    s.y = 0.0;
                }
            }
            ev.short_cover = pos.stock <= 0.0;
            ev.conservation_error = relative_change(before, s.x + params.buy_factor() * s.y, scale);
        }
    }
    s.bought += ev.bought;
    s.sold += ev.sold;
    Ok((s, ev))
}

/// Aggregated Monte Carlo statistics; intervals are 95% normal half-widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub n_paths: usize,
    pub n_steps: usize,
    pub n_discarded: usize,
    pub mean_terminal_wealth: f64,
    pub mean_ci: f64,
    pub variance_terminal_wealth: f64,
    pub variance_ci: f64,
    pub mean_bought: f64,
    pub mean_sold: f64,
    /// Average fraction of steps ending with a sale.
    pub fraction_steps_selling: f64,
    /// Average fraction of steps ending with a purchase.
    pub fraction_steps_buying: f64,
    /// Purchases recorded at or after the time the buy region vanishes.
    pub buys_after_t0: usize,
    pub corner_events: usize,
    pub short_covers: usize,
    pub liquidations: usize,
    pub max_conservation_error: f64,
    #[serde(skip)]
    pub traces: Vec<Vec<PathState>>,
}

#[derive(Debug, Default)]
struct PathOutcome {
    wealth: f64,
    bought: f64,
    sold: f64,
    selling_steps: usize,
    buying_steps: usize,
    buys_after_t0: usize,
    corners: usize,
    short_covers: usize,
    liquidations: usize,
    conservation: f64,
    trace: Option<Vec<PathState>>,
}

fn check_start(start: Position, bounds: &FreeBoundaries, params: &MarketParams) -> Result<()> {
    let ok = match classify_region(0.0, start, bounds, params)? {
        Region::NoTrade => true,
        Region::Sell => {
            (start.bond - bounds.sell_at(0.0) * start.stock).abs() <= ON_BOUNDARY_RTOL * start.bond.abs().max(1.0)
        }
        Region::Buy => bounds
            .buy_at(0.0)
            .is_some_and(|xb| (start.bond - xb * start.stock).abs() <= ON_BOUNDARY_RTOL * start.bond.abs().max(1.0)),
        Region::Solvent => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("start {start:?} is not in the closed no-trade region")))
    }
}

/// Simulates `cfg.n_paths` paths from the post-trade holdings (adjusted coordinates).
///
/// Terminal wealth is the liquidation value plus `ell_star`. Path `i` draws
/// from its own ChaCha stream, so results do not depend on thread count.
pub fn simulate(
    start: Position,
    ell_star: f64,
    bounds: &FreeBoundaries,
    params: &MarketParams,
    cfg: &SimConfig,
) -> Result<SimulationReport> {
    if cfg.n_paths < 2 || cfg.n_steps == 0 {
        return Err(Error::InvalidParams("need at least 2 paths and 1 step".into()));
    }
    check_start(start, bounds, params)?;
    let dt = params.horizon / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let inverse = Normal::new(0.0, 1.0).expect("standard normal");
    let t0 = bounds.t0();

    let run = |path: usize| -> Result<PathOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path as u64);
        let mut state = PathState { t: 0.0, x: start.bond, y: start.stock, bought: 0.0, sold: 0.0 };
        let mut out = PathOutcome::default();
        let mut trace = (path < cfg.trace_paths).then(|| vec![state]);
        for k in 0..cfg.n_steps {
            let normal: f64 = match cfg.normal {
                NormalMethod::Ziggurat => rng.sample(StandardNormal),
                NormalMethod::InverseCdf => inverse.inverse_cdf(rng.gen_range(f64::EPSILON..1.0)),
            };
            state.t = k as f64 * dt;
            let (next, ev) = step(state, dt, normal * sqrt_dt, bounds, params)?;
            state = next;
            if ev.sold > 0.0 {
                out.selling_steps += 1;
            }
            if ev.bought > 0.0 {
                out.buying_steps += 1;
                if state.t >= t0 {
                    out.buys_after_t0 += 1;
                }
            }
            out.corners += usize::from(ev.corner);
            out.short_covers += usize::from(ev.short_cover);
            out.liquidations += usize::from(ev.liquidated);
            out.conservation = out.conservation.max(ev.conservation_error);
            if let Some(tr) = trace.as_mut() {
                tr.push(state);
            }
        }
        out.wealth = net_wealth(Position::new(state.x, state.y), params) + ell_star;
        out.bought = state.bought;
        out.sold = state.sold;
        out.trace = trace;
        Ok(out)
    };
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths).into_par_iter().map(run).collect::<Result<_>>()?;

    let (kept, discarded): (Vec<PathOutcome>, Vec<PathOutcome>) =
        outcomes.into_iter().partition(|o| o.wealth.is_finite() && o.bought.is_finite() && o.sold.is_finite());
    let n_discarded = discarded.len();
    if n_discarded as f64 > MAX_DISCARD_FRACTION * cfg.n_paths as f64 || kept.len() < 2 {
        return Err(Error::Integrity(format!("{n_discarded} of {} paths produced non-finite values", cfg.n_paths)));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().map(|o| o.wealth).sum::<f64>() / n;
    let m2 = kept.iter().map(|o| (o.wealth - mean).powi(2)).sum::<f64>();
    let m4 = kept.iter().map(|o| (o.wealth - mean).powi(4)).sum::<f64>() / n;
    let var = m2 / (n - 1.0);
    let z95 = 1.959_963_984_540_054;
    let steps = cfg.n_steps as f64;
    Ok(SimulationReport {
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        n_discarded,
        mean_terminal_wealth: mean,
        mean_ci: z95 * (var / n).sqrt(),
        variance_terminal_wealth: var,
        variance_ci: z95 * ((m4 - var * var).max(0.0) / n).sqrt(),
        mean_bought: kept.iter().map(|o| o.bought).sum::<f64>() / n,
        mean_sold: kept.iter().map(|o| o.sold).sum::<f64>() / n,
        fraction_steps_selling: kept.iter().map(|o| o.selling_steps as f64 / steps).sum::<f64>() / n,
        fraction_steps_buying: kept.iter().map(|o| o.buying_steps as f64 / steps).sum::<f64>() / n,
        buys_after_t0: kept.iter().map(|o| o.buys_after_t0).sum(),
        corner_events: kept.iter().map(|o| o.corners).sum(),
        short_covers: kept.iter().map(|o| o.short_covers).sum(),
        liquidations: kept.iter().map(|o| o.liquidations).sum(),
        max_conservation_error: kept.iter().map(|o| o.conservation).fold(0.0, f64::max),
        traces: kept.into_iter().filter_map(|o| o.trace).collect(),
    })
}

/// Writes one trajectory as `t,X,Y,M,N` with `M` bought and `N` sold.
pub fn write_trace_csv<W: Write>(trace: &[PathState], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,X,Y,M,N")?;
    for s in trace {
        writeln!(out, "{},{},{},{},{}", s.t, s.x, s.y, s.bought, s.sold)?;
    }
    Ok(())
}
