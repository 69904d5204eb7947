//! Finite-horizon double-obstacle problem for the ratio value `v(t, x)`.
//!
//! The solver works in `z = ln(-x)` on the excess `p = v - x`, which turns
//! both obstacles into constants `1 - sell_fee <= p <= 1 + buy_fee` and keeps
//! the large linear part of `v` out of the nonlinear term. Time steps are
//! backward Euler; the obstacles are enforced by a penalty with Newton
//! iterations on a tridiagonal Jacobian.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::numerics::{bracket, isotonic_nonincreasing, solve_tridiagonal};
use crate::stationary::StationaryParams;

/// Node counts and truncation of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of `z` intervals.
    pub n_z: usize,
    /// Number of time steps.
    pub n_t: usize,
    /// `e^{z_max} = z_max_factor * |x_b_inf|`.
    pub z_max_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_z: 800, n_t: 2000, z_max_factor: 500.0 }
    }
}

/// Penalty and Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Penalty weight; `None` means `1e6 / dt`.
    pub penalty: Option<f64>,
    /// Stop when the sup-norm Newton update falls below this, or when the
    /// update stalls below a tenth of the contact slack `10 / penalty`.
    pub newton_tol: f64,
    /// Newton iteration cap per time step.
    pub newton_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { penalty: None, newton_tol: 1e-11, newton_max: 50 }
    }
}

/// Uniform grid in `z = ln(-x)` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    z: Vec<f64>,
    t: Vec<f64>,
}

impl PdeGrid {
    /// Left edge at the stationary sell ratio, right edge at `z_max_factor * |x_b_inf|`.
    pub fn new(params: &MarketParams, stationary: &StationaryParams, spec: GridSpec) -> Result<Self> {
        if spec.n_z < 8 || spec.n_t < 2 {
            return Err(Error::InvalidParams(format!("grid too coarse: n_z = {}, n_t = {}", spec.n_z, spec.n_t)));
        }
        if !(spec.z_max_factor > 1.0) {
            return Err(Error::InvalidParams(format!("z_max_factor {} must exceed 1", spec.z_max_factor)));
        }
        let z_min = (-stationary.x_s_inf).ln();
        let z_max = (spec.z_max_factor * stationary.x_b_inf.abs()).ln();
        Ok(Self::from_edges(z_min, z_max, spec.n_z, params.horizon, spec.n_t))
    }

    /// Uniform grid on `[z_min, z_max] x [0, horizon]`.
    pub fn from_edges(z_min: f64, z_max: f64, n_z: usize, horizon: f64, n_t: usize) -> Self {
        let dz = (z_max - z_min) / n_z as f64;
        let mut z: Vec<f64> = (0..=n_z).map(|i| z_min + i as f64 * dz).collect();
        z[0] = z_min;
        z[n_z] = z_max;
        let t = (0..=n_t).map(|j| horizon * j as f64 / n_t as f64).collect();
        Self { z, t }
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn dz(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        *self.z.last().expect("nonempty grid")
    }
}

/// Discrete operator on the excess `p` at interior nodes.
///
/// `out[i-1]` holds the value at node `i`.
fn excess_operator(p: &[f64], z: &[f64], params: &MarketParams, out: &mut [f64]) {
    let dz = z[1] - z[0];
    let s2 = params.sigma * params.sigma;
    let drift = params.excess_drift() + 0.5 * s2;
    let growth = params.excess_drift() + s2;
    for i in 1..p.len() - 1 {
        let pz = (p[i + 1] - p[i - 1]) / (2.0 * dz);
        let pzz = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (dz * dz);
        let em = (-z[i]).exp();
        let den = 1.0 - p[i] * em;
        out[i - 1] = 0.5 * s2 * pzz - drift * pz + growth * p[i] - s2 * (p[i] - pz * pz * em) / den;
    }
}

/// Applies the log-ratio operator to a row `u(z) = v(-e^z)`.
///
/// Central second-order differences; returns the interior values. Every
/// `u` must be strictly negative.
pub fn spatial_operator(u: &[f64], z: &[f64], params: &MarketParams) -> Result<Vec<f64>> {
    if u.len() != z.len() || u.len() < 3 {
        return Err(Error::Domain("row and grid lengths differ or fewer than 3 nodes".into()));
    }
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, &v)| v >= -1e-12 || !v.is_finite()) {
        return Err(Error::Singularity { node, value });
    }
    let p: Vec<f64> = u.iter().zip(z).map(|(u, z)| u + z.exp()).collect();
    let mut out = vec![0.0; u.len() - 2];
    excess_operator(&p, z, params, &mut out);
    Ok(out)
}

/// Penalized solution on the full space-time grid.
#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    params: MarketParams,
    stationary: StationaryParams,
    grid: PdeGrid,
    penalty: f64,
    /// Row-major excess, one row per time node.
    excess: Vec<f64>,
    newton_iterations: usize,
}

impl ObstacleSolution {
    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn stationary(&self) -> &StationaryParams {
        &self.stationary
    }

    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Total Newton iterations over all time steps.
    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    /// Excess `p = v - x` at time node `ti`.
    pub fn excess_row(&self, ti: usize) -> &[f64] {
        let n = self.grid.z.len();
        &self.excess[ti * n..(ti + 1) * n]
    }

    /// `u = v(t, -e^z)` at time node `ti`.
    pub fn u_row(&self, ti: usize) -> Vec<f64> {
        self.excess_row(ti).iter().zip(&self.grid.z).map(|(p, z)| p - z.exp()).collect()
    }

    /// Excess at time node `ti` and log-ratio `z`, linear in `z`.
    ///
    /// Left of the grid the sell obstacle holds; right of it the far-field excess.
    pub fn excess_at(&self, ti: usize, z: f64) -> f64 {
        let zs = &self.grid.z;
        if z <= zs[0] {
            return self.params.sell_factor();
        }
        if z >= *zs.last().expect("nonempty grid") {
            return self.params.far_field_excess(self.grid.t[ti]);
        }
        let row = self.excess_row(ti);
        let j = bracket(zs, z);
        let th = (z - zs[j]) / (zs[j + 1] - zs[j]);
        (1.0 - th) * row[j] + th * row[j + 1]
    }

    /// Ratio value `v(t, x)` for `x < -(1 - sell_fee)`, linear in `z` and `t`.
    pub fn v_at(&self, t: f64, x: f64) -> f64 {
        let z = (-x).ln();
        let ts = &self.grid.t;
        let i = bracket(ts, t);
        let th = ((t - ts[i]) / (ts[i + 1] - ts[i])).clamp(0.0, 1.0);
        x + (1.0 - th) * self.excess_at(i, z) + th * self.excess_at(i + 1, z)
    }

    /// Writes `t,z,u` rows for every `stride`-th node in each direction.
    pub fn write_grid_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        writeln!(out, "t,z,u")?;
        for ti in (0..self.grid.t.len()).step_by(stride) {
            let t = self.grid.t[ti];
            let row = self.excess_row(ti);
            for zi in (0..self.grid.z.len()).step_by(stride) {
                let z = self.grid.z[zi];
                writeln!(out, "{t},{z},{}", row[zi] - z.exp())?;
            }
        }
        Ok(())
    }
}

/// Marches the penalized problem backward from the terminal condition.
///
/// Left edge: sell obstacle. Right edge: the far-field excess
/// `min((1 - sell_fee) e^{(alpha - r)(T - t)}, 1 + buy_fee)`.
pub fn solve_obstacle(
    params: &MarketParams,
    stationary: &StationaryParams,
    grid: &PdeGrid,
    cfg: &SolverConfig,
) -> Result<ObstacleSolution> {
    params.validate()?;
    let nz = grid.z.len();
    let nt = grid.t.len() - 1;
    let m = nz - 2;
    let dz = grid.dz();
    let dt = grid.dt();
    let penalty = cfg.penalty.unwrap_or(1e6 / dt);
    if !(penalty > 0.0) {
        return Err(Error::InvalidParams(format!("penalty {penalty} must be positive")));
    }
    let lo = params.sell_factor();
    let up = params.buy_factor();
    let slack = 10.0 / penalty;
    let s2 = params.sigma * params.sigma;
    let drift = params.excess_drift() + 0.5 * s2;
    let growth = params.excess_drift() + s2;
    let em: Vec<f64> = grid.z.iter().map(|z| (-z).exp()).collect();

    let mut excess = vec![0.0; (nt + 1) * nz];
    excess[nt * nz..].fill(lo);

    let mut op = vec![0.0; m];
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut total_iters = 0;

    for n in (0..nt).rev() {
        let t = grid.t[n];
        let (head, tail) = excess.split_at_mut((n + 1) * nz);
        let old = &tail[..nz];
        let cur = &mut head[n * nz..];
        cur.copy_from_slice(old);
        cur[0] = lo;
        cur[nz - 1] = params.far_field_excess(t);

        let mut converged = false;
        let mut last_update = f64::INFINITY;
        let mut prev_update;
        for it in 0..cfg.newton_max {
            prev_update = last_update;
            excess_operator(cur, &grid.z, params, &mut op);
            for k in 0..m {
                let i = k + 1;
                let p = cur[i];
                let pz = (cur[i + 1] - cur[i - 1]) / (2.0 * dz);
                let den = 1.0 - p * em[i];
                let d_pz = -drift + s2 * 2.0 * pz * em[i] / den;
                let d_p = growth - s2 * (den + (p - pz * pz * em[i]) * em[i]) / (den * den);
                let mut res = (p - old[i]) / dt - op[k];
                let mut d = 1.0 / dt + s2 / (dz * dz) - d_p;
                if p > up {
                    res += penalty * (p - up);
                    d += penalty;
                }
                if p < lo {
                    res -= penalty * (lo - p);
                    d += penalty;
                }
                sub[k] = -(0.5 * s2 / (dz * dz) - d_pz / (2.0 * dz));
                sup[k] = -(0.5 * s2 / (dz * dz) + d_pz / (2.0 * dz));
                diag[k] = d;
                rhs[k] = -res;
            }
            solve_tridiagonal(&sub, &diag, &sup, &mut rhs)
                .ok_or_else(|| Error::Integrity(format!("singular Newton system at t = {t}")))?;
            last_update = 0.0;
            for k in 0..m {
                cur[k + 1] += rhs[k];
                last_update = f64::max(last_update, rhs[k].abs());
            }
            if !last_update.is_finite() {
                break;
            }
            // A node sitting on the penalty kink can flip sides forever; once the
            // flips are far below the contact slack they change nothing downstream.
            let stalled = last_update >= 0.5 * prev_update && last_update < 0.1 * slack;
            if last_update < cfg.newton_tol || stalled {
                total_iters += it + 1;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonDivergence { t, iterations: cfg.newton_max, update: last_update });
        }
        let mut violation: f64 = 0.0;
        for (i, &p) in cur.iter().enumerate() {
            violation = violation.max(lo - p).max(p - up);
            if p - grid.z[i].exp() >= -1e-12 {
                return Err(Error::Singularity { node: i, value: p - grid.z[i].exp() });
            }
        }
        if violation > slack {
            return Err(Error::ObstacleViolation { t, violation });
        }
    }

    Ok(ObstacleSolution {
        params: *params,
        stationary: *stationary,
        grid: grid.clone(),
        penalty,
        excess,
        newton_iterations: total_iters,
    })
}

/// Gap above which penalty noise no longer distorts `sqrt(gap)`, in contact tolerances.
const CLEAN_GAP: f64 = 100.0;

/// Zero of the quadratic through `(0, s0), (1, s1), (2, s2)` nearest the
/// secant zero of the first two points, in cell units.
fn sqrt_gap_root(s0: f64, s1: f64, s2: f64) -> Option<f64> {
    if s1 <= s0 {
        return None;
    }
    let linear = -s0 / (s1 - s0);
    let b = -1.5 * s0 + 2.0 * s1 - 0.5 * s2;
    let c = 0.5 * s0 - s1 + 0.5 * s2;
    if c.abs() < 1e-14 * b.abs() {
        return Some(linear);
    }
    let disc = b * b - 4.0 * c * s0;
    if disc < 0.0 {
        return Some(linear);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / c, s0 / q];
    roots.into_iter().filter(|r| r.is_finite()).min_by(|a, b| (a - linear).abs().total_cmp(&(b - linear).abs()))
}

/// Sell-side contact edge on one row, as a log-ratio.
///
/// The gap to the obstacle grows quadratically off the contact set, so
/// `sqrt(gap)` is extrapolated from the first three nodes whose gap is well
/// above the contact tolerance. The edge stays between one cell inside the
/// contact set and the first free node.
fn sell_edge(row: &[f64], z: &[f64], lo: f64, tol: f64) -> Option<f64> {
    let dz = z[1] - z[0];
    let i = row.iter().position(|&p| p - lo > tol)?;
    let k = (i..row.len()).find(|&k| row[k] - lo > CLEAN_GAP * tol)?;
    if k + 2 >= row.len() {
        return None;
    }
    let s = |m: usize| (row[m] - lo).sqrt();
    let edge = match sqrt_gap_root(s(k), s(k + 1), s(k + 2)) {
        Some(r) => z[k] + r * dz,
        None => {
            let prev = (row[i - 1] - lo).max(0.0);
            z[i - 1] + dz * (tol - prev) / (row[i] - lo - prev)
        }
    };
    Some(edge.clamp(z[i.saturating_sub(2)], z[i]))
}

/// Buy-side contact edge on one row, or `None` without interior contact.
fn buy_edge(row: &[f64], z: &[f64], up: f64, tol: f64) -> Option<f64> {
    let dz = z[1] - z[0];
    let n = row.len();
    let j = (1..n - 1).find(|&j| up - row[j] < tol)?;
    let Some(k) = (2..j).rev().find(|&k| up - row[k] > CLEAN_GAP * tol) else {
        return Some(z[j]);
    };
    let s = |m: usize| (up - row[m]).max(0.0).sqrt();
    let edge = match sqrt_gap_root(s(k), s(k - 1), s(k - 2)) {
        Some(r) => z[k] - r * dz,
        None => {
            let next = (up - row[j]).max(0.0);
            z[j - 1] + dz * (up - row[j - 1] - tol) / (up - row[j - 1] - next)
        }
    };
    Some(edge.clamp(z[j - 1], z[(j + 1).min(n - 1)]))
}

/// Unprojected contact edges in `z`, one per time row before the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactEdges {
    pub sell: Vec<f64>,
    /// `None` once the upper obstacle is no longer touched.
    pub buy: Vec<Option<f64>>,
}

/// Locates the contact edges of every time row before the horizon.
///
/// Contact means within `10 / penalty` of an obstacle.
pub fn contact_edges(sol: &ObstacleSolution) -> Result<ContactEdges> {
    let grid = &sol.grid;
    let nt = grid.t.len() - 1;
    let tol = 10.0 / sol.penalty;
    let lo = sol.params.sell_factor();
    let up = sol.params.buy_factor();
    let mut sell = Vec::with_capacity(nt);
    let mut buy = Vec::with_capacity(nt);
    for ti in 0..nt {
        let row = sol.excess_row(ti);
        let zs = sell_edge(row, &grid.z, lo, tol)
            .ok_or_else(|| Error::Integrity(format!("no sell boundary found at t = {}", grid.t[ti])))?;
        sell.push(zs);
        buy.push(buy_edge(row, &grid.z, up, tol));
    }
    Ok(ContactEdges { sell, buy })
}

/// Reads the sell and buy ratios off the contact sets of every time row.
///
/// The edges are projected onto nonincreasing ratios by isotonic regression;
/// grid locking leaves sub-cell jitter of either sign. Corrections larger
/// than one cell are logged. The terminal node gets the limit
/// `(1 - sell_fee) * merton_ratio`.
pub fn extract_boundaries(sol: &ObstacleSolution) -> Result<FreeBoundaries> {
    let params = &sol.params;
    let grid = &sol.grid;
    let nt = grid.t.len() - 1;
    let edges = contact_edges(sol)?;
    let dz = grid.dz();

    // In z the sell edge must be nondecreasing in t; flip signs for the nonincreasing fit.
    let flipped: Vec<f64> = edges.sell.iter().map(|z| -z).collect();
    let repaired = repair("sell", &flipped, dz, &grid.t);
    let mut sell: Vec<f64> = repaired.iter().map(|z| -(-z).exp()).collect();
    sell.push(params.sell_factor() * params.merton_ratio());

    let finite = edges.buy.iter().take_while(|b| b.is_some()).count();
    if edges.buy[finite..].iter().any(Option::is_some) {
        warn!("buy contact reappears after it vanished; later samples dropped");
    }
    let prefix: Vec<f64> = edges.buy[..finite].iter().map(|b| -b.expect("finite prefix")).collect();
    let repaired = repair("buy", &prefix, dz, &grid.t);
    let mut buy: Vec<Option<f64>> = repaired.iter().map(|z| Some(-(-z).exp())).collect();
    buy.resize(nt + 1, None);

    Ok(FreeBoundaries::new(grid.t.clone(), sell, buy))
}

/// Isotonic projection of a sequence that should be nonincreasing.
fn repair(name: &str, values: &[f64], cell: f64, t: &[f64]) -> Vec<f64> {
    let worst =
        values
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[1] - w[0]))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if worst.1 > cell {
        warn!(
            "{name} boundary not monotone in time (jump of {:.3} cells near t = {}); isotonic repair applied",
            worst.1 / cell,
            t[worst.0]
        );
    }
    isotonic_nonincreasing(values)
}
