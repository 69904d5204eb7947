//! Value function of the adjusted problem, assembled from the PDE solution.
//!
//! On positive stock holdings `V(t, x, y) = y^2 exp(2 w(t, x / y))` with
//! `w_x = 1 / v`; on nonpositive holdings `V = e^{2B(t)} (x + (1 + buy_fee) y)^2`.

use std::sync::Arc;

use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::market::{net_wealth, MarketParams, Position};
use crate::numerics::{bracket, tail_trapezoid};
use crate::obstacle::ObstacleSolution;

fn sell_rate(x: f64, params: &MarketParams) -> f64 {
    let c = params.sell_factor();
    let s2 = params.sigma * params.sigma;
    (params.r * x * x + (params.alpha + params.r) * c * x + (params.alpha + 0.5 * s2) * c * c) / (x + c).powi(2)
}

fn buy_rate(x: Option<f64>, params: &MarketParams) -> f64 {
    let Some(x) = x else { return params.r };
    let c = params.buy_factor();
    let s2 = params.sigma * params.sigma;
    (params.r * x * x + (params.alpha + params.r) * c * x + (params.alpha + 0.5 * s2) * c * c) / (x + c).powi(2)
}

/// `A(t_i)`: integral of the sell-side growth rate from `t_i` to the horizon.
pub fn build_a(bounds: &FreeBoundaries, params: &MarketParams) -> Result<Vec<f64>> {
    let rates: Vec<f64> = bounds.sell().iter().map(|&x| sell_rate(x, params)).collect();
    if let Some(i) = rates.iter().position(|v| !v.is_finite()) {
        return Err(Error::Integrity(format!("sell boundary at the fee singularity, t = {}", bounds.t_nodes()[i])));
    }
    Ok(tail_trapezoid(bounds.t_nodes(), &rates))
}

/// `B(t_i)`: integral of the buy-side growth rate; the rate is `r` once the buy boundary is gone.
pub fn build_b(bounds: &FreeBoundaries, params: &MarketParams) -> Result<Vec<f64>> {
    let rates: Vec<f64> = bounds.buy().iter().map(|&x| buy_rate(x, params)).collect();
    if let Some(i) = rates.iter().position(|v| !v.is_finite()) {
        return Err(Error::Integrity(format!("buy boundary at the fee singularity, t = {}", bounds.t_nodes()[i])));
    }
    Ok(tail_trapezoid(bounds.t_nodes(), &rates))
}

/// `int e^z / (e^z - p) dz` over `[za, zb]` with `p` frozen at the segment mean.
///
/// Exact wherever the excess is constant, which covers both trading regions
/// and the far field.
fn log_segment(za: f64, zb: f64, pa: f64, pb: f64) -> f64 {
    let p = 0.5 * (pa + pb);
    ((zb.exp() - p) / (za.exp() - p)).ln()
}

/// Interpolated value function with its sell/buy coefficient tables.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    sol: Arc<ObstacleSolution>,
    bounds: FreeBoundaries,
    a: Vec<f64>,
    b: Vec<f64>,
    /// Per row: log of the sell edge excess and the edge itself in `z`.
    edge: Vec<(f64, f64)>,
    /// Row-major cumulative integrals from the sell edge to each node right of it.
    cumulative: Vec<f64>,
}

impl ValueFunction {
    pub fn new(sol: Arc<ObstacleSolution>, bounds: FreeBoundaries) -> Result<Self> {
        let params = *sol.params();
        if bounds.t_nodes() != sol.grid().t() {
            return Err(Error::Domain("boundaries and solution use different time grids".into()));
        }
        let a = build_a(&bounds, &params)?;
        let b = build_b(&bounds, &params)?;
        let z = sol.grid().z().to_vec();
        let nz = z.len();
        let lo = params.sell_factor();
        let mut edge = Vec::with_capacity(a.len());
        let mut cumulative = vec![0.0; a.len() * nz];
        for (ti, &xs) in bounds.sell().iter().enumerate() {
            let zs = (-xs).ln();
            let start = (zs.exp() - lo).ln();
            if !start.is_finite() {
                return Err(Error::Integrity(format!("sell edge {xs} not below -(1 - sell_fee)")));
            }
            edge.push((start, zs));
            let row = sol.excess_row(ti);
            let cum = &mut cumulative[ti * nz..(ti + 1) * nz];
            let k = z.partition_point(|&v| v <= zs);
            if k < nz {
                let p_edge = sol.excess_at(ti, zs);
                cum[k] = log_segment(zs, z[k], p_edge, row[k]);
                for j in k + 1..nz {
                    cum[j] = cum[j - 1] + log_segment(z[j - 1], z[j], row[j - 1], row[j]);
                }
            }
        }
        if cumulative.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("value function integral is not finite".into()));
        }
        Ok(Self { sol, bounds, a, b, edge, cumulative })
    }

    pub fn params(&self) -> &MarketParams {
        self.sol.params()
    }

    pub fn boundaries(&self) -> &FreeBoundaries {
        &self.bounds
    }

    pub fn solution(&self) -> &ObstacleSolution {
        &self.sol
    }

    /// Table of `A` on the time nodes.
    pub fn a_table(&self) -> &[f64] {
        &self.a
    }

    /// Table of `B` on the time nodes.
    pub fn b_table(&self) -> &[f64] {
        &self.b
    }

    fn time_weights(&self, t: f64) -> Result<(usize, f64)> {
        let ts = self.bounds.t_nodes();
        let horizon = self.params().horizon;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {horizon}]")));
        }
        let i = bracket(ts, t);
        Ok((i, ((t - ts[i]) / (ts[i + 1] - ts[i])).clamp(0.0, 1.0)))
    }

    fn lerp(table: &[f64], i: usize, th: f64) -> f64 {
        (1.0 - th) * table[i] + th * table[i + 1]
    }

    /// `A(t)`, linear between nodes.
    pub fn a_at(&self, t: f64) -> Result<f64> {
        let (i, th) = self.time_weights(t)?;
        Ok(Self::lerp(&self.a, i, th))
    }

    /// `B(t)`, linear between nodes.
    pub fn b_at(&self, t: f64) -> Result<f64> {
        let (i, th) = self.time_weights(t)?;
        Ok(Self::lerp(&self.b, i, th))
    }

    fn w_row(&self, ti: usize, z: f64) -> f64 {
        let lo = self.params().sell_factor();
        let (start, zs) = self.edge[ti];
        if z <= zs {
            return self.a[ti] + (z.exp() - lo).ln();
        }
        let zg = self.sol.grid().z();
        let nz = zg.len();
        let row = self.sol.excess_row(ti);
        let cum = &self.cumulative[ti * nz..(ti + 1) * nz];
        let base = self.a[ti] + start;
        let z_max = zg[nz - 1];
        if z > z_max {
            let c = self.params().far_field_excess(self.bounds.t_nodes()[ti]);
            return base + cum[nz - 1] + ((z.exp() - c) / (z_max.exp() - c)).ln();
        }
        let p = self.sol.excess_at(ti, z);
        let j = bracket(zg, z);
        if zg[j] <= zs {
            base + log_segment(zs, z, self.sol.excess_at(ti, zs), p)
        } else {
            base + cum[j] + log_segment(zg[j], z, row[j], p)
        }
    }

    /// `w(t, x)` for `x < -(1 - sell_fee)`.
    pub fn eval_w(&self, t: f64, x: f64) -> Result<f64> {
        let lo = self.params().sell_factor();
        if !(x < -lo) {
            return Err(Error::Domain(format!("ratio {x} must be below {}", -lo)));
        }
        let (i, th) = self.time_weights(t)?;
        let z = (-x).ln();
        Ok((1.0 - th) * self.w_row(i, z) + th * self.w_row(i + 1, z))
    }

    /// `V(t, x, y)`; zero on nonnegative net wealth.
    pub fn eval_v(&self, t: f64, pos: Position) -> Result<f64> {
        let params = self.params();
        let (i, th) = self.time_weights(t)?;
        if net_wealth(pos, params) >= 0.0 {
            return Ok(0.0);
        }
        if pos.stock > 0.0 {
            let w = self.eval_w(t, pos.bond / pos.stock)?;
            Ok(pos.stock * pos.stock * (2.0 * w).exp())
        } else {
            let b = Self::lerp(&self.b, i, th);
            Ok((2.0 * b).exp() * (pos.bond + params.buy_factor() * pos.stock).powi(2))
        }
    }

    /// `dV/dx`, nonpositive.
    pub fn eval_vx(&self, t: f64, pos: Position) -> Result<f64> {
        let params = self.params();
        let (i, th) = self.time_weights(t)?;
        if net_wealth(pos, params) >= 0.0 {
            return Ok(0.0);
        }
        if pos.stock > 0.0 {
            let ratio = pos.bond / pos.stock;
            let w = self.eval_w(t, ratio)?;
            let v = self.sol.v_at(t, ratio);
            Ok(2.0 * pos.stock * (2.0 * w).exp() / v)
        } else {
            let b = Self::lerp(&self.b, i, th);
            Ok(2.0 * (2.0 * b).exp() * (pos.bond + params.buy_factor() * pos.stock))
        }
    }
}
