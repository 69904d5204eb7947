//! Time-dependent sell/buy ratio boundaries.

use std::hash::{Hash, Hasher};
use std::io::Write;

use crate::market::MarketParams;
use crate::numerics::bracket;

/// Sell and buy boundaries `x / y` sampled on the time grid.
///
/// `buy[i] == None` encodes a buy boundary at minus infinity. Once the buy
/// boundary vanishes it never returns, and the last node always carries the
/// terminal sell limit `(1 - sell_fee) * merton_ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaries {
    t_nodes: Vec<f64>,
    sell: Vec<f64>,
    buy: Vec<Option<f64>>,
    t0: f64,
}

impl FreeBoundaries {
    /// Wraps sampled boundaries.
    ///
    /// Finite buy samples after the first missing one are dropped, so the
    /// buy region is empty from `t0` on.
    pub fn new(t_nodes: Vec<f64>, sell: Vec<f64>, mut buy: Vec<Option<f64>>) -> Self {
        assert!(t_nodes.len() >= 2, "need at least two time nodes");
        assert!(sell.len() == t_nodes.len() && buy.len() == t_nodes.len());
        let first_gap = buy.iter().position(Option::is_none).unwrap_or(buy.len());
        for b in buy.iter_mut().skip(first_gap) {
            *b = None;
        }
        let t0 = if first_gap >= t_nodes.len() { *t_nodes.last().expect("nonempty") } else { t_nodes[first_gap] };
        Self { t_nodes, sell, buy, t0 }
    }

    /// Time-constant boundaries on `n_nodes` uniform nodes; the terminal node
    /// still carries the terminal sell limit and no buy boundary.
    pub fn constant(params: &MarketParams, sell: f64, buy: Option<f64>, n_nodes: usize) -> Self {
        let n = n_nodes.max(2);
        let t_nodes: Vec<f64> = (0..n).map(|i| params.horizon * i as f64 / (n - 1) as f64).collect();
        let mut s = vec![sell; n];
        s[n - 1] = params.sell_factor() * params.merton_ratio();
        let mut b = vec![buy; n];
        b[n - 1] = None;
        Self::new(t_nodes, s, b)
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn sell(&self) -> &[f64] {
        &self.sell
    }

    pub fn buy(&self) -> &[Option<f64>] {
        &self.buy
    }

    /// First time node from which the buy boundary is absent.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Sell boundary at `t`, linear between nodes, clamped to the grid.
    pub fn sell_at(&self, t: f64) -> f64 {
        let i = bracket(&self.t_nodes, t);
        let th = ((t - self.t_nodes[i]) / (self.t_nodes[i + 1] - self.t_nodes[i])).clamp(0.0, 1.0);
        (1.0 - th) * self.sell[i] + th * self.sell[i + 1]
    }

    /// Buy boundary at `t`, or `None` for minus infinity.
    ///
    /// Linear between finite nodes; on the cell where the boundary escapes,
    /// the reciprocal is interpolated toward zero.
    pub fn buy_at(&self, t: f64) -> Option<f64> {
        if t >= self.t0 {
            return None;
        }
        let i = bracket(&self.t_nodes, t);
        let th = ((t - self.t_nodes[i]) / (self.t_nodes[i + 1] - self.t_nodes[i])).clamp(0.0, 1.0);
        match (self.buy[i], self.buy[i + 1]) {
            (Some(a), Some(b)) => Some((1.0 - th) * a + th * b),
            (Some(a), None) => {
                let inv = (1.0 - th) / a;
                if inv == 0.0 {
                    None
                } else {
                    Some(1.0 / inv)
                }
            }
            _ => None,
        }
    }

    /// Hash of the sampled data, stable within one build.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for v in self.t_nodes.iter().chain(self.sell.iter()) {
            v.to_bits().hash(&mut h);
        }
        for b in &self.buy {
            b.map(f64::to_bits).hash(&mut h);
        }
        h.finish()
    }

    /// Writes `t,x_s_star,x_b_star` rows; an absent buy boundary prints as `-inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x_s_star,x_b_star")?;
        for ((t, s), b) in self.t_nodes.iter().zip(&self.sell).zip(&self.buy) {
            match b {
                Some(b) => writeln!(out, "{t},{s},{b}")?,
                None => writeln!(out, "{t},{s},-inf")?,
            }
        }
        Ok(())
    }
}
