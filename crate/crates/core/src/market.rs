//! Market parameters, positions and the closed-form feasibility results.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};

/// Coefficients of the bond/stock market with proportional fees.
///
/// Rates are per year, `sigma` per square-root year, fees are fractions of
/// the traded dollar amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Risk-free rate.
    pub r: f64,
    /// Stock drift.
    pub alpha: f64,
    /// Stock volatility.
    pub sigma: f64,
    /// Fee paid on purchases.
    pub buy_fee: f64,
    /// Fee paid on sales.
    pub sell_fee: f64,
    /// Investment horizon in years.
    pub horizon: f64,
}

impl MarketParams {
    /// Builds validated parameters.
    pub fn new(r: f64, alpha: f64, sigma: f64, buy_fee: f64, sell_fee: f64, horizon: f64) -> Result<Self> {
        let p = Self { r, alpha, sigma, buy_fee, sell_fee, horizon };
        p.validate()?;
        Ok(p)
    }

    /// Checks `alpha > r`, `sigma > 0`, `horizon > 0`, `buy_fee + sell_fee > 0`
    /// and `sell_fee < 1`.
    pub fn validate(&self) -> Result<()> {
        let all = [self.r, self.alpha, self.sigma, self.buy_fee, self.sell_fee, self.horizon];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all market parameters must be finite".into()));
        }
        if self.alpha <= self.r {
            return Err(Error::InvalidParams(format!(
                "stock drift {} must exceed the risk-free rate {}",
                self.alpha, self.r
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!("volatility {} must be positive", self.sigma)));
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidParams(format!("horizon {} must be positive", self.horizon)));
        }
        if self.buy_fee < 0.0 || self.sell_fee < 0.0 {
            return Err(Error::InvalidParams("fees must be nonnegative".into()));
        }
        if self.buy_fee + self.sell_fee <= 0.0 {
            return Err(Error::InvalidParams("at least one fee must be positive".into()));
        }
        if self.sell_fee >= 1.0 {
            return Err(Error::InvalidParams(format!("sell fee {} must be below 1", self.sell_fee)));
        }
        Ok(())
    }

    /// Excess drift `alpha - r`.
    pub fn excess_drift(&self) -> f64 {
        self.alpha - self.r
    }

    /// Proceeds per dollar of stock sold, `1 - sell_fee`.
    pub fn sell_factor(&self) -> f64 {
        1.0 - self.sell_fee
    }

    /// Cost per dollar of stock bought, `1 + buy_fee`.
    pub fn buy_factor(&self) -> f64 {
        1.0 + self.buy_fee
    }

    /// Ratio `(1 + buy_fee) / (1 - sell_fee)`.
    pub fn fee_ratio(&self) -> f64 {
        self.buy_factor() / self.sell_factor()
    }

    /// Ratio `x / y` that maximizes the frictionless driver, `-(alpha - r + sigma^2) / (alpha - r)`.
    pub fn merton_ratio(&self) -> f64 {
        -(self.excess_drift() + self.sigma * self.sigma) / self.excess_drift()
    }

    /// Time after which buying is never optimal, `max(horizon - critical_horizon, 0)`.
    pub fn buy_vanish_time(&self) -> f64 {
        (self.horizon - critical_horizon(self)).max(0.0)
    }

    /// Growth of the stock-side excess `(1 - sell_fee) e^{(alpha - r) tau}` capped at `1 + buy_fee`.
    pub fn far_field_excess(&self, t: f64) -> f64 {
        (self.sell_factor() * (self.excess_drift() * (self.horizon - t)).exp()).min(self.buy_factor())
    }
}

/// Dollar holdings: `bond` in the bank account, `stock` in the risky asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub bond: f64,
    pub stock: f64,
}

impl Position {
    pub fn new(bond: f64, stock: f64) -> Self {
        Self { bond, stock }
    }
}

/// Liquidation value `x + (1 - sell_fee) y^+ - (1 + buy_fee) y^-`.
pub fn net_wealth(p: Position, params: &MarketParams) -> f64 {
    if p.stock >= 0.0 {
        p.bond + params.sell_factor() * p.stock
    } else {
        p.bond + params.buy_factor() * p.stock
    }
}

/// Horizon beyond which any target is reachable, `ln(fee_ratio) / (alpha - r)`.
///
/// Returns 0 when both fees vanish.
pub fn critical_horizon(params: &MarketParams) -> f64 {
    params.fee_ratio().ln() / params.excess_drift()
}

/// A wealth level that may be unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TargetBound {
    Finite(f64),
    Unbounded,
}

impl TargetBound {
    pub fn as_f64(&self) -> f64 {
        match *self {
            TargetBound::Finite(v) => v,
            TargetBound::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for TargetBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetBound::Finite(v) => write!(f, "{v}"),
            TargetBound::Unbounded => write!(f, "+inf"),
        }
    }
}

/// Supremum of expected terminal wealth over admissible strategies.
///
/// A horizon equal to the critical horizon counts as short.
pub fn z_hat(p: Position, params: &MarketParams) -> TargetBound {
    let t = params.horizon;
    if t > critical_horizon(params) {
        return TargetBound::Unbounded;
    }
    let growth = (params.r * t).exp();
    if p.stock > 0.0 {
        TargetBound::Finite(growth * p.bond + params.sell_factor() * (params.alpha * t).exp() * p.stock)
    } else {
        TargetBound::Finite(growth * (p.bond + params.buy_factor() * p.stock))
    }
}

/// Set of targets strictly above the riskless outcome that some strategy attains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetInterval {
    /// No target beats liquidating into the bond.
    Empty,
    /// `(lower, upper]`; `upper` is reached only by never trading.
    Bounded { lower: f64, upper: f64 },
    /// `(lower, +inf)`.
    Unbounded { lower: f64 },
}

/// Relative tolerance for recognizing the stay-put target.
pub const STAY_PUT_RTOL: f64 = 1e-12;

impl TargetInterval {
    pub fn contains(&self, z: f64) -> bool {
        match *self {
            TargetInterval::Empty => false,
            TargetInterval::Bounded { lower, upper } => z > lower && (z <= upper || self.is_stay_put(z)),
            TargetInterval::Unbounded { lower } => z > lower && z.is_finite(),
        }
    }

    /// True when `z` is the closed top end of a bounded interval.
    pub fn is_stay_put(&self, z: f64) -> bool {
        match *self {
            TargetInterval::Bounded { upper, .. } => (z - upper).abs() <= STAY_PUT_RTOL * upper.abs().max(1.0),
            _ => false,
        }
    }

    pub fn lower(&self) -> Option<f64> {
        match *self {
            TargetInterval::Empty => None,
            TargetInterval::Bounded { lower, .. } | TargetInterval::Unbounded { lower } => Some(lower),
        }
    }
}

impl fmt::Display for TargetInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetInterval::Empty => write!(f, "empty"),
            TargetInterval::Bounded { lower, upper } => write!(f, "({lower}, {upper}]"),
            TargetInterval::Unbounded { lower } => write!(f, "({lower}, +inf)"),
        }
    }
}

/// Closed-form feasibility data for one initial position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub critical_horizon: f64,
    pub z_hat: TargetBound,
    pub interval: TargetInterval,
}

/// Computes the critical horizon, `z_hat` and the achievable target set.
pub fn feasible_targets(p: Position, params: &MarketParams) -> FeasibilityReport {
    let t = params.horizon;
    let t_star = critical_horizon(params);
    let growth = (params.r * t).exp();
    let interval = if t > t_star {
        TargetInterval::Unbounded { lower: growth * net_wealth(p, params) }
    } else if p.stock > 0.0 {
        TargetInterval::Bounded {
            lower: growth * (p.bond + params.sell_factor() * p.stock),
            upper: growth * p.bond + params.sell_factor() * (params.alpha * t).exp() * p.stock,
        }
    } else {
        TargetInterval::Empty
    };
    FeasibilityReport { critical_horizon: t_star, z_hat: z_hat(p, params), interval }
}

/// Trading regions of the optimal strategy for the adjusted problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Sell stock until the ratio reaches the sell boundary.
    Sell,
    /// Buy stock until the ratio reaches the buy boundary.
    Buy,
    /// Hold.
    NoTrade,
    /// Nonnegative net wealth: liquidate, the target is already met.
    Solvent,
}

/// Region of `p` at time `t` given the free boundaries.
///
/// Tests run in the order solvent, sell, buy, no-trade.
pub fn classify_region(t: f64, p: Position, bounds: &FreeBoundaries, params: &MarketParams) -> Result<Region> {
    if !(0.0..params.horizon).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {})", params.horizon)));
    }
    if net_wealth(p, params) >= 0.0 {
        return Ok(Region::Solvent);
    }
    if p.stock <= 0.0 {
        return Ok(Region::Buy);
    }
    if p.bond >= bounds.sell_at(t) * p.stock {
        return Ok(Region::Sell);
    }
    match bounds.buy_at(t) {
        Some(xb) if p.bond <= xb * p.stock => Ok(Region::Buy),
        _ => Ok(Region::NoTrade),
    }
}
