//! Run configuration. Every numeric field name carries its unit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tcmv_core::{GridSpec, MarketParams, NormalMethod, Position, SimConfig, SolveConfig, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub riskless_rate_per_year: f64,
    pub stock_drift_per_year: f64,
    pub volatility_per_sqrt_year: f64,
    /// Proportional cost of buying, as a fraction of the dollars traded.
    pub buy_fee_fraction: f64,
    /// Proportional cost of selling, as a fraction of the dollars traded.
    pub sell_fee_fraction: f64,
    pub horizon_years: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionConfig {
    pub bond_dollars: f64,
    pub stock_dollars: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_z: usize,
    pub n_t: usize,
    /// Right edge of the ratio grid as a multiple of the stationary buy ratio.
    pub z_max_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { n_z: g.n_z, n_t: g.n_t, z_max_factor: g.z_max_factor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    /// Penalty weight; absent means `1e6 / dt`.
    #[serde(default)]
    pub weight: Option<f64>,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self { weight: s.penalty, newton_tol: s.newton_tol, newton_max: s.newton_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub normal: NormalMethod,
    /// Leading paths written to `trace_<target>_<path>.csv`.
    #[serde(default)]
    pub trace_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierConfig {
    pub z_min_dollars: f64,
    pub z_max_dollars: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    /// Write every `n`-th PDE node to `grid.csv`.
    #[serde(default)]
    pub grid_dump_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub position: PositionConfig,
    /// Expected terminal wealth targets.
    #[serde(default)]
    pub targets_dollars: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub frontier: Option<FrontierConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.market_params()?;
        let p = self.position;
        if !(p.bond_dollars.is_finite() && p.stock_dollars.is_finite()) {
            bail!("position must be finite");
        }
        if let Some(z) = self.targets_dollars.iter().find(|z| !z.is_finite()) {
            bail!("target {z} must be finite");
        }
        if self.grid.n_z < 8 || self.grid.n_t < 2 {
            bail!("grid needs n_z >= 8 and n_t >= 2");
        }
        if !(self.grid.z_max_factor > 1.0) {
            bail!("grid.z_max_factor must exceed 1");
        }
        if self.penalty.weight.is_some_and(|k| !(k > 0.0))
            || !(self.penalty.newton_tol > 0.0)
            || self.penalty.newton_max == 0
        {
            bail!("penalty weight and newton_tol must be positive, newton_max at least 1");
        }
        if let Some(mc) = self.mc {
            if mc.n_paths < 2 || mc.n_steps == 0 {
                bail!("mc needs n_paths >= 2 and n_steps >= 1");
            }
        }
        if let Some(f) = self.frontier {
            if f.points == 0 || !(f.z_min_dollars < f.z_max_dollars) {
                bail!("frontier needs points >= 1 and z_min_dollars < z_max_dollars");
            }
        }
        Ok(())
    }

    pub fn market_params(&self) -> anyhow::Result<MarketParams> {
        let m = &self.market;
        MarketParams::new(
            m.riskless_rate_per_year,
            m.stock_drift_per_year,
            m.volatility_per_sqrt_year,
            m.buy_fee_fraction,
            m.sell_fee_fraction,
            m.horizon_years,
        )
        .context("invalid market")
    }

    pub fn initial(&self) -> Position {
        Position::new(self.position.bond_dollars, self.position.stock_dollars)
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            grid: GridSpec { n_z: self.grid.n_z, n_t: self.grid.n_t, z_max_factor: self.grid.z_max_factor },
            solver: SolverConfig {
                penalty: self.penalty.weight,
                newton_tol: self.penalty.newton_tol,
                newton_max: self.penalty.newton_max,
            },
            ..SolveConfig::default()
        }
    }

    pub fn sim_config(&self) -> Option<SimConfig> {
        self.mc.map(|m| SimConfig {
            n_paths: m.n_paths,
            n_steps: m.n_steps,
            seed: m.seed,
            normal: m.normal,
            trace_paths: m.trace_paths,
        })
    }
}
