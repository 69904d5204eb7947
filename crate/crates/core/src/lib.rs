//! Dynamic mean-variance portfolio selection with proportional transaction costs.
//!
//! The pipeline runs in stages:
//!
//! 1. [`market`]: closed-form feasibility of a target mean.
//! 2. [`stationary`]: infinite-horizon sell/buy ratios from the fee equation.
//! 3. [`obstacle`]: finite-horizon double-obstacle problem and its free boundaries.
//! 4. [`value`]: the value function of the adjusted problem.
//! 5. [`solver`]: Lagrange multiplier, initial trade and efficient frontier.
//! 6. [`sim`]: Monte Carlo of the resulting reflected diffusion.

pub mod boundaries;
pub mod error;
pub mod market;
pub mod numerics;
pub mod obstacle;
pub mod sim;
pub mod solver;
pub mod stationary;
pub mod value;

pub use boundaries::FreeBoundaries;
pub use error::{Error, Result};
pub use market::{
    classify_region, critical_horizon, feasible_targets, net_wealth, z_hat, FeasibilityReport, MarketParams, Position,
    Region, TargetBound, TargetInterval,
};
pub use obstacle::{
    contact_edges, extract_boundaries, solve_obstacle, spatial_operator, ContactEdges, GridSpec, ObstacleSolution,
    PdeGrid, SolverConfig,
};
pub use sim::{simulate, step, NormalMethod, PathState, SimConfig, SimulationReport};
pub use solver::{
    efficient_frontier, initial_trade, solve, solve_multiplier, FrontierPoint, MeanVarianceSolver, MvSolution,
    SolveConfig, TargetSpec,
};
pub use stationary::{eval_f, solve_k_star, StationaryParams};
pub use value::ValueFunction;
