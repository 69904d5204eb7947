use thiserror::Error;

use crate::market::TargetInterval;

/// Errors raised by the solver pipeline.
///
/// [`Error::InvalidParams`] and [`Error::Infeasible`] are caller mistakes;
/// every other variant signals a numerical integrity failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("no root of the stationary fee equation for ratio {target}; scanned {scanned} admissible points")]
    NoRootBracket { target: f64, scanned: usize },

    #[error("stationary fee equation has {} candidate roots: {brackets:?}", brackets.len())]
    MultipleRoots { brackets: Vec<(f64, f64)> },

    #[error("singular operator: u = {value} at node {node} must be negative")]
    Singularity { node: usize, value: f64 },

    #[error("Newton failed at t = {t} after {iterations} iterations (last update {update:e})")]
    NewtonDivergence { t: f64, iterations: usize, update: f64 },

    #[error("obstacle violated by {violation:e} at t = {t}")]
    ObstacleViolation { t: f64, violation: f64 },

    #[error("numerical integrity failure: {0}")]
    Integrity(String),

    #[error("target {z} is infeasible; achievable set is {interval}")]
    Infeasible { z: f64, interval: TargetInterval },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
