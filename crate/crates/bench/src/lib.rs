//! Shared fixtures for the criterion benches in `benches/`.

use tcmv_core::{MarketParams, Position};

/// Two-asset market used throughout the benches.
pub fn reference_market() -> MarketParams {
    MarketParams::new(0.05, 0.15, 0.2, 0.02, 0.02, 2.0).expect("valid market")
}

/// Leveraged starting holdings: one dollar of stock financed by borrowing.
pub fn leveraged_start() -> Position {
    Position::new(-1.0, 1.0)
}
