//! Sidecar description of every artifact's columns and fields.

use serde_json::{json, Value};

/// Bumped whenever a column or field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

pub fn schema() -> Value {
    let position = json!({"bond_dollars": "number", "stock_dollars": "number"});
    json!({
        "schema_version": SCHEMA_VERSION,
        "files": {
            "feasibility.json": {
                "type": "object",
                "fields": {
                    "position": position,
                    "critical_horizon_years": "number",
                    "z_hat_dollars": "number or null (null: no finite supremum)",
                    "feasible_targets": {
                        "kind": "\"empty\" | \"bounded\" | \"unbounded\"",
                        "lower_dollars": "number or null; exclusive",
                        "upper_dollars": "number or null; inclusive, reached only by never trading"
                    }
                }
            },
            "boundaries.csv": {
                "type": "csv",
                "columns": {
                    "t": "years, strictly increasing",
                    "x_s_star": "sell boundary, bond/stock dollar ratio, nonincreasing in t",
                    "x_b_star": "buy boundary, bond/stock dollar ratio; the literal -inf once the buy region is empty"
                }
            },
            "solution.json": {
                "type": "array, one object per target in config order",
                "fields": {
                    "target_dollars": "number",
                    "stay_put": "bool; the target is the largest attainable mean",
                    "ell_star_dollars": "number or null (stay-put)",
                    "adjusted_position": "position or null; bond reduced by ell_star * exp(-r T)",
                    "initial_region": "\"sell\" | \"buy\" | \"no_trade\" | null",
                    "initial_trade_stock_dollars": "number; positive buys, negative sells",
                    "post_trade_position_adjusted": position,
                    "post_trade_position": position,
                    "variance_dollars_squared": "number >= 0"
                }
            },
            "frontier.csv": {
                "type": "csv",
                "columns": {"z": "target, dollars", "variance": "minimum variance, dollars squared, >= 0"},
                "notes": "infeasible or failed targets are omitted"
            },
            "mc_report.json": {
                "type": "array, one object per simulated target",
                "fields": {
                    "target_dollars": "number",
                    "report": {
                        "n_paths": "integer",
                        "n_steps": "integer",
                        "n_discarded": "integer",
                        "mean_terminal_wealth": "dollars",
                        "mean_ci": "95% half-width",
                        "variance_terminal_wealth": "dollars squared",
                        "variance_ci": "95% half-width",
                        "mean_bought": "stock dollars per path",
                        "mean_sold": "stock dollars per path",
                        "fraction_steps_selling": "number in [0, 1]",
                        "fraction_steps_buying": "number in [0, 1]",
                        "buys_after_t0": "integer",
                        "corner_events": "integer",
                        "short_covers": "integer",
                        "liquidations": "integer",
                        "max_conservation_error": "relative"
                    }
                }
            },
            "trace_<target>_<path>.csv": {
                "type": "csv",
                "columns": {
                    "t": "years",
                    "X": "bond dollars, adjusted",
                    "Y": "stock dollars",
                    "M": "cumulative stock dollars bought",
                    "N": "cumulative stock dollars sold"
                }
            },
            "grid.csv": {
                "type": "csv",
                "columns": {"t": "years", "z": "ln(-x)", "u": "ratio value function at x = -exp(z)"}
            }
        }
    })
}
