//! Solves the two-asset reference market for a leveraged initial position.

use std::time::Instant;

use tcmv_core::market::{MarketParams, Position};
use tcmv_core::sim::{simulate, SimConfig};
use tcmv_core::solver::{MeanVarianceSolver, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MarketParams::new(0.05, 0.15, 0.2, 0.02, 0.02, 2.0)?;
    let start = Instant::now();
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let mut cfg = SolveConfig::default();
    if let [n_z, n_t, factor] = args[..] {
        cfg.grid.n_z = n_z as usize;
        cfg.grid.n_t = n_t as usize;
        cfg.grid.z_max_factor = factor;
    }
    let solver = MeanVarianceSolver::new(&params, &cfg)?;
    let bounds = solver.boundaries();
    println!("built in {:.2?}; t0 = {}", start.elapsed(), bounds.t0());
    println!("x_s*(0) = {}, x_b*(0) = {:?}", bounds.sell()[0], bounds.buy()[0]);
    for (initial, z) in [(Position::new(-1.0, 1.0), 1.1), (Position::new(1.0, 0.0), 1.2)] {
        let sol = solver.solve(initial, z)?;
        if let Some(ell) = sol.ell_star {
            let mc = SimConfig { n_paths: 200_000, n_steps: 2000, seed: 1, normal: Default::default(), trace_paths: 0 };
            let t = Instant::now();
            let rep = simulate(sol.post_trade, ell, bounds, &params, &mc)?;
            println!(
                "  mc ({:.1?}): mean {} +- {}, variance {} +- {}, bought {}, sold {}, late buys {}, conservation {:e}",
                t.elapsed(),
                rep.mean_terminal_wealth,
                rep.mean_ci,
                rep.variance_terminal_wealth,
                rep.variance_ci,
                rep.mean_bought,
                rep.mean_sold,
                rep.buys_after_t0,
                rep.max_conservation_error
            );
        }
        println!(
            "z = {z}: ell* = {:?}, adjusted = {:?}, post = {:?}, trade = {}, variance = {}",
            sol.ell_star, sol.adjusted_initial, sol.post_trade, sol.initial_trade, sol.variance
        );
    }
    Ok(())
}
