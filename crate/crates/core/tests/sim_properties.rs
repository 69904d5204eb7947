mod common;

use std::sync::OnceLock;

use common::reference_market;
use proptest::prelude::*;
use tcmv_core::{
    classify_region, net_wealth, simulate, step, FreeBoundaries, MeanVarianceSolver, MvSolution, NormalMethod,
    PathState, Position, Region, SimConfig, SolveConfig,
};

fn example() -> &'static (MeanVarianceSolver, MvSolution) {
    static CELL: OnceLock<(MeanVarianceSolver, MvSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = MeanVarianceSolver::new(&reference_market(), &SolveConfig::default()).unwrap();
        let sol = s.solve(Position::new(-1.0, 1.0), 1.1).unwrap();
        (s, sol)
    })
}

fn run(n_paths: usize, n_steps: usize, seed: u64, normal: NormalMethod) -> tcmv_core::SimulationReport {
    let (s, sol) = example();
    let cfg = SimConfig { n_paths, n_steps, seed, normal, trace_paths: 0 };
    simulate(sol.post_trade, sol.ell_star.unwrap(), s.boundaries(), s.params(), &cfg).unwrap()
}

#[test]
fn mean_hits_target_on_a_small_run() {
    let rep = run(20_000, 500, 11, NormalMethod::Ziggurat);
    assert!((rep.mean_terminal_wealth - 1.1).abs() < 3.0 * rep.mean_ci, "{rep:?}");
    assert_eq!(rep.buys_after_t0, 0);
    assert!(rep.max_conservation_error <= 1e-12);
}

#[test]
fn doubling_steps_changes_moments_within_noise() {
    let coarse = run(20_000, 400, 21, NormalMethod::Ziggurat);
    let fine = run(20_000, 800, 22, NormalMethod::Ziggurat);
    let mean_noise = (coarse.mean_ci.powi(2) + fine.mean_ci.powi(2)).sqrt();
    assert!((coarse.mean_terminal_wealth - fine.mean_terminal_wealth).abs() < 3.0 * mean_noise);
    let var_noise = (coarse.variance_ci.powi(2) + fine.variance_ci.powi(2)).sqrt();
    assert!((coarse.variance_terminal_wealth - fine.variance_terminal_wealth).abs() < 3.0 * var_noise);
}

#[test]
fn normal_samplers_agree_in_distribution() {
    let zig = run(20_000, 400, 31, NormalMethod::Ziggurat);
    let inv = run(20_000, 400, 31, NormalMethod::InverseCdf);
    let noise = (zig.mean_ci.powi(2) + inv.mean_ci.powi(2)).sqrt();
    assert!((zig.mean_terminal_wealth - inv.mean_terminal_wealth).abs() < 3.0 * noise);
}

#[test]
fn traces_conserve_liquidation_value_across_trades() {
    let (s, sol) = example();
    let p = s.params();
    let cfg = SimConfig { n_paths: 4, n_steps: 400, seed: 5, normal: NormalMethod::Ziggurat, trace_paths: 4 };
    let rep = simulate(sol.post_trade, sol.ell_star.unwrap(), s.boundaries(), p, &cfg).unwrap();
    let dt = p.horizon / 400.0;
    for trace in &rep.traces {
        for w in trace.windows(2) {
            // Replaying the free step exposes the trade: buys cost (1 + buy_fee), sales earn (1 - sell_fee).
            let (a, b) = (w[0], w[1]);
            let bought = b.bought - a.bought;
            let sold = b.sold - a.sold;
            let free_x = a.x * (1.0 + p.r * dt);
            let bond_change = b.x - free_x;
            let expected = p.sell_factor() * sold - p.buy_factor() * bought;
            assert!((bond_change - expected).abs() <= 1e-12 * (1.0 + free_x.abs()), "step {a:?} -> {b:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn step_lands_in_closed_band(
        t in 0.0f64..1.5,
        ratio in -4.0f64..-0.99,
        y in 0.1f64..3.0,
        db in -0.3f64..0.3,
    ) {
        let p = reference_market();
        let bounds = FreeBoundaries::constant(&p, -1.25, Some(-1.76), 201);
        let state = PathState { t, x: ratio * y, y, bought: 0.0, sold: 0.0 };
        prop_assume!(net_wealth(Position::new(state.x, state.y), &p) < 0.0);
        let (next, ev) = step(state, 0.01, db, &bounds, &p).unwrap();
        prop_assert!(ev.conservation_error <= 1e-12);
        let pos = Position::new(next.x, next.y);
        let region = classify_region(next.t, pos, &bounds, &p).unwrap();
        if region == Region::Solvent {
            prop_assert!(ev.liquidated && next.y == 0.0);
        } else if region != Region::NoTrade {
            let r = next.x / next.y;
            prop_assert!((r + 1.25).abs() < 1e-9 || (r + 1.76).abs() < 1e-9, "ratio {} in {:?}", r, region);
        }
    }
}
