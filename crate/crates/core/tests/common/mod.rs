//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use tcmv_core::{GridSpec, MarketParams, SolverConfig};

pub fn reference_market() -> MarketParams {
    MarketParams::new(0.05, 0.15, 0.2, 0.02, 0.02, 2.0).unwrap()
}

pub fn reference_grid() -> GridSpec {
    GridSpec { n_z: 800, n_t: 2000, z_max_factor: 500.0 }
}

pub fn default_solver() -> SolverConfig {
    SolverConfig::default()
}

/// Stationary ratio ODE `L v = 0` in unit-sell-fee scaling, written as `v'' = g(x, v, v')`.
fn second_derivative(x: f64, v: f64, vp: f64, excess: f64, s2: f64) -> f64 {
    (excess * x * vp - (excess + s2) * v - s2 * ((2.0 * x * x * vp - x * x * vp * vp) / v - 2.0 * x))
        / (0.5 * s2 * x * x)
}

fn rk4(x: f64, y: [f64; 2], h: f64, excess: f64, s2: f64) -> [f64; 2] {
    let f = |x: f64, y: [f64; 2]| [y[1], second_derivative(x, y[0], y[1], excess, s2)];
    let k1 = f(x, y);
    let k2 = f(x + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
    let k3 = f(x + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
    let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Result of shooting from the sell ratio to the point where `v' = 1` again.
pub struct Shot {
    /// `v(x_b) - x_b`, the fee ratio produced by `k`.
    pub fee_ratio: f64,
    pub x_b: f64,
    /// `(x, v(x))` samples from the sell ratio leftward.
    pub curve: Vec<(f64, f64)>,
}

/// Shoots the stationary ODE for a trial `k` with sell fee normalized to zero.
///
/// Starts at `x_s = -a/(a+k)` with `v = x_s + 1`, `v' = 1` and integrates
/// leftward by RK4 until `v'` returns to 1; the crossing is located by
/// bisection on the step length.
pub fn shoot(k: f64, a: f64, sigma: f64) -> Shot {
    let s2 = sigma * sigma;
    let excess = -a * s2 / 2.0 - s2;
    let x_s = -a / (a + k);
    let h = -1e-4;
    let mut x = x_s;
    let mut y = [x_s + 1.0, 1.0];
    let mut curve = vec![(x, y[0])];
    loop {
        let next = rk4(x, y, h, excess, s2);
        if next[1] >= 1.0 && x != x_s {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if rk4(x, y, m, excess, s2)[1] >= 1.0 {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            let m = 0.5 * (lo + hi);
            let end = rk4(x, y, m, excess, s2);
            let x_b = x + m;
            curve.push((x_b, end[0]));
            return Shot { fee_ratio: end[0] - x_b, x_b, curve };
        }
        x += h;
        y = next;
        curve.push((x, y[0]));
        assert!(x > -1e4, "shooting did not turn back for k = {k}");
    }
}

/// Stationary excess `v_inf(x) - x` of a real market, from the shooting curve at `k_star`.
pub fn stationary_excess(params: &MarketParams, a: f64, k_star: f64) -> impl Fn(f64) -> f64 {
    let shot = shoot(k_star, a, params.sigma);
    let c = params.sell_factor();
    let lo = c;
    let up = params.buy_factor();
    let curve: Vec<(f64, f64)> = shot.curve.iter().map(|&(x, v)| (c * x, c * v)).collect();
    move |x: f64| {
        if x >= curve[0].0 {
            return lo;
        }
        let last = curve.len() - 1;
        if x <= curve[last].0 {
            return up;
        }
        // Curve is sampled leftward, so x is decreasing.
        let i = curve.partition_point(|&(xi, _)| xi > x);
        let (x1, v1) = curve[i - 1];
        let (x2, v2) = curve[i];
        let th = (x - x1) / (x2 - x1);
        (1.0 - th) * v1 + th * v2 - x
    }
}
