mod common;

use common::{reference_market, shoot};
use proptest::prelude::*;
use tcmv_core::stationary::{is_admissible, shape_exponent};
use tcmv_core::{eval_f, solve_k_star, MarketParams};

#[test]
fn closed_form_matches_shooting_on_reference_shape() {
    let p = reference_market();
    let a = shape_exponent(&p);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let k = 1.35 + 0.6 * i as f64 / 19.0;
        assert!(is_admissible(k, a), "k = {k}");
        let closed = eval_f(k, a);
        let shot = shoot(k, a, p.sigma).fee_ratio;
        let rel = (closed - shot).abs() / shot;
        worst = worst.max(rel);
        assert!(rel < 1e-8, "k = {k}: closed {closed}, shooting {shot}");
    }
    println!("worst relative gap {worst:e}");
}

#[test]
fn closed_form_matches_shooting_across_branches() {
    // a = -2.6 reaches the negative-discriminant branch; a = -12 stays positive.
    for (a, sigma) in [(-2.6, 0.3), (-4.0, 0.25), (-12.0, 0.15)] {
        let ks: Vec<f64> = (1..200).map(|i| 1.0 + i as f64 / 200.0).filter(|&k| is_admissible(k, a)).collect();
        assert!(ks.len() > 20, "a = {a}");
        // Skip the lowest quarter, where F blows up and the buy ratio runs off to -inf.
        for &k in ks[ks.len() / 4..].iter().step_by(ks.len() / 8) {
            let closed = eval_f(k, a);
            let shot = shoot(k, a, sigma).fee_ratio;
            assert!((closed - shot).abs() < 1e-7 * shot, "a = {a}, k = {k}: closed {closed}, shooting {shot}");
        }
    }
}

#[test]
fn root_reproduces_shooting_ratios() {
    let p = reference_market();
    let st = solve_k_star(&p).unwrap();
    let shot = shoot(st.k_star, st.a, p.sigma);
    assert!((shot.fee_ratio - p.fee_ratio()).abs() < 1e-8);
    // Shooting runs in unit sell-fee scaling.
    assert!((shot.x_b * p.sell_factor() - st.x_b_inf).abs() < 1e-6, "{} vs {}", shot.x_b, st.x_b_inf);
    let x_s = shot.curve[0].0 * p.sell_factor();
    assert!((x_s - st.x_s_inf).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn root_solves_fee_equation(
        excess in 0.03f64..0.2,
        sigma in 0.15f64..0.4,
        buy in 0.001f64..0.05,
        sell in 0.001f64..0.05,
    ) {
        let p = MarketParams::new(0.03, 0.03 + excess, sigma, buy, sell, 1.0).unwrap();
        let st = solve_k_star(&p);
        prop_assert!(st.is_ok(), "{:?}", st);
        let st = st.unwrap();
        let shot = shoot(st.k_star, st.a, sigma).fee_ratio;
        prop_assert!((shot - p.fee_ratio()).abs() < 1e-7 * p.fee_ratio());
    }
}
