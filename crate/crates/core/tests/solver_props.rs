mod common;

use common::{default_four, instance};
use marketareas_core::solver::{InitialGuess, Tolerance};
use marketareas_core::{
    solve, verify_equilibrium, City, EconomyParams, Error, Grid, PriceState, Quadrature, SolveResult, SolverConfig, StepMode,
};
use proptest::prelude::*;

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn solved_state_passes_verification() {
    let inst = default_four();
    let r = solve(&inst, &SolverConfig::default()).unwrap();
    assert!(r.grad_inf_norm <= r.tol);
    assert!(r.prices.is_normalized());
    assert!(r.prices.p.iter().all(|p| *p > 0.0));
    let report = verify_equilibrium(&r, &inst, 10.0).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn inflated_price_fails_with_excess_supply_in_that_city() {
    let inst = default_four();
    let r = solve(&inst, &SolverConfig::default()).unwrap();
    for i in 0..inst.n() {
        let mut bad = r.clone();
        bad.prices.p[i] *= 1.1;
        bad.weights = inst.weights(&bad.prices).unwrap();
        bad.tessellation = inst.tessellation(&bad.prices).unwrap();
        let z = inst.excess_demand(&bad.prices).unwrap().z;
        assert!(z[i] < 0.0, "city {i}: Z = {}", z[i]);
        match verify_equilibrium(&bad, &inst, 10.0) {
            Err(Error::VerificationFailed(failed)) => {
                assert!(failed.iter().any(|f| f.starts_with(&format!("farm market {i}:"))), "{failed:?}");
            }
            other => panic!("expected a verification failure, got {other:?}"),
        }
    }
}

#[test]
fn stale_tessellation_is_caught() {
    let inst = default_four();
    let mut r = solve(&inst, &SolverConfig::default()).unwrap();
    let mut p = r.prices.clone();
    p.p[0] *= 3.0;
    r.tessellation = inst.tessellation(&p).unwrap();
    match verify_equilibrium(&r, &inst, 10.0) {
        Err(Error::VerificationFailed(failed)) => assert!(failed.iter().any(|f| f.starts_with("tessellation"))),
        other => panic!("expected a verification failure, got {other:?}"),
    }
}

/// Single city: demand equals supply at `p` where the urban farm share
/// `p^rho / (1 + p^rho)` of urban income buys exactly the delivered supply.
fn bisection_price(supply: f64, urban_income: f64, rho: f64) -> f64 {
    // Z(p) = -supply / (1 + p^rho) + urban_income * p^(rho - 1) / (1 + p^rho)
    let z = |p: f64| (urban_income * p.powf(rho - 1.0) - supply) / (1.0 + p.powf(rho));
    let (mut lo, mut hi): (f64, f64) = (1e-6, 1e6);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if z(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn injected_bisection_solution_verifies() {
    let side = 14;
    let mut g = Grid::uniform(side, side, 1.0);
    for x in 0..side * side {
        g.rural_pop[x] = 1.0 + (x % 5) as f64 * 0.1;
    }
    let (row, col, lm, ym, delta) = (4, 9, 60.0, 1.2, 0.25);
    let inst = instance(g.clone(), vec![City::new("solo", row, col, lm, ym)], -1.0, delta, Quadrature::Midpoint);
    let supply: f64 = (0..side * side)
        .map(|x| {
            let (r, c) = ((x / side) as f64, (x % side) as f64);
            g.rural_pop[x] * (-delta * (r - row as f64).hypot(c - col as f64)).exp()
        })
        .sum();
    let rho = inst.params.rho();
    let p = bisection_price(supply, lm * ym, rho);
    let prices = PriceState::normalized_from(vec![p]).unwrap();
    let e = inst.evaluate(&prices).unwrap();
    let injected = SolveResult {
        weights: e.weights.clone(),
        tessellation: inst.tessellation_from(&e).unwrap(),
        iterations: 0,
        grad_inf_norm: e.grad_inf_norm(),
        tol: Tolerance::default().resolve(&inst),
        excess: e.excess.z.clone(),
        potential: e.potential,
        trajectory: None,
        prices,
    };
    assert!(verify_equilibrium(&injected, &inst, 10.0).unwrap().passed());
    let tight = SolverConfig { tol: Tolerance::RelativeToOutput(1e-13), ..Default::default() };
    let solved = solve(&inst, &tight).unwrap();
    assert!((solved.prices.p[0] - p).abs() <= 1e-8 * p);
}

#[test]
fn mirror_symmetric_cities_get_equal_prices() {
    let g = Grid::uniform(12, 20, 1.0);
    let cities = vec![City::new("w", 5, 4, 25.0, 1.0), City::new("e", 6, 15, 25.0, 1.0)];
    let inst = instance(g, cities, -1.0, 0.2, Quadrature::SubCell);
    let r = solve(&inst, &SolverConfig { tol: Tolerance::RelativeToOutput(1e-12), ..Default::default() }).unwrap();
    let p = &r.prices.p;
    assert!((p[0] - p[1]).abs() <= 1e-9 * p[0], "{p:?}");
}

#[test]
fn backtracking_never_loses_potential() {
    let inst = default_four();
    let cfg = SolverConfig { record_trajectory: true, init: InitialGuess::Custom(PriceState::normalized_from(vec![0.2, 5.0, 3.0, 0.1]).unwrap()), ..Default::default() };
    let r = solve(&inst, &cfg).unwrap();
    let t = r.trajectory.unwrap();
    assert_eq!(t.len(), r.iterations + 1);
    for w in t.points.windows(2) {
        // steps are accepted on a relative noise floor once the potential is flat to rounding
        assert!(w[1].potential >= w[0].potential - 1e-13 * w[0].potential.abs(), "{:?} -> {:?}", w[0], w[1]);
    }
}

#[test]
fn starting_at_the_solution_returns_it() {
    let inst = default_four();
    let r = solve(&inst, &SolverConfig::default()).unwrap();
    let again = solve(&inst, &SolverConfig { init: InitialGuess::Custom(r.prices.clone()), ..Default::default() }).unwrap();
    assert_eq!(again.iterations, 0);
    assert_eq!(again.prices, r.prices);
}

#[test]
fn lbfgs_finds_the_same_prices() {
    let inst = default_four();
    let gd = solve(&inst, &SolverConfig::default()).unwrap();
    let cfg = SolverConfig { step_mode: StepMode::Lbfgs { memory: 7, shrink: 0.5, armijo: 1e-4 }, ..Default::default() };
    let lb = solve(&inst, &cfg).unwrap();
    assert!(max_gap(&gd.prices.p, &lb.prices.p) <= 10.0 * gd.tol);
}

#[test]
fn alpha_of_one_is_rejected() {
    assert!(EconomyParams::new(1.0, 0.2).is_err());
    assert!(EconomyParams::new(0.0, 0.2).is_err());
    assert!(EconomyParams::new(-1.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rescaled_start_gives_the_same_normalized_prices(
        logp in prop::collection::vec(-2.0f64..2.0, 4),
        logt in -6.0f64..6.0,
    ) {
        let inst = default_four();
        let p0: Vec<f64> = logp.iter().map(|x| x.exp()).collect();
        let base = solve(&inst, &SolverConfig { init: InitialGuess::Custom(PriceState::normalized_from(p0.clone()).unwrap()), ..Default::default() }).unwrap();
        let t = logt.exp();
        let scaled = PriceState::new(p0.iter().map(|p| p * t).collect(), t).unwrap();
        let r = solve(&inst, &SolverConfig { init: InitialGuess::Custom(scaled), ..Default::default() }).unwrap();
        prop_assert_eq!(r.prices.q, 1.0);
        prop_assert!(max_gap(&r.prices.p, &base.prices.p) <= 10.0 * base.tol);
    }
}
