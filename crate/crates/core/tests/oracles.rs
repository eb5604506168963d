mod common;

use common::{frozen, oracle_f, oracle_g, oracle_lambda, rel};
use helicoid::params::{big_r_from, period_t};
use helicoid::periods::{f_integral, g_integral, solve_default, solve_lambda_of_rho};
use helicoid::QuadratureSpec;

#[test]
fn oracle_reproduces_frozen_f() {
    assert!(rel(oracle_f(0.5, 3.0), frozen::F_05_3) < 1e-13);
}

#[test]
fn f_matches_oracle_on_a_grid() {
    let spec = QuadratureSpec::precise();
    for rho in [0.1, 0.5, 0.9, 1.3] {
        for big_lambda in [2.05, 2.5, 4.0] {
            if big_lambda >= 2.0 / f64::sin(rho) {
                continue;
            }
            let v = f_integral(rho, big_lambda, &spec).unwrap();
            assert!(
                (v - oracle_f(rho, big_lambda)).abs() < 1e-11,
                "F({rho}, {big_lambda}) = {v}"
            );
        }
    }
}

#[test]
fn g_matches_oracle_including_nonpositive_rho() {
    let spec = QuadratureSpec::precise();
    for rho in [-0.5, 0.0, 0.4, 1.1] {
        for big_lambda in [2.1, 3.0, 6.0] {
            let v = g_integral(rho, big_lambda, &spec).unwrap();
            assert!(
                (v - oracle_g(rho, big_lambda)).abs() < 1e-10,
                "G({rho}, {big_lambda}) = {v}"
            );
        }
    }
}

#[test]
fn lambda_of_rho_matches_bisection_oracle() {
    let spec = QuadratureSpec::precise();
    let l = solve_lambda_of_rho(0.8, &spec, 1e-13).unwrap();
    assert!(rel(l, frozen::BIG_LAMBDA_08) < 1e-12);
    assert!(rel(oracle_lambda(0.8), frozen::BIG_LAMBDA_08) < 1e-12);
}

#[test]
fn solution_matches_fixture() {
    let s = solve_default().unwrap();
    assert!((s.params.rho - frozen::RHO0).abs() < 1e-12);
    assert!((s.params.lambda - frozen::LAMBDA0).abs() < 1e-12);
    assert!(rel(s.params.big_lambda, frozen::BIG_LAMBDA0) < 1e-12);
    assert!(rel(s.params.t, frozen::T0) < 1e-11);
    assert_eq!(s.sign_changes.len(), 1);
    // G at the oracle Lambda of the solution vanishes too
    let l = oracle_lambda(frozen::RHO0);
    assert!(oracle_g(frozen::RHO0, l).abs() < 1e-10);
}

#[test]
fn derived_constants() {
    assert!(rel(big_r_from(0.5).unwrap(), frozen::R_05) < 1e-14);
    assert!(rel(period_t(frozen::RHO0, frozen::LAMBDA0).unwrap(), frozen::T0) < 1e-11);
}

#[test]
fn r_squared_over_branch_modulus_squared_tends_to_three_quarters() {
    let spec = QuadratureSpec::precise();
    let ratio = |rho: f64, l: f64| {
        let r = helicoid::params::r_from(rho, l).unwrap();
        (r * r) / big_r_from(rho).unwrap().powi(2)
    };
    let vals: Vec<f64> = [1.3, 1.4, 1.5, 1.55]
        .iter()
        .map(|&rho| ratio(rho, solve_lambda_of_rho(rho, &spec, 1e-13).unwrap()))
        .collect();
    assert!((ratio(1.5, oracle_lambda(1.5)) - vals[2]).abs() < 1e-10);
    // Lambda < 3 - sin rho bounds the ratio below by 2/3
    assert!(vals.iter().all(|v| *v > 2.0 / 3.0 && *v < 0.75), "{vals:?}");
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
    assert!(0.75 - vals[3] < 1e-3);
    // at Lambda = 2 the two agree exactly
    let r2 = helicoid::params::r_from(1.5, 2.0).unwrap().powi(2);
    assert!(rel(r2, big_r_from(1.5).unwrap().powi(2)) < 1e-12);
}
