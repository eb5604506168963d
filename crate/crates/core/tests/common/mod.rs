//! Independent oracles shared by the integration tests.
//!
//! The reduced period integrals are evaluated after the substitutions
//! `t^2 = +-(sin phi - sin rho)` and `t = t_max sin theta`, which remove both
//! endpoint singularities; composite Simpson on the smooth result needs no
//! adaptive machinery.

#![allow(dead_code, clippy::excessive_precision)]

use std::f64::consts::FRAC_PI_2;

/// Values computed with 30-digit arithmetic.
pub mod frozen {
    pub const RHO0: f64 = 0.710_521_980_045_750_43;
    pub const LAMBDA0: f64 = 0.588_299_530_365_708_99;
    pub const BIG_LAMBDA0: f64 = 2.288_113_907_879_086_56;
    pub const T0: f64 = 2.550_339_768_118_049_32;
    pub const F_05_3: f64 = -0.542_575_431_984_051_55;
    pub const BIG_LAMBDA_08: f64 = 2.223_888_772_021_757_53;
    pub const R_05: f64 = 1.298_382_230_765_786_3;
}

pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

const NODES: usize = 20_000;

/// `F(rho, Lambda)` by substitution and Simpson.
pub fn oracle_f(rho: f64, big_lambda: f64) -> f64 {
    let sr = rho.sin();
    simpson(
        |th| {
            let s = sr + (1.0 - sr) * th.sin().powi(2);
            2.0 * (2.0 - big_lambda * s) / ((big_lambda - 2.0 * s) * (1.0 + s).sqrt())
        },
        0.0,
        FRAC_PI_2,
        NODES,
    )
}

/// `G(rho, Lambda)` by substitution and Simpson.
pub fn oracle_g(rho: f64, big_lambda: f64) -> f64 {
    let sr = rho.sin();
    simpson(
        |th| {
            let s = sr - (1.0 + sr) * th.sin().powi(2);
            let den = big_lambda - 2.0 * s;
            2.0 * (big_lambda - 4.0 * sr + 2.0 * s) * (2.0 - big_lambda * s) / (den * den * (1.0 - s).sqrt())
        },
        0.0,
        FRAC_PI_2,
        NODES,
    )
}

/// `Lambda(rho)` by 60 bisection steps on the oracle `F`.
pub fn oracle_lambda(rho: f64) -> f64 {
    let (mut lo, mut hi) = (2.0 + 1e-9, (2.0 / rho.sin()).min(8.0));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if oracle_f(rho, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
