//! Reduced period integrals and the two-parameter period problem.
//!
//! `F(rho, Lambda)` vanishes iff the horizontal translation along the
//! h-diagonal side closes up; `G(rho, Lambda)` vanishes iff the second
//! horizontal period does. `F` is strictly decreasing in `Lambda`, so `F = 0`
//! defines `Lambda(rho)`; a sign change of `H(rho) = G(rho, Lambda(rho))`
//! then yields the solution `(rho0, lambda0)`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SurfaceParams;
use crate::quadrature::{integrate_offsets, Abscissa, QuadratureResult, QuadratureSpec};

/// `sin p - sin q` computed from the exact gap `p - q`.
#[inline]
pub fn sin_diff(p: f64, q: f64, gap: f64) -> f64 {
    2.0 * (0.5 * (p + q)).cos() * (0.5 * gap).sin()
}

/// The regular factor `(2 - Lambda sin phi) / (Lambda - 2 sin phi)`.
#[inline]
pub fn f_factor(big_lambda: f64, phi: f64) -> f64 {
    let s = phi.sin();
    (2.0 - big_lambda * s) / (big_lambda - 2.0 * s)
}

/// The sign-carrying factor of the `G` integrand.
#[inline]
pub fn g_factor(rho: f64, big_lambda: f64, phi: f64) -> f64 {
    let s = phi.sin();
    (big_lambda - 4.0 * rho.sin() + 2.0 * s) / (big_lambda - 2.0 * s)
}

/// Integrand of `G` at an interior abscissa `phi` of `(-pi/2, rho)`.
pub fn g_integrand(rho: f64, big_lambda: f64, phi: f64) -> f64 {
    let gap = rho - phi;
    g_factor(rho, big_lambda, phi) * f_factor(big_lambda, phi) / sin_diff(rho, phi, gap).sqrt()
}

pub fn f_integral_result(rho: f64, big_lambda: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_lambda(big_lambda)?;
    if !(rho < FRAC_PI_2) {
        return Err(Error::Domain(format!("rho = {rho} must be below pi/2")));
    }
    integrate_offsets(
        |p: Abscissa| {
            let d = sin_diff(p.x, rho, p.from_a);
            f_factor(big_lambda, p.x) / d.sqrt()
        },
        rho,
        FRAC_PI_2,
        spec,
    )
}

pub fn g_integral_result(rho: f64, big_lambda: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_lambda(big_lambda)?;
    if !(rho > -FRAC_PI_2 && rho < FRAC_PI_2) {
        return Err(Error::Domain(format!("rho = {rho} outside (-pi/2, pi/2)")));
    }
    let sr = rho.sin();
    integrate_offsets(
        |p: Abscissa| {
            let d = sin_diff(rho, p.x, p.to_b);
            let s = p.x.sin();
            let den = big_lambda - 2.0 * s;
            (big_lambda - 4.0 * sr + 2.0 * s) * (2.0 - big_lambda * s) / (den * den * d.sqrt())
        },
        -FRAC_PI_2,
        rho,
        spec,
    )
}

/// `F(rho, Lambda)`; non-convergence is an error.
pub fn f_integral(rho: f64, big_lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    f_integral_result(rho, big_lambda, spec)?.checked()
}

/// `G(rho, Lambda)`; non-convergence is an error.
pub fn g_integral(rho: f64, big_lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    g_integral_result(rho, big_lambda, spec)?.checked()
}

fn check_lambda(big_lambda: f64) -> Result<()> {
    if !(big_lambda > 2.0) || !big_lambda.is_finite() {
        return Err(Error::Domain(format!("Lambda = {big_lambda} must exceed 2")));
    }
    Ok(())
}

/// Sign of a quadrature value, declared only when it exceeds ten error estimates.
pub fn resolved_sign(r: &QuadratureResult) -> Option<f64> {
    if r.converged && r.value.abs() > 10.0 * r.error_estimate && r.value != 0.0 {
        Some(r.value.signum())
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodState {
    pub rho: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(rename = "F")]
    pub f_value: f64,
    #[serde(rename = "G")]
    pub g_value: f64,
    pub phi_lambda: f64,
    pub phi_rho: Option<f64>,
    pub f_quadrature: QuadratureResult,
    pub g_quadrature: QuadratureResult,
}

impl PeriodState {
    pub fn evaluate(rho: f64, big_lambda: f64, spec: &QuadratureSpec) -> Result<Self> {
        let fq = f_integral_result(rho, big_lambda, spec)?;
        let gq = g_integral_result(rho, big_lambda, spec)?;
        // sin(phi_Lambda) = 2 / Lambda
        let phi_lambda = (2.0 / big_lambda).asin();
        // Lambda - 4 sin rho + 2 sin(phi_rho) = 0, kept only inside (0, rho)
        let s = 0.5 * (4.0 * rho.sin() - big_lambda);
        let phi_rho = if s > 0.0 && s < rho.sin() { Some(s.asin()) } else { None };
        Ok(Self {
            rho,
            big_lambda,
            f_value: fq.value,
            g_value: gq.value,
            phi_lambda,
            phi_rho,
            f_quadrature: fq,
            g_quadrature: gq,
        })
    }
}

/// Bracket `(2 + eps, min(2 / sin rho, 8) - eps)` for `Lambda(rho)`.
pub fn lambda_bracket(rho: f64) -> (f64, f64) {
    let hi = (2.0 / rho.sin()).min(8.0);
    let eps = 1e-6 * (hi - 2.0);
    (2.0 + eps, hi - eps)
}

/// Root of a function decreasing through zero on `[lo, hi]` with `f(lo) > 0 > f(hi)`,
/// by alternating false position and bisection.
fn decreasing_root<F>(mut f: F, mut lo: f64, mut flo: f64, mut hi: f64, mut fhi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = if flo.abs() < fhi.abs() { lo } else { hi };
    let mut best_f = flo.abs().min(fhi.abs());
    for it in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mut x = if it % 2 == 0 && flo.is_finite() && fhi.is_finite() {
            hi - fhi * (hi - lo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        // keep the secant step well inside the bracket
        let margin = 0.01 * (hi - lo);
        if !(x > lo + margin && x < hi - margin) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() < best_f {
            best = x;
            best_f = fx.abs();
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    if best_f <= flo.abs().min(fhi.abs()) {
        Ok(best)
    } else if flo.abs() < fhi.abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Solve `F(rho, Lambda) = 0` for `Lambda`.
pub fn solve_lambda_of_rho(rho: f64, spec: &QuadratureSpec, root_tol: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < FRAC_PI_2) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, pi/2)")));
    }
    let (lo, hi) = lambda_bracket(rho);
    // only the sign matters at the bracket ends, where the integrand is nearly
    // singular and full relative accuracy may be out of reach
    let end_value = |l: f64| -> Result<f64> {
        let r = f_integral_result(rho, l, spec)?;
        if r.converged || r.value.abs() > 10.0 * r.error_estimate {
            Ok(r.value)
        } else {
            r.checked()
        }
    };
    let flo = end_value(lo)?;
    let fhi = end_value(hi)?;
    if !(flo > 0.0) {
        return Err(Error::Bracket(format!("F({rho}, {lo}) = {flo} is not positive")));
    }
    if !(fhi < 0.0) {
        return Err(Error::Bracket(format!("F({rho}, {hi}) = {fhi} is not negative")));
    }
    decreasing_root(|l| f_integral(rho, l, spec), lo, flo, hi, fhi, root_tol)
}

/// `H(rho) = G(rho, Lambda(rho))` together with `Lambda(rho)`.
pub fn h_of_rho(rho: f64, spec: &QuadratureSpec, root_tol: f64) -> Result<(f64, f64)> {
    let l = solve_lambda_of_rho(rho, spec, root_tol)?;
    Ok((l, g_integral(rho, l, spec)?))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub rho: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodSolution {
    pub params: SurfaceParams,
    pub residual_f: f64,
    pub residual_g: f64,
    /// Grid intervals `(rho_i, rho_{i+1})` on which `H` changes sign.
    pub sign_changes: Vec<(f64, f64)>,
    pub scan: Vec<ScanRow>,
}

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_ROOT_TOL: f64 = 1e-13;

/// Uniform scan grid on `(0.02, pi/2 - 0.02)`.
pub fn rho_grid(n: usize) -> Vec<f64> {
    let (a, b) = (0.02, FRAC_PI_2 - 0.02);
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn format_scan(rows: &[ScanRow]) -> String {
    let mut s = String::from("rho,Lambda,H\n");
    for r in rows {
        s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.rho, r.big_lambda, r.h));
    }
    s
}

/// Scan `H(rho)` on the grid and refine the first sign change.
pub fn solve_period_problem(spec: &QuadratureSpec, grid_size: usize, root_tol: f64) -> Result<PeriodSolution> {
    if grid_size < 2 {
        return Err(Error::Config("grid_size must be at least 2".into()));
    }
    if !(root_tol > 0.0) {
        return Err(Error::Config("root_tol must be positive".into()));
    }
    let lambda_tol = (root_tol * 1e-1).max(1e-15);
    let grid = rho_grid(grid_size);
    let scan: Vec<ScanRow> = grid
        .par_iter()
        .map(|&rho| {
            let (l, h) = h_of_rho(rho, spec, lambda_tol)?;
            Ok(ScanRow { rho, big_lambda: l, h })
        })
        .collect::<Result<Vec<_>>>()?;

    let sign_changes: Vec<(f64, f64)> = scan
        .windows(2)
        .filter(|w| w[0].h.signum() != w[1].h.signum())
        .map(|w| (w[0].rho, w[1].rho))
        .collect();
    let first = scan
        .windows(2)
        .find(|w| w[0].h.signum() != w[1].h.signum())
        .ok_or_else(|| Error::NoSignChange {
            table: format_scan(&scan),
        })?;

    let (lo, hi) = (first[0], first[1]);
    let rho0 = if lo.h > 0.0 {
        decreasing_root(
            |r| Ok(h_of_rho(r, spec, lambda_tol)?.1),
            lo.rho,
            lo.h,
            hi.rho,
            hi.h,
            root_tol,
        )?
    } else {
        decreasing_root(
            |r| Ok(-h_of_rho(r, spec, lambda_tol)?.1),
            lo.rho,
            -lo.h,
            hi.rho,
            -hi.h,
            root_tol,
        )?
    };
    let l0 = solve_lambda_of_rho(rho0, spec, lambda_tol)?;
    let params = SurfaceParams::from_big_lambda(rho0, l0)?;
    Ok(PeriodSolution {
        params,
        residual_f: f_integral(rho0, l0, spec)?,
        residual_g: g_integral(rho0, l0, spec)?,
        sign_changes,
        scan,
    })
}

/// Solve with default spec, grid and tolerance.
pub fn solve_default() -> Result<PeriodSolution> {
    solve_period_problem(&QuadratureSpec::precise(), DEFAULT_GRID, DEFAULT_ROOT_TOL)
}

/// Upper bound for `F(0, 8)` from the monotonicity estimate.
pub fn f08_bound() -> f64 {
    let q: f64 = 2.0 / 8.0;
    2.0 * q * (q / (1.0 - q * q)).sqrt() - 0.5 * (1.0 - q * q).sqrt()
}

/// Limit bound `sqrt(2)/3 - 1/2` for `F(rho, 2 + (1 - sin rho))` as `rho -> pi/2`.
pub fn f_near_bound_limit() -> f64 {
    2f64.sqrt() / 3.0 - 0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaCurvePoint {
    pub rho: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub upper: f64,
    pub lambda_in_bounds: bool,
    pub f_at_8: f64,
    pub f_at_8_negative: bool,
    /// `(F(rho, 2 + (1 - sin rho)), Lambda < 2 + (1 - sin rho))` for `rho` near `pi/2`.
    pub near_end: Option<(f64, bool)>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaCurveReport {
    pub points: Vec<LambdaCurvePoint>,
    pub f08_bound: f64,
    pub passed: bool,
}

/// Points with `rho` at or above this value also get the sharper bound checked.
pub const NEAR_END_RHO: f64 = 1.4;

pub fn lambda_curve_certificate(rho_grid: &[f64], spec: &QuadratureSpec) -> Result<LambdaCurveReport> {
    let points = rho_grid
        .par_iter()
        .map(|&rho| {
            let l = solve_lambda_of_rho(rho, spec, 1e-13)?;
            let upper = (2.0 / rho.sin()).min(8.0);
            let lambda_in_bounds = l > 2.0 && l < upper;
            let f8 = f_integral_result(rho, 8.0, spec)?;
            let f_at_8_negative = resolved_sign(&f8) == Some(-1.0);
            let near_end = if rho >= NEAR_END_RHO {
                let b = 2.0 + (1.0 - rho.sin());
                let fb = f_integral_result(rho, b, spec)?;
                Some((fb.value, resolved_sign(&fb) == Some(-1.0) && l < b))
            } else {
                None
            };
            let passed = lambda_in_bounds && f_at_8_negative && near_end.is_none_or(|x| x.1);
            Ok(LambdaCurvePoint {
                rho,
                big_lambda: l,
                upper,
                lambda_in_bounds,
                f_at_8: f8.value,
                f_at_8_negative,
                near_end,
                passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = points.iter().all(|p| p.passed);
    Ok(LambdaCurveReport {
        points,
        f08_bound: f08_bound(),
        passed,
    })
}
