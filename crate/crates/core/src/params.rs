//! Surface parameters `(rho, lambda)` and the constants derived from them.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin kept away from `|rho| = pi/2`, where the trigonometric factors blow up.
pub const RHO_MARGIN: f64 = 1e-9;

/// Smaller root of `lambda^2 - Lambda lambda + 1 = 0`.
pub fn lambda_from_big_lambda(big_lambda: f64) -> Result<f64> {
    if !(big_lambda > 2.0) || !big_lambda.is_finite() {
        return Err(Error::Domain(format!(
            "Lambda = {big_lambda} must exceed 2 (lambda = 1 is excluded)"
        )));
    }
    // Product of the roots is 1; take the large root stably and invert it.
    let disc = ((big_lambda - 2.0) * (big_lambda + 2.0)).sqrt();
    Ok(2.0 / (big_lambda + disc))
}

/// Gauss map puncture modulus `r`, from `r^2 = 2 cos rho / (Lambda - 2 sin rho)`.
pub fn r_from(rho: f64, big_lambda: f64) -> Result<f64> {
    check_rho(rho)?;
    let den = big_lambda - 2.0 * rho.sin();
    if !(den > 0.0) {
        return Err(Error::Domain(format!("Lambda - 2 sin rho = {den} must be positive")));
    }
    Ok((2.0 * rho.cos() / den).sqrt())
}

/// Branch value modulus `R = sqrt(cot(pi/4 - rho/2))`.
pub fn big_r_from(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() >= FRAC_PI_2 {
        return Err(Error::Domain(format!(
            "R diverges: cot(pi/4 - rho/2) is unbounded at rho = {rho}"
        )));
    }
    // cot(pi/4 - rho/2) = (1 + sin rho) / cos rho, free of the tan singularity.
    let v = (1.0 + rho.sin()) / rho.cos();
    if !v.is_finite() {
        return Err(Error::Domain(format!("R overflows at rho = {rho}")));
    }
    Ok(v.sqrt())
}

/// Vertical period `T = pi sqrt(cos rho) (1 - lambda^2) / sqrt(Lambda/2 - sin rho)`.
pub fn period_t(rho: f64, lambda: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let inner = 0.5 * (lambda + 1.0 / lambda) - rho.sin();
    if !(inner > 0.0) {
        return Err(Error::Domain(format!("Lambda/2 - sin rho = {inner} must be positive")));
    }
    Ok(PI * rho.cos().sqrt() * (1.0 - lambda * lambda) / inner.sqrt())
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho.abs() >= FRAC_PI_2 - RHO_MARGIN {
        return Err(Error::Domain(format!(
            "rho = {rho} outside (-pi/2, pi/2) less margin {RHO_MARGIN:e}"
        )));
    }
    Ok(())
}

/// Validated parameter pair with cached derived quantities.
///
/// Only [`SurfaceParams::new`] produces values usable for the surface itself;
/// [`SurfaceParams::diagnostic`] admits `rho <= 0` and `lambda > 1` for the
/// impossibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub rho: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl SurfaceParams {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < FRAC_PI_2 - RHO_MARGIN) {
            return Err(Error::Domain(format!("rho = {rho} outside (0, pi/2)")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda = {lambda} outside (0, 1)")));
        }
        Self::build(rho, lambda)
    }

    pub fn diagnostic(rho: f64, lambda: f64) -> Result<Self> {
        check_rho(rho)?;
        if !(lambda > 0.0) || !lambda.is_finite() || lambda == 1.0 {
            return Err(Error::Domain(format!(
                "lambda = {lambda} must be positive and different from 1"
            )));
        }
        Self::build(rho, lambda)
    }

    pub fn from_big_lambda(rho: f64, big_lambda: f64) -> Result<Self> {
        Self::new(rho, lambda_from_big_lambda(big_lambda)?)
    }

    fn build(rho: f64, lambda: f64) -> Result<Self> {
        let big_lambda = lambda + 1.0 / lambda;
        Ok(Self {
            rho,
            lambda,
            big_lambda,
            r: r_from(rho, big_lambda)?,
            big_r: big_r_from(rho)?,
            t: period_t(rho, lambda)?,
        })
    }

    pub fn is_surface(&self) -> bool {
        self.rho > 0.0 && self.lambda < 1.0
    }

    /// Residual of `Lambda = 2 (sin rho + cos rho / r^2)`.
    pub fn relation_residual(&self) -> f64 {
        (self.big_lambda - 2.0 * (self.rho.sin() + self.rho.cos() / (self.r * self.r))).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_inverts_definition() {
        assert_relative_eq!(lambda_from_big_lambda(2.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(lambda_from_big_lambda(2.9).unwrap(), 0.4, epsilon = 1e-15);
        assert!(lambda_from_big_lambda(2.0).is_err());
        assert!(lambda_from_big_lambda(1.0).is_err());
        assert!(lambda_from_big_lambda(f64::NAN).is_err());
    }

    #[test]
    fn r_examples() {
        assert_relative_eq!(r_from(0.0, 2.5).unwrap(), 0.8f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(r_from(0.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(r_from(1.0, 2.0 * 1f64.sin()).is_err());
    }

    #[test]
    fn big_r_examples() {
        assert_relative_eq!(big_r_from(0.0).unwrap(), 1.0, epsilon = 1e-15);
        // cot(pi/4 - 0.25)^{1/2} evaluated in 30-digit arithmetic
        assert_relative_eq!(big_r_from(0.5).unwrap(), 1.298_382_230_765_786_3, max_relative = 1e-14);
        assert!(big_r_from(FRAC_PI_2).is_err());
        assert!(big_r_from(2.0).is_err());
        let near = big_r_from(FRAC_PI_2 - 1e-12).unwrap();
        assert!(near > 1e5 && near.is_finite());
    }

    #[test]
    fn period_examples() {
        let t = period_t(0.0, 0.5).unwrap();
        assert_relative_eq!(t, PI * 0.75 / 1.25f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(t, 2.107_444_1, epsilon = 1e-6);
        assert!(period_t(0.3, 1.0 - 1e-9).unwrap() < 1e-8);
        assert!(period_t(0.3, 0.0).is_err());
    }

    #[test]
    fn validating_constructor() {
        assert!(SurfaceParams::new(0.7, 0.6).is_ok());
        assert!(SurfaceParams::new(-0.1, 0.6).is_err());
        assert!(SurfaceParams::new(0.7, 1.5).is_err());
        assert!(SurfaceParams::new(FRAC_PI_2, 0.5).is_err());
        assert!(SurfaceParams::diagnostic(-0.1, 1.5).is_ok());
        assert!(SurfaceParams::diagnostic(0.1, 1.0).is_err());
        let p = SurfaceParams::new(0.7, 0.6).unwrap();
        assert!(p.relation_residual() < 1e-14);
        assert!(p.is_surface());
    }

    #[test]
    fn serializes_with_symbol_names() {
        let p = SurfaceParams::new(0.5, 0.5).unwrap();
        let v: serde_json::Value = serde_json::to_value(p).unwrap();
        for key in ["rho", "lambda", "Lambda", "r", "R", "T"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn t_vanishes_at_both_ends_and_is_unimodal() {
        let ts: Vec<f64> = (1..1000).map(|k| period_t(0.7, k as f64 / 1000.0).unwrap()).collect();
        assert!(ts.iter().all(|&t| t > 0.0));
        assert!(ts[0] < 0.3 && ts[998] < 0.02);
        let peak = ts
            .iter()
            .enumerate()
            .fold(0, |m, (i, &t)| if t > ts[m] { i } else { m });
        assert!(ts[..=peak].windows(2).all(|w| w[1] > w[0]));
        assert!(ts[peak..].windows(2).all(|w| w[1] < w[0]));
    }
}
