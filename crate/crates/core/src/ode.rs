//! Dormand-Prince 5(4) integrator for small real systems of fixed size.
//!
//! The driver exposes a hook after every accepted step so callers can rewrite
//! the state in place (used for switching between coordinate charts).

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-13,
            max_steps: 200_000,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// One trial step; returns the 5th order solution and the scaled error norm.
    fn trial<const N: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
    ) -> Result<([f64; N], [f64; N], f64)>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let k2 = f(t + C2 * h, &axpy(y, &[(A21, k1)], h))?;
        let k3 = f(t + C3 * h, &axpy(y, &[(A31, k1), (A32, &k2)], h))?;
        let k4 = f(t + C4 * h, &axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h))?;
        let k5 = f(
            t + C5 * h,
            &axpy(y, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        )?;
        let k6 = f(
            t + h,
            &axpy(y, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        )?;
        let y5 = axpy(y, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5)?;
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        Ok((y5, k7, err))
    }

    /// Integrate from `t0` to `t1`. After each accepted step `hook` may modify
    /// the state; if it does it must return `true` so the stage cache is reset.
    pub fn solve<const N: usize, F, H>(&self, f: &F, t0: f64, y0: [f64; N], t1: f64, mut hook: H) -> Result<[f64; N]>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
        H: FnMut(&mut [f64; N]) -> bool,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y)?;
        let mut h = dir * (span.abs() * 0.01).min(initial_step(&k1, &y, self));
        for _ in 0..self.max_steps {
            if (t1 - t) * dir <= 0.0 {
                return Ok(y);
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            let (y5, k7, err) = self.trial(f, t, &y, &k1, h)?;
            if err <= 1.0 {
                let last = (t + h - t1) * dir >= 0.0;
                t = if last { t1 } else { t + h };
                y = y5;
                k1 = k7;
                if hook(&mut y) {
                    k1 = f(t, &y)?;
                }
                if last {
                    return Ok(y);
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h *= fac;
            } else {
                let fac = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h *= fac;
            }
            if h.abs() < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::Branch(format!("ODE step size underflow at t = {t}")));
            }
        }
        Err(Error::Branch(format!("ODE exceeded {} steps", self.max_steps)))
    }
}

fn initial_step<const N: usize>(k: &[f64; N], y: &[f64; N], o: &Dopri5) -> f64 {
    let mut dn = 0.0f64;
    let mut yn = 0.0f64;
    for i in 0..N {
        let sc = o.atol + o.rtol * y[i].abs();
        dn = dn.max((k[i] / sc).abs());
        yn = yn.max((y[i] / sc).abs());
    }
    if dn < 1e-5 || yn < 1e-5 {
        1e-3
    } else {
        (0.01 * yn / dn).max(1e-8)
    }
}
