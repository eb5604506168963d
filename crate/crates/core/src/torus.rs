//! The rhombic torus, its degree-two functions `z` and `w`, the symmetry maps
//! and the distinguished paths.
//!
//! Conventions. The flat coordinate `u` has `O` at the origin, the h-diagonal
//! along `e^{i pi/4}` and the v-diagonal along `e^{-i pi/4}`. The functions
//! satisfy
//!
//! ```text
//! 2 cos(rho) / w^2 = -(z - 1/z - 2 i sin(rho)),      du = -(w/2) dz/z,
//! ```
//!
//! so `w ~ -u` near `O`. The sheet of `w` is seeded by `w = +R e^{i pi/4}` at
//! `z = i` on the half diagonal from `O` to the puncture; with it the graph
//! piece `D` is the rectangle `{-x e^{i pi/4} + y e^{-i pi/4}}` with
//! `0 <= x <= L_h`, `0 <= y <= L_v / 2`, whose sides are
//!
//! * `H1`, `H2`: `y = 0`, `z = i t`, split by the puncture at `t = 1/lambda`
//! * `E`: `x = 0` from `O` to `b` (`z = -i t`, `t` in `[0, 1]`)
//! * `C`: `y = L_v / 2` from `b` to `b_hat`, twice over the arc `|z| = 1`, `Re z < 0`
//! * `E_hat`: `x = L_h` from `b_hat` to `O'` (`z = -i t`, `t` in `[1, inf]`)

use std::cell::Cell;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::quadrature::{integrate, GaussLegendre, QuadratureSpec};

pub type C64 = Complex64;

/// `e^{i pi/4}`.
pub const E8: C64 = C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
/// `e^{-i pi/4}`.
pub const E8_BAR: C64 = C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
pub const I: C64 = C64::new(0.0, 1.0);
/// The point at infinity.
pub const INF: C64 = C64::new(f64::INFINITY, 0.0);

pub fn is_inf(z: C64) -> bool {
    z.re.is_infinite() || z.im.is_infinite()
}

/// `1/z` on the Riemann sphere.
pub fn recip(z: C64) -> C64 {
    if is_inf(z) {
        C64::new(0.0, 0.0)
    } else if z == C64::new(0.0, 0.0) {
        INF
    } else {
        z.inv()
    }
}

/// `(a z + b) / (c z + d)` on the Riemann sphere.
pub fn mobius(a: C64, b: C64, c: C64, d: C64, z: C64) -> C64 {
    if is_inf(z) {
        return if c.norm() == 0.0 { INF } else { a / c };
    }
    let den = c * z + d;
    if den.norm() == 0.0 {
        INF
    } else {
        (a * z + b) / den
    }
}

fn conj_ext(z: C64) -> C64 {
    if is_inf(z) {
        INF
    } else {
        z.conj()
    }
}

/// Relative residual of the algebraic relation between `z` and `w`.
pub fn relation_residual(rho: f64, z: C64, w: C64) -> f64 {
    if is_inf(z) || is_inf(w) || z.norm() == 0.0 || w.norm() == 0.0 {
        return 0.0;
    }
    let lhs = 2.0 * rho.cos() / (w * w);
    let q = z - z.inv() - 2.0 * I * rho.sin();
    (lhs + q).norm() / (1.0 + z.norm() + z.inv().norm())
}

/// `Q(z) = z - 1/z - 2 i sin(rho)`.
pub fn q_of(rho: f64, z: C64) -> C64 {
    z - z.inv() - 2.0 * I * rho.sin()
}

/// A point of the torus: flat coordinate and the values of `z`, `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusSample {
    pub u: C64,
    pub z: C64,
    pub w: C64,
    /// Sign of `w` relative to the closed form used by the track that produced
    /// the sample; zero for samples produced by the flow.
    pub sheet: i8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Anchor {
    pub name: String,
    pub u: C64,
    pub z: C64,
    pub w: C64,
}

/// Flat chart of the torus for one value of `rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhombusChart {
    pub rho: f64,
    /// Length of the half h-diagonal from `O` to `O'`.
    pub l_h: f64,
    /// Length of the half v-diagonal from `O` to the opposite vertex.
    pub l_v: f64,
    pub anchors: Vec<Anchor>,
}

/// Modulus of `w` on a diagonal, `sqrt(2 c t / (t^2 + 2 sigma s t + 1))`,
/// with `sigma = -1` on the h-diagonal and `+1` on the v-diagonal.
pub fn axis_modulus(rho: f64, vertical: bool, t: f64) -> f64 {
    let (c, s) = (rho.cos(), rho.sin());
    let sg = if vertical { 1.0 } else { -1.0 };
    if t.is_infinite() {
        return 0.0;
    }
    if t <= 1.0 {
        (2.0 * c * t / (t * t + 2.0 * sg * s * t + 1.0)).sqrt()
    } else {
        let v = 1.0 / t;
        (2.0 * c * v / (1.0 + 2.0 * sg * s * v + v * v)).sqrt()
    }
}

impl RhombusChart {
    pub fn build(rho: f64, spec: &QuadratureSpec) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= FRAC_PI_2 - crate::params::RHO_MARGIN {
            return Err(Error::Domain(format!("rho = {rho} outside (-pi/2, pi/2)")));
        }
        let mut chart = Self {
            rho,
            l_h: 0.0,
            l_v: 0.0,
            anchors: Vec::new(),
        };
        chart.l_h = 2.0 * chart.axis_distance_unit(false, 1.0, spec)?;
        chart.l_v = 2.0 * chart.axis_distance_unit(true, 1.0, spec)?;
        if !(chart.l_h.is_finite() && chart.l_v.is_finite() && chart.l_h > 0.0 && chart.l_v > 0.0) {
            return Err(Error::Domain(format!("diagonal lengths diverge at rho = {rho}")));
        }
        let big_r = crate::params::big_r_from(rho)?;
        let (e_rho, e_rho_bar) = (C64::from_polar(1.0, rho), C64::from_polar(1.0, -rho));
        let mut push = |name: &str, u: C64, z: C64, w: C64| {
            chart.anchors.push(Anchor {
                name: name.into(),
                u,
                z,
                w,
            });
        };
        let (lh, lv) = (chart.l_h, chart.l_v);
        push("O", C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        push("O'", -lh * E8, INF, C64::new(0.0, 0.0));
        push("h_mid", -0.5 * lh * E8, I, big_r * E8);
        push("b", 0.5 * lv * E8_BAR, -I, -E8_BAR / big_r);
        push("b_hat", -lh * E8 + 0.5 * lv * E8_BAR, -I, E8_BAR / big_r);
        push("c_mid", -0.5 * lh * E8 + 0.5 * lv * E8_BAR, -e_rho_bar, INF);
        push("off_mid", -0.5 * lh * E8 - 0.5 * lv * E8_BAR, e_rho, INF);
        push("vertex_v", lv * E8_BAR, INF, C64::new(0.0, 0.0));
        Ok(chart)
    }

    /// Distance in `u` from `O` to `z = i t` (h-diagonal) or `z = -i t` (v-diagonal), for `t <= 1`.
    fn axis_distance_unit(&self, vertical: bool, t: f64, spec: &QuadratureSpec) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let (c, s) = (self.rho.cos(), self.rho.sin());
        let sg = if vertical { 1.0 } else { -1.0 };
        // |du| = sqrt(c/2) dt / (t sqrt(t + 1/t + 2 sg s)); with t = tau^2 the
        // integrand is sqrt(2c) / sqrt(tau^4 + 2 sg s tau^2 + 1).
        let r = integrate(
            |tau| {
                let t2 = tau * tau;
                (2.0 * c).sqrt() / (t2 * t2 + 2.0 * sg * s * t2 + 1.0).sqrt()
            },
            0.0,
            t.sqrt(),
            spec,
        )?;
        r.checked()
    }

    /// Distance in `u` from `O` along a diagonal to `z = +-i t`, any `t >= 0`.
    pub fn axis_distance(&self, vertical: bool, t: f64, spec: &QuadratureSpec) -> Result<f64> {
        let full = if vertical { self.l_v } else { self.l_h };
        if t.is_infinite() {
            Ok(full)
        } else if t <= 1.0 {
            self.axis_distance_unit(vertical, t, spec)
        } else {
            Ok(full - self.axis_distance_unit(vertical, 1.0 / t, spec)?)
        }
    }

    pub fn anchor(&self, name: &str) -> &Anchor {
        self.anchors
            .iter()
            .find(|a| a.name == name)
            .unwrap_or_else(|| panic!("unknown anchor {name}"))
    }

    /// Adds anchors that depend on `lambda`: punctures and vertical points.
    pub fn with_lambda(mut self, lambda: f64, spec: &QuadratureSpec) -> Result<Self> {
        let r = crate::params::r_from(self.rho, lambda + 1.0 / lambda)?;
        let tp = 1.0 / lambda;
        let tv = lambda;
        let up = -self.axis_distance(false, tp, spec)? * E8;
        let uv = -self.axis_distance(false, tv, spec)? * E8;
        self.anchors.push(Anchor {
            name: "puncture".into(),
            u: up,
            z: I * tp,
            w: r * E8,
        });
        self.anchors.push(Anchor {
            name: "vertical".into(),
            u: uv,
            z: I * tv,
            w: r * E8,
        });
        Ok(self)
    }

    /// Lattice generators.
    pub fn lattice(&self) -> (C64, C64) {
        (self.l_h * E8 + self.l_v * E8_BAR, self.l_h * E8 - self.l_v * E8_BAR)
    }

    /// Coordinates `(x, y)` with `u = -x e^{i pi/4} + y e^{-i pi/4}`.
    pub fn d_coords(u: C64) -> (f64, f64) {
        let v = u * E8.conj();
        (-v.re, -v.im)
    }

    pub fn from_d_coords(x: f64, y: f64) -> C64 {
        -x * E8 + y * E8_BAR
    }

    pub fn in_d(&self, u: C64, tol: f64) -> bool {
        let (x, y) = Self::d_coords(u);
        x >= -tol && x <= self.l_h + tol && y >= -tol && y <= 0.5 * self.l_v + tol
    }
}

/// The symmetry maps of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    RP,
    RD,
    RE,
    RF,
    Mu,
    MuVert,
    Nu,
}

impl Symmetry {
    pub const ALL: [Symmetry; 7] = [
        Symmetry::RP,
        Symmetry::RD,
        Symmetry::RE,
        Symmetry::RF,
        Symmetry::Mu,
        Symmetry::MuVert,
        Symmetry::Nu,
    ];
}

/// Image of a sample under a symmetry.
///
/// `r_P`, `r_D`, `r_E`, `r_F` are half turns of the flat torus about `O`, the
/// h-diagonal midpoint, and the midpoints from `O` to the two off-axis half
/// periods; `mu`, `mu_vert` reflect in the diagonals and `nu` in the line
/// carrying `C`.
pub fn apply_symmetry(chart: &RhombusChart, map: Symmetry, s: &TorusSample) -> TorusSample {
    let rho = chart.rho;
    let er = C64::from_polar(1.0, rho);
    let erb = C64::from_polar(1.0, -rho);
    let one = C64::new(1.0, 0.0);
    let u_h = chart.anchor("h_mid").u;
    let u_b = chart.anchor("b").u;
    let u_q = 0.5 * chart.anchor("off_mid").u;
    let u_p = 0.5 * chart.anchor("c_mid").u;
    let neg = |w: C64| if is_inf(w) { INF } else { -w };
    let (u, z, w) = match map {
        Symmetry::RP => (-s.u, s.z, neg(s.w)),
        Symmetry::RD => (2.0 * u_h - s.u, neg(recip(s.z)), s.w),
        Symmetry::RF => (2.0 * u_q - s.u, mobius(-erb, one, one, erb, s.z), recip(s.w)),
        Symmetry::RE => (2.0 * u_p - s.u, mobius(er, one, one, -er, s.z), neg(recip(s.w))),
        Symmetry::Mu => (I * s.u.conj(), neg(conj_ext(s.z)), scale_ext(I, conj_ext(s.w))),
        Symmetry::MuVert => (-I * s.u.conj(), neg(conj_ext(s.z)), scale_ext(-I, conj_ext(s.w))),
        Symmetry::Nu => (
            u_b + I * (s.u - u_b).conj(),
            recip(conj_ext(s.z)),
            scale_ext(-I, conj_ext(s.w)),
        ),
    };
    TorusSample { u, z, w, sheet: 0 }
}

fn scale_ext(a: C64, w: C64) -> C64 {
    if is_inf(w) {
        INF
    } else {
        a * w
    }
}

// ---------------------------------------------------------------------------
// z-tracks

/// Parameterization of the axis parameter `t` by `tau` in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub enum TMap {
    /// `t = t1 tau^2`, starting at `z = 0`.
    FromZero { t1: f64 },
    /// `t = 1 / (s1 tau)^2`, starting at `z = infinity`.
    FromInfinity { s1: f64 },
    /// `t = 1 / (s0 + (s1 - s0) tau)^2`, ending at infinity when `s1 = 0`.
    Inverse { s0: f64, s1: f64 },
    /// `t = base + d0 (d1/d0)^tau` (signed `d`), graded towards `base`.
    Geometric { base: f64, d0: f64, d1: f64 },
    /// `t = t0 + (t1 - t0) tau^2`, used past branch values.
    Linear { t0: f64, t1: f64 },
}

impl TMap {
    /// `(t, (dt/dtau) / t)`.
    fn eval(&self, tau: f64) -> (f64, f64) {
        match *self {
            TMap::FromZero { t1 } => (t1 * tau * tau, 2.0 / tau),
            TMap::FromInfinity { s1 } => {
                let sg = s1 * tau;
                (1.0 / (sg * sg), -2.0 / tau)
            }
            TMap::Inverse { s0, s1 } => {
                let sg = s0 + (s1 - s0) * tau;
                (1.0 / (sg * sg), -2.0 * (s1 - s0) / sg)
            }
            TMap::Geometric { base, d0, d1 } => {
                let k = (d1 / d0).ln();
                let d = d0 * (k * tau).exp();
                let t = base + d;
                (t, d * k / t)
            }
            TMap::Linear { t0, t1 } => {
                let t = t0 + (t1 - t0) * tau;
                (t, (t1 - t0) / t)
            }
        }
    }
}

/// Parameterization of the arc angle `phi` by `tau`; `phi_s` is where `w` has its pole.
#[derive(Debug, Clone, Copy)]
pub enum PMap {
    /// `phi = phi_s + delta tau^2`.
    FromPole { phi_s: f64, delta: f64 },
    /// `phi = phi_s + delta (1 - tau)^2`.
    ToPole { phi_s: f64, delta: f64 },
}

impl PMap {
    /// `(phi, phi - phi_s, dphi/dtau)`.
    fn eval(&self, tau: f64) -> (f64, f64, f64) {
        match *self {
            PMap::FromPole { phi_s, delta } => {
                let g = delta * tau * tau;
                (phi_s + g, g, 2.0 * delta * tau)
            }
            PMap::ToPole { phi_s, delta } => {
                let g = delta * (1.0 - tau) * (1.0 - tau);
                (phi_s + g, g, -2.0 * delta * (1.0 - tau))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Track {
    /// `z = i t` (h-diagonal) or `z = -i t` (v-diagonal), `w = sheet * dir * m(t)`
    /// with `dir = e^{i pi/4}` resp. `e^{-i pi/4}`.
    Axis { vertical: bool, sheet: f64, tmap: TMap },
    /// `z = e^{i phi}`; `w = sheet * e^{i pi/4} sqrt(c / (sin phi - sin rho))` on the
    /// right arc, `sheet * e^{-i pi/4} sqrt(c / (sin rho - sin phi))` on the left arc.
    Arc { left: bool, sheet: f64, pmap: PMap },
    /// `z = center + radius e^{i theta}`; `w` is the root nearest `w_ref`.
    Circle {
        center: C64,
        radius: f64,
        theta0: f64,
        theta1: f64,
        w_ref: C64,
    },
}

/// Values on a track at one parameter value.
#[derive(Debug, Clone, Copy)]
pub struct TrackPoint {
    pub z: C64,
    pub w: C64,
    /// `du/dtau`.
    pub du: C64,
}

impl Track {
    pub fn at(&self, rho: f64, tau: f64) -> TrackPoint {
        let (c, s) = (rho.cos(), rho.sin());
        match *self {
            Track::Axis { vertical, sheet, tmap } => {
                let (t, dlog) = tmap.eval(tau);
                let dir = if vertical { E8_BAR } else { E8 };
                let zdir = if vertical { -I } else { I };
                if t == 0.0 {
                    return TrackPoint {
                        z: C64::new(0.0, 0.0),
                        w: C64::new(0.0, 0.0),
                        du: C64::new(f64::NAN, 0.0),
                    };
                }
                if t.is_infinite() {
                    return TrackPoint {
                        z: INF,
                        w: C64::new(0.0, 0.0),
                        du: C64::new(f64::NAN, 0.0),
                    };
                }
                let w = sheet * dir * axis_modulus(rho, vertical, t);
                TrackPoint {
                    z: zdir * t,
                    w,
                    du: -0.5 * w * dlog,
                }
            }
            Track::Arc { left, sheet, pmap } => {
                let (phi, gap, dphi) = pmap.eval(tau);
                let z = C64::from_polar(1.0, phi);
                // sin(phi) - sin(phi_s) from the exact gap
                let diff = 2.0 * (phi - 0.5 * gap).cos() * (0.5 * gap).sin();
                let d = if left { -diff } else { diff };
                if d == 0.0 {
                    return TrackPoint {
                        z,
                        w: INF,
                        du: C64::new(f64::NAN, 0.0),
                    };
                }
                let dir = if left { E8_BAR } else { E8 };
                let w = sheet * dir * (c / d).sqrt();
                TrackPoint {
                    z,
                    w,
                    du: -0.5 * w * I * dphi,
                }
            }
            Track::Circle {
                center,
                radius,
                theta0,
                theta1,
                w_ref,
            } => {
                let th = theta0 + (theta1 - theta0) * tau;
                let e = C64::from_polar(radius, th);
                let z = center + e;
                let w0 = (-2.0 * c / q_of(rho, z)).sqrt();
                let w = if (w0 - w_ref).norm() <= (w0 + w_ref).norm() {
                    w0
                } else {
                    -w0
                };
                let _ = s;
                let dz = I * e * (theta1 - theta0);
                TrackPoint {
                    z,
                    w,
                    du: -0.5 * w * dz / z,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub track: Track,
    pub reversed: bool,
    /// Apply `r_P`: same `z`, `w -> -w`, `u -> -u`.
    pub rp: bool,
}

impl Segment {
    fn plain(track: Track) -> Self {
        Self {
            track,
            reversed: false,
            rp: false,
        }
    }

    pub fn at(&self, rho: f64, tau: f64) -> TrackPoint {
        let tt = if self.reversed { 1.0 - tau } else { tau };
        let mut p = self.track.at(rho, tt);
        if self.reversed {
            p.du = -p.du;
        }
        if self.rp {
            p.w = if is_inf(p.w) { INF } else { -p.w };
            p.du = -p.du;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathName {
    I,
    II,
    E,
    EHat,
    C,
    H1,
    H2,
    Alpha,
    Alpha1,
    Beta,
    B,
    DCut,
}

impl PathName {
    pub const ALL: [PathName; 12] = [
        PathName::I,
        PathName::II,
        PathName::E,
        PathName::EHat,
        PathName::C,
        PathName::H1,
        PathName::H2,
        PathName::Alpha,
        PathName::Alpha1,
        PathName::Beta,
        PathName::B,
        PathName::DCut,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PathName::I => "I",
            PathName::II => "II",
            PathName::E => "E",
            PathName::EHat => "E_hat",
            PathName::C => "C",
            PathName::H1 => "H1",
            PathName::H2 => "H2",
            PathName::Alpha => "alpha",
            PathName::Alpha1 => "alpha1",
            PathName::Beta => "beta",
            PathName::B => "B",
            PathName::DCut => "D_cut",
        }
    }
}

impl fmt::Display for PathName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PathName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = PathName::ALL.iter().map(|p| p.as_str()).collect();
                Error::Config(format!("unknown path {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Where a path starts; `u` is known exactly except for the puncture circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    O,
    OPrime,
    B,
    BHat,
    OffMid,
    VertexV,
    H1End,
    H2End,
}

/// A concatenation of z-tracks.
#[derive(Debug, Clone)]
pub struct Path {
    pub name: PathName,
    pub segments: Vec<Segment>,
    pub start: Start,
}

/// Fraction of the distance from `z = 0` to the puncture covered by the first H1 segment.
const H1_SPLIT: f64 = 0.5;

pub fn e_segment(vertical_sheet: f64) -> Segment {
    Segment::plain(Track::Axis {
        vertical: true,
        sheet: vertical_sheet,
        tmap: TMap::FromZero { t1: 1.0 },
    })
}

pub fn c_first_half(rho: f64) -> Segment {
    let phi_s = -PI - rho;
    Segment::plain(Track::Arc {
        left: true,
        sheet: -1.0,
        pmap: PMap::ToPole {
            phi_s,
            delta: FRAC_PI_2 + rho,
        },
    })
}

pub fn c_second_half(rho: f64) -> Segment {
    let phi_s = -PI - rho;
    Segment::plain(Track::Arc {
        left: true,
        sheet: 1.0,
        pmap: PMap::FromPole {
            phi_s,
            delta: FRAC_PI_2 + rho,
        },
    })
}

pub fn e_hat_segment() -> Segment {
    Segment::plain(Track::Axis {
        vertical: true,
        sheet: 1.0,
        tmap: TMap::Inverse { s0: 1.0, s1: 0.0 },
    })
}

pub fn h1_segments(lambda: f64, cutoff: f64) -> Vec<Segment> {
    let tp = 1.0 / lambda;
    let d0 = H1_SPLIT * tp;
    vec![
        Segment::plain(Track::Axis {
            vertical: false,
            sheet: 1.0,
            tmap: TMap::FromZero { t1: tp - d0 },
        }),
        Segment::plain(Track::Axis {
            vertical: false,
            sheet: 1.0,
            tmap: TMap::Geometric {
                base: tp,
                d0: -d0,
                d1: -cutoff,
            },
        }),
    ]
}

pub fn h2_segments(lambda: f64, cutoff: f64) -> Vec<Segment> {
    let tp = 1.0 / lambda;
    let tb = 2.0 * tp;
    vec![
        Segment::plain(Track::Axis {
            vertical: false,
            sheet: 1.0,
            tmap: TMap::FromInfinity { s1: 1.0 / tb.sqrt() },
        }),
        Segment::plain(Track::Axis {
            vertical: false,
            sheet: 1.0,
            tmap: TMap::Geometric {
                base: tp,
                d0: tp,
                d1: cutoff,
            },
        }),
    ]
}

fn circle(rho: f64, lambda: f64, cutoff: f64, theta0: f64, theta1: f64) -> Segment {
    let r = crate::params::r_from(rho, lambda + 1.0 / lambda).unwrap_or(1.0);
    Segment::plain(Track::Circle {
        center: I / lambda,
        radius: cutoff,
        theta0,
        theta1,
        w_ref: r * E8,
    })
}

impl Path {
    /// Build a named path. `lambda` and `cutoff` are used by the paths that
    /// reach the puncture.
    pub fn build(name: PathName, rho: f64, lambda: f64, cutoff: f64) -> Result<Path> {
        if matches!(name, PathName::H1 | PathName::H2 | PathName::Alpha | PathName::Alpha1) {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::Domain(format!("lambda = {lambda} outside (0, 1)")));
            }
            if !(cutoff > 0.0 && cutoff < 0.25 * (1.0 / lambda - lambda)) {
                return Err(Error::Domain(format!(
                    "cutoff {cutoff} too large for lambda = {lambda}"
                )));
            }
        }
        let segs = match name {
            PathName::E => vec![e_segment(-1.0)],
            PathName::EHat => vec![e_hat_segment()],
            PathName::C => vec![c_first_half(rho), c_second_half(rho)],
            PathName::II => vec![c_first_half(rho)],
            PathName::I => vec![Segment::plain(Track::Arc {
                left: false,
                sheet: 1.0,
                pmap: PMap::FromPole {
                    phi_s: rho,
                    delta: FRAC_PI_2 - rho,
                },
            })],
            PathName::H1 => h1_segments(lambda, cutoff),
            PathName::H2 => h2_segments(lambda, cutoff),
            PathName::Alpha => vec![circle(rho, lambda, cutoff, -FRAC_PI_2, 1.5 * PI)],
            PathName::Alpha1 => vec![circle(rho, lambda, cutoff, FRAC_PI_2, 1.5 * PI)],
            PathName::Beta => vec![e_segment(-1.0), c_first_half(rho)],
            PathName::B => {
                let mut back_ii = c_first_half(rho);
                back_ii.rp = true;
                back_ii.reversed = true;
                let mut back_e = e_segment(-1.0);
                back_e.rp = true;
                back_e.reversed = true;
                vec![e_segment(-1.0), c_first_half(rho), back_ii, back_e]
            }
            PathName::DCut => vec![
                Segment::plain(Track::Axis {
                    vertical: true,
                    sheet: -1.0,
                    tmap: TMap::FromInfinity { s1: 1.0 },
                }),
                Segment {
                    reversed: true,
                    ..e_segment(-1.0)
                },
            ],
        };
        let start = match name {
            PathName::E | PathName::H1 | PathName::Beta | PathName::B => Start::O,
            PathName::EHat => Start::BHat,
            PathName::C | PathName::II => Start::B,
            PathName::I => Start::OffMid,
            PathName::H2 => Start::OPrime,
            PathName::Alpha => Start::H1End,
            PathName::Alpha1 => Start::H2End,
            PathName::DCut => Start::VertexV,
        };
        Ok(Path {
            name,
            segments: segs,
            start,
        })
    }
}

/// Gauss-Legendre order used on every path panel.
pub const PANEL_ORDER: usize = 16;
/// Minimum number of panels per segment.
pub const MIN_PANELS: usize = 48;

/// Cumulative integration along a path.
///
/// For every sample position the result holds the track values and the
/// running integrals of `du` and of `f(point) du` (`f` gives densities per
/// `du`). Segments receive equal shares of the `n` samples.
pub fn accumulate<const K: usize, F>(rho: f64, path: &Path, n: usize, f: F) -> Vec<(TrackPoint, C64, [C64; K])>
where
    F: Fn(&TrackPoint) -> [C64; K],
{
    let gl = GaussLegendre::new(PANEL_ORDER);
    let nseg = path.segments.len();
    let per = ((n.max(2) - 1) / nseg).max(1);
    let mut out = Vec::with_capacity(per * nseg + 1);
    let mut u = C64::new(0.0, 0.0);
    let mut acc = [C64::new(0.0, 0.0); K];
    for (si, seg) in path.segments.iter().enumerate() {
        let intervals = if si + 1 == nseg {
            (n.max(2) - 1) - per * (nseg - 1)
        } else {
            per
        };
        let intervals = intervals.max(1);
        let sub = MIN_PANELS.div_ceil(intervals).max(1);
        if si == 0 {
            out.push((seg.at(rho, 0.0), u, acc));
        }
        for k in 0..intervals {
            let a = k as f64 / intervals as f64;
            let b = (k + 1) as f64 / intervals as f64;
            for j in 0..sub {
                let pa = a + (b - a) * j as f64 / sub as f64;
                let pb = a + (b - a) * (j + 1) as f64 / sub as f64;
                for (tau, wt) in gl.mapped(pa, pb) {
                    let p = seg.at(rho, tau);
                    let du = p.du * wt;
                    u += du;
                    let v = f(&p);
                    for i in 0..K {
                        acc[i] += v[i] * du;
                    }
                }
            }
            out.push((seg.at(rho, b), u, acc));
        }
    }
    out
}

/// Start point of a path in `u`.
pub fn start_u(chart: &RhombusChart, path: &Path, lambda: f64, cutoff: f64, spec: &QuadratureSpec) -> Result<C64> {
    Ok(match path.start {
        Start::O => chart.anchor("O").u,
        Start::OPrime => chart.anchor("O'").u,
        Start::B => chart.anchor("b").u,
        Start::BHat => chart.anchor("b_hat").u,
        Start::OffMid => chart.anchor("off_mid").u,
        Start::VertexV => chart.anchor("vertex_v").u,
        Start::H1End => -chart.axis_distance(false, 1.0 / lambda - cutoff, spec)? * E8,
        Start::H2End => -chart.axis_distance(false, 1.0 / lambda + cutoff, spec)? * E8,
    })
}

/// Samples of `(u, z, w)` along a named path.
pub fn z_along_path(chart: &RhombusChart, path: &Path, n: usize, lambda: f64, cutoff: f64) -> Result<Vec<TorusSample>> {
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let u0 = start_u(chart, path, lambda, cutoff, &QuadratureSpec::precise())?;
    let raw = accumulate::<0, _>(chart.rho, path, n, |_| []);
    let mut out = Vec::with_capacity(raw.len());
    let mut prev: Option<C64> = None;
    for (p, u, _) in raw {
        if let Some(pw) = prev {
            if !is_inf(pw) && !is_inf(p.w) && pw.norm() > 1e-8 && p.w.norm() > 1e-8 {
                let turn = (p.w / pw).arg().abs();
                // sheet flips on C happen through the pole and are expected
                if turn > 0.75 * PI && path.name != PathName::C && path.name != PathName::B {
                    return Err(Error::Branch(format!(
                        "w turned by {turn:.3} rad between samples on {}; refine",
                        path.name
                    )));
                }
            }
        }
        prev = Some(p.w);
        out.push(TorusSample {
            u: u0 + u,
            z: p.z,
            w: p.w,
            sheet: 1,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Flow in the flat coordinate

/// Values of `(z, w)` stored in whichever chart keeps them bounded:
/// `z` or `y = -1/z`, and `w` or `q = 1/w`.
#[derive(Debug, Clone, Copy)]
pub struct ChartPoint {
    pub a: C64,
    pub y_chart: bool,
    pub b: C64,
    pub q_chart: bool,
}

impl ChartPoint {
    pub fn from_zw(z: C64, w: C64) -> Self {
        let (a, y_chart) = if is_inf(z) || z.norm() > 1.0 {
            (-recip(z), true)
        } else {
            (z, false)
        };
        let (b, q_chart) = if is_inf(w) || w.norm() > 1.0 {
            (recip(w), true)
        } else {
            (w, false)
        };
        Self { a, y_chart, b, q_chart }
    }

    pub fn z(&self) -> C64 {
        if self.y_chart {
            -recip(self.a)
        } else {
            self.a
        }
    }

    pub fn w(&self) -> C64 {
        if self.q_chart {
            recip(self.b)
        } else {
            self.b
        }
    }
}

/// A point carried by the flow: position, chart values and an immersion value.
#[derive(Debug, Clone, Copy)]
pub struct FlowPoint {
    pub u: C64,
    pub p: ChartPoint,
    pub x: [f64; 3],
}

impl FlowPoint {
    pub fn sample(&self) -> TorusSample {
        TorusSample {
            u: self.u,
            z: self.p.z(),
            w: self.p.w(),
            sheet: 0,
        }
    }
}

/// `(dA/du, dB/du)` for the chart variables, with `c = cos rho`.
fn chart_rates(c: f64, p: &ChartPoint) -> (C64, C64) {
    let (a, b) = (p.a, p.b);
    // z + 1/z in terms of the stored variable
    let zz = if p.y_chart { -(a + a.inv()) } else { a + a.inv() };
    // 1/w
    let q = if p.q_chart { b } else { b.inv() };
    let da = if p.y_chart { 2.0 * a * q } else { -2.0 * a * q };
    let db = if p.q_chart {
        zz / (2.0 * c)
    } else {
        -b * b * zz / (2.0 * c)
    };
    (da, db)
}

/// Flow along the straight segment from `start.u` to `target`, carrying
/// `X += Re int phi du` where `phi` is evaluated on chart values.
pub fn flow<P>(rho: f64, start: &FlowPoint, target: C64, phi: &P, ode: &Dopri5) -> Result<FlowPoint>
where
    P: Fn(&ChartPoint) -> [C64; 3],
{
    let c = rho.cos();
    let span = target - start.u;
    let len = span.norm();
    if len == 0.0 {
        return Ok(*start);
    }
    let d = span / len;
    let charts = Cell::new((start.p.y_chart, start.p.q_chart));
    let rhs = |_s: f64, y: &[f64; 7]| -> Result<[f64; 7]> {
        let (yc, qc) = charts.get();
        let p = ChartPoint {
            a: C64::new(y[0], y[1]),
            y_chart: yc,
            b: C64::new(y[2], y[3]),
            q_chart: qc,
        };
        let (da, db) = chart_rates(c, &p);
        let (da, db) = (da * d, db * d);
        let ph = phi(&p);
        let out = [
            da.re,
            da.im,
            db.re,
            db.im,
            (ph[0] * d).re,
            (ph[1] * d).re,
            (ph[2] * d).re,
        ];
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Branch(format!(
                "flow hit a singular point near u = {}",
                start.u + d * _s
            )));
        }
        Ok(out)
    };
    let y0 = [
        start.p.a.re,
        start.p.a.im,
        start.p.b.re,
        start.p.b.im,
        start.x[0],
        start.x[1],
        start.x[2],
    ];
    let hook = |y: &mut [f64; 7]| {
        let (mut yc, mut qc) = charts.get();
        let mut changed = false;
        let a = C64::new(y[0], y[1]);
        if a.norm() > 2.0 {
            let na = -a.inv();
            y[0] = na.re;
            y[1] = na.im;
            yc = !yc;
            changed = true;
        }
        let b = C64::new(y[2], y[3]);
        if b.norm() > 2.0 {
            let nb = b.inv();
            y[2] = nb.re;
            y[3] = nb.im;
            qc = !qc;
            changed = true;
        }
        charts.set((yc, qc));
        changed
    };
    let y = ode.solve(&rhs, 0.0, y0, len, hook)?;
    let (yc, qc) = charts.get();
    Ok(FlowPoint {
        u: target,
        p: ChartPoint {
            a: C64::new(y[0], y[1]),
            y_chart: yc,
            b: C64::new(y[2], y[3]),
            q_chart: qc,
        },
        x: [y[4], y[5], y[6]],
    })
}

/// Values of `(z, w)` at `u`, by flowing from the h-diagonal midpoint.
pub fn locate(chart: &RhombusChart, u: C64) -> Result<TorusSample> {
    let h = chart.anchor("h_mid");
    let start = FlowPoint {
        u: h.u,
        p: ChartPoint::from_zw(h.z, h.w),
        x: [0.0; 3],
    };
    let zero = |_: &ChartPoint| [C64::new(0.0, 0.0); 3];
    Ok(flow(chart.rho, &start, u, &zero, &Dopri5::default())?.sample())
}

#[cfg(test)]
mod tests {
    use super::*;

    const RHO: f64 = 0.710_521_980_045_750_4;
    const LAMBDA: f64 = 0.588_299_530_365_709;

    fn chart() -> RhombusChart {
        RhombusChart::build(RHO, &QuadratureSpec::precise()).unwrap()
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        if is_inf(a) || is_inf(b) {
            return is_inf(a) && is_inf(b);
        }
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn square_torus_at_rho_zero() {
        let c = RhombusChart::build(0.0, &QuadratureSpec::precise()).unwrap();
        assert!((c.l_h - c.l_v).abs() < 1e-12);
        let c = RhombusChart::build(0.5, &QuadratureSpec::precise()).unwrap();
        assert!(c.l_h > c.l_v && c.l_v > 0.0 && c.l_h.is_finite());
    }

    #[test]
    fn anchors_satisfy_relation() {
        let c = chart().with_lambda(LAMBDA, &QuadratureSpec::precise()).unwrap();
        for a in &c.anchors {
            assert!(relation_residual(RHO, a.z, a.w) < 1e-12, "{}", a.name);
        }
    }

    #[test]
    fn branch_values() {
        let c = chart();
        let big_r = crate::params::big_r_from(RHO).unwrap();
        assert!(close(c.anchor("h_mid").w, big_r * E8, 1e-15));
        assert!(close(c.anchor("b").w, -E8_BAR / big_r, 1e-15));
    }

    #[test]
    fn flow_matches_anchors() {
        let c = chart();
        for name in ["b", "b_hat", "c_mid", "off_mid", "O'"] {
            let a = c.anchor(name);
            let s = locate(&c, a.u).unwrap();
            if is_inf(a.z) {
                assert!(s.z.norm() > 1e8, "{name}: z {}", s.z);
                continue;
            }
            assert!(close(s.z, a.z, 1e-9), "{name}: z {} vs {}", s.z, a.z);
            if is_inf(a.w) {
                assert!(s.w.norm() > 1e6, "{name}: w {}", s.w);
            } else {
                assert!(close(s.w, a.w, 1e-9), "{name}: w {} vs {}", s.w, a.w);
            }
        }
        // off-axis half periods carry the branch values of z
        let s = locate(&c, c.anchor("off_mid").u).unwrap();
        assert!((s.z - C64::from_polar(1.0, RHO)).norm() < 1e-9);
        let s = locate(&c, c.anchor("c_mid").u).unwrap();
        assert!((s.z + C64::from_polar(1.0, -RHO)).norm() < 1e-9);
    }

    #[test]
    fn tracks_match_flow() {
        let c = chart();
        for name in [PathName::E, PathName::C, PathName::EHat, PathName::I, PathName::H1] {
            let path = Path::build(name, RHO, LAMBDA, 1e-3).unwrap();
            let samples = z_along_path(&c, &path, 41, LAMBDA, 1e-3).unwrap();
            for s in samples.iter().skip(1).step_by(5) {
                if is_inf(s.w) || is_inf(s.z) {
                    continue;
                }
                assert!(relation_residual(RHO, s.z, s.w) < 1e-10);
                let f = locate(&c, s.u).unwrap();
                assert!(close(f.z, s.z, 1e-8), "{name}: z {} vs {}", f.z, s.z);
                assert!(close(f.w, s.w, 1e-8), "{name}: w {} vs {}", f.w, s.w);
            }
        }
    }

    #[test]
    fn path_endpoints() {
        let c = chart();
        let e = z_along_path(
            &c,
            &Path::build(PathName::E, RHO, LAMBDA, 1e-3).unwrap(),
            20,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        let last = e.last().unwrap();
        assert!(close(last.u, c.anchor("b").u, 1e-12));
        assert!(close(last.z, -I, 1e-15));
        let cc = z_along_path(
            &c,
            &Path::build(PathName::C, RHO, LAMBDA, 1e-3).unwrap(),
            41,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        assert!(close(cc.last().unwrap().u, c.anchor("b_hat").u, 1e-11));
        assert!(close(cc[20].u, c.anchor("c_mid").u, 1e-11));
        assert!(is_inf(cc[20].w));
        let eh = z_along_path(
            &c,
            &Path::build(PathName::EHat, RHO, LAMBDA, 1e-3).unwrap(),
            20,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        assert!(close(eh.last().unwrap().u, c.anchor("O'").u, 1e-11));
        let i = z_along_path(
            &c,
            &Path::build(PathName::I, RHO, LAMBDA, 1e-3).unwrap(),
            20,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        assert!(close(i.last().unwrap().u, c.anchor("h_mid").u, 1e-11));
        assert!(close(i.last().unwrap().w, c.anchor("h_mid").w, 1e-12));
        let dc = z_along_path(
            &c,
            &Path::build(PathName::DCut, RHO, LAMBDA, 1e-3).unwrap(),
            20,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        assert!(dc.last().unwrap().u.norm() < 1e-11);
        let b = z_along_path(
            &c,
            &Path::build(PathName::B, RHO, LAMBDA, 1e-3).unwrap(),
            40,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        // B closes on the torus after one lattice translation
        assert!(close(b.last().unwrap().u, 2.0 * c.anchor("c_mid").u, 1e-11));
    }

    #[test]
    fn h1_passes_vertical_point_and_midpoint() {
        let c = chart().with_lambda(LAMBDA, &QuadratureSpec::precise()).unwrap();
        let h = z_along_path(
            &c,
            &Path::build(PathName::H1, RHO, LAMBDA, 1e-3).unwrap(),
            400,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        let ts: Vec<f64> = h.iter().map(|s| s.z.im).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(ts[0] == 0.0 && (ts.last().unwrap() - (1.0 / LAMBDA - 1e-3)).abs() < 1e-12);
        assert!(ts.iter().any(|&t| t < LAMBDA) && ts.iter().any(|&t| t > 1.0));
        // u stays on the h-diagonal
        for s in &h {
            let (_, y) = RhombusChart::d_coords(s.u);
            assert!(y.abs() < 1e-12);
            assert!(s.z.re == 0.0);
            assert!((s.w * E8.conj()).im.abs() < 1e-12);
        }
    }

    #[test]
    fn unitarity_loci() {
        let c = chart();
        let cc = z_along_path(
            &c,
            &Path::build(PathName::C, RHO, LAMBDA, 1e-3).unwrap(),
            101,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        for s in cc.iter().filter(|s| !is_inf(s.w)) {
            assert!((s.z.norm() - 1.0).abs() < 1e-14);
            assert!((s.w * E8).im.abs() < 1e-9 * s.w.norm());
        }
        let e = z_along_path(
            &c,
            &Path::build(PathName::E, RHO, LAMBDA, 1e-3).unwrap(),
            50,
            LAMBDA,
            1e-3,
        )
        .unwrap();
        for s in &e {
            assert!((s.w * E8).im.abs() < 1e-12);
        }
    }

    #[test]
    fn symmetries_are_involutions_and_respect_relation() {
        let c = chart();
        let u = RhombusChart::from_d_coords(0.7, 0.4);
        let s = locate(&c, u).unwrap();
        for m in Symmetry::ALL {
            let t = apply_symmetry(&c, m, &s);
            let back = apply_symmetry(&c, m, &t);
            assert!(close(back.u, s.u, 1e-12), "{m:?}");
            assert!(close(back.z, s.z, 1e-12), "{m:?}");
            assert!(close(back.w, s.w, 1e-12), "{m:?}");
            assert!(relation_residual(RHO, t.z, t.w) < 1e-10, "{m:?}");
            // the image values are those of the flow at the image point
            let f = locate(&c, t.u).unwrap();
            assert!(close(f.z, t.z, 1e-8), "{m:?}: z {} vs {}", f.z, t.z);
            assert!(close(f.w, t.w, 1e-8), "{m:?}: w {} vs {}", f.w, t.w);
        }
    }

    #[test]
    fn symmetry_examples() {
        let c = chart();
        let o = TorusSample {
            u: C64::new(0.0, 0.0),
            z: C64::new(0.0, 0.0),
            w: C64::new(0.0, 0.0),
            sheet: 0,
        };
        let t = apply_symmetry(&c, Symmetry::RP, &o);
        assert_eq!(t.z, o.z);
        assert_eq!(t.u.norm(), 0.0);
        let h = c.anchor("h_mid");
        let s = TorusSample {
            u: h.u,
            z: h.z,
            w: h.w,
            sheet: 0,
        };
        let t = apply_symmetry(&c, Symmetry::RD, &s);
        assert!(close(t.z, I, 1e-15) && close(t.u, h.u, 1e-15));
        let v = TorusSample {
            u: 0.3 * E8_BAR,
            z: -0.2 * I,
            w: C64::new(0.0, 0.0),
            sheet: 0,
        };
        assert!(close(apply_symmetry(&c, Symmetry::Mu, &v).z, v.z, 1e-15));
    }

    #[test]
    fn q_point_is_fixed_by_r_f() {
        let c = chart();
        let uq = 0.5 * c.anchor("off_mid").u;
        let s = locate(&c, uq).unwrap();
        assert!((s.w * s.w - 1.0).norm() < 1e-9, "w(q) = {}", s.w);
        let up = 0.5 * c.anchor("c_mid").u;
        let s = locate(&c, up).unwrap();
        assert!((s.w * s.w + 1.0).norm() < 1e-9, "w(p) = {}", s.w);
    }

    #[test]
    fn path_names_round_trip() {
        for p in PathName::ALL {
            assert_eq!(p.as_str().parse::<PathName>().unwrap(), p);
        }
        assert!("nope".parse::<PathName>().is_err());
    }
}
