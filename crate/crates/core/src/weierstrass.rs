//! Weierstrass data on the torus and integration of the immersion.
//!
//! With `a = r e^{i pi/4}` the Gauss map is `g = (w - a)/(w + a)` and
//! `dh = e^{i pi/4} (z - i lambda)/(z - i/lambda) du`. Using the relation
//! between `z` and `w`, the horizontal densities reduce to
//!
//! ```text
//! phi1 = -2 w S Q / r = 4 c S / (r w)
//! phi2 = e^{i pi/4} (2 c S - i r^2 S Q) / r^2,      S = z / (z - i/lambda)^2
//! ```
//!
//! which stay finite at the branch points and at `O`, `O'`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::params::SurfaceParams;
use crate::periods::{f_integral, g_integral};
use crate::quadrature::QuadratureSpec;
use crate::torus::{
    accumulate, apply_symmetry, flow, is_inf, start_u, ChartPoint, FlowPoint, Path, PathName, RhombusChart, Segment,
    Start, Symmetry, TMap, Track, TrackPoint, C64, E8, I, INF,
};

/// Default z-distance at which paths stop short of the puncture.
pub const DEFAULT_CUTOFF: f64 = 1e-3;

/// Stereographic Gauss map value; when `|g| > 1` the reciprocal is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussValue {
    pub value: C64,
    pub inverted: bool,
}

impl GaussValue {
    pub fn g(&self) -> C64 {
        if !self.inverted {
            self.value
        } else if self.value.norm() == 0.0 {
            INF
        } else {
            self.value.inv()
        }
    }

    /// `|g| + 1/|g|`.
    pub fn metric_factor(&self) -> f64 {
        let m = self.value.norm();
        m + 1.0 / m
    }
}

pub fn gauss_map(w: C64, r: f64) -> GaussValue {
    let a = r * E8;
    if is_inf(w) {
        return GaussValue {
            value: C64::new(1.0, 0.0),
            inverted: false,
        };
    }
    let (num, den) = (w - a, w + a);
    if num.norm() <= den.norm() {
        GaussValue {
            value: num / den,
            inverted: false,
        }
    } else {
        GaussValue {
            value: den / num,
            inverted: true,
        }
    }
}

/// Gauss map in chart variables (`q = 1/w` when the point stores it).
fn gauss_chart(p: &ChartPoint, r: f64) -> GaussValue {
    if p.q_chart {
        let aq = r * E8 * p.b;
        let (num, den) = (1.0 - aq, 1.0 + aq);
        if num.norm() <= den.norm() {
            GaussValue {
                value: num / den,
                inverted: false,
            }
        } else {
            GaussValue {
                value: den / num,
                inverted: true,
            }
        }
    } else {
        gauss_map(p.b, r)
    }
}

pub fn height_differential(z: C64, lambda: f64) -> Result<C64> {
    if is_inf(z) {
        return Ok(E8);
    }
    let den = z - I / lambda;
    if den.norm() == 0.0 {
        return Err(Error::Domain("dh evaluated at the puncture".into()));
    }
    Ok(E8 * (z - I * lambda) / den)
}

/// `Phi = (phi1, phi2, phi3)` per `du` in chart variables.
pub fn phi_chart(params: &SurfaceParams, p: &ChartPoint) -> [C64; 3] {
    let (c, s) = (params.rho.cos(), params.rho.sin());
    let (lambda, r) = (params.lambda, params.r);
    let a = p.a;
    let (sv, sq, dh) = if p.y_chart {
        let den = 1.0 + I * a / lambda;
        let d2 = den * den;
        (
            -a / d2,
            (1.0 + 2.0 * I * s * a - a * a) / d2,
            E8 * (1.0 + I * lambda * a) / den,
        )
    } else {
        let den = a - I / lambda;
        let d2 = den * den;
        (
            a / d2,
            (a * a - 2.0 * I * s * a - 1.0) / d2,
            E8 * (a - I * lambda) / den,
        )
    };
    let phi1 = if p.q_chart {
        4.0 * c * sv * p.b / r
    } else {
        -2.0 * p.b * sq / r
    };
    let phi2 = E8 * (2.0 * c * sv - I * r * r * sq) / (r * r);
    [phi1, phi2, dh]
}

pub fn phi_zw(params: &SurfaceParams, z: C64, w: C64) -> [C64; 3] {
    phi_chart(params, &ChartPoint::from_zw(z, w))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeierstrassSample {
    pub base: crate::torus::TorusSample,
    pub g: GaussValue,
    pub dh_du: C64,
    pub phi: [C64; 3],
}

impl WeierstrassSample {
    pub fn conformality_residual(&self) -> f64 {
        let [a, b, c] = self.phi;
        let scale = a.norm_sqr() + b.norm_sqr() + c.norm_sqr();
        if scale == 0.0 {
            0.0
        } else {
            (a * a + b * b + c * c).norm() / scale
        }
    }

    pub fn metric_density(&self) -> f64 {
        self.g.metric_factor() * self.dh_du.norm()
    }
}

/// A point on a sampled path together with its image.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XSample {
    pub base: crate::torus::TorusSample,
    pub x: [f64; 3],
}

/// Sum of two accumulated integrals, real parts only.
fn re3(v: &[C64; 3]) -> [f64; 3] {
    [v[0].re, v[1].re, v[2].re]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Number of samples used for auxiliary integrals (start values of paths).
const AUX_SAMPLES: usize = 8;

/// The minimal surface for fixed parameters.
#[derive(Debug, Clone)]
pub struct Surface {
    pub params: SurfaceParams,
    pub chart: RhombusChart,
    pub cutoff: f64,
    pub ode: Dopri5,
}

/// Outcome of a direct period integral compared with its reduced form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualComparison {
    pub direct: f64,
    pub reduced: f64,
    pub ratio: f64,
    /// `lambda sqrt(cos rho) / 2`.
    pub expected_ratio: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeriodBCheck {
    pub period_b: [f64; 3],
    pub d_cut: [f64; 3],
    pub alpha1: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PullbackReport {
    pub samples: usize,
    /// Largest `|X(m p) - A X(p)| / (1 + |X(p)|)` over samples, per map `mu`, `mu_vert`, `r_P`.
    pub max_dev: [f64; 3],
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DegreeCount {
    pub zeros: i64,
    pub poles: i64,
}

impl Surface {
    pub fn new(params: SurfaceParams, spec: &QuadratureSpec) -> Result<Self> {
        let chart = RhombusChart::build(params.rho, spec)?.with_lambda(params.lambda, spec)?;
        Ok(Self {
            params,
            chart,
            cutoff: DEFAULT_CUTOFF,
            ode: Dopri5::default(),
        })
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self> {
        let lam = self.params.lambda;
        if !(cutoff > 0.0 && cutoff < 0.25 * (1.0 / lam - lam)) {
            return Err(Error::Domain(format!("cutoff {cutoff} out of range")));
        }
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn phi(&self, p: &ChartPoint) -> [C64; 3] {
        phi_chart(&self.params, p)
    }

    pub fn sample(&self, s: crate::torus::TorusSample) -> Result<WeierstrassSample> {
        let p = ChartPoint::from_zw(s.z, s.w);
        Ok(WeierstrassSample {
            base: s,
            g: gauss_chart(&p, self.params.r),
            dh_du: height_differential(s.z, self.params.lambda)?,
            phi: self.phi(&p),
        })
    }

    pub fn path(&self, name: PathName) -> Result<Path> {
        Path::build(name, self.params.rho, self.params.lambda, self.cutoff)
    }

    /// Raw cumulative integral of `Phi` over a path: `(track point, u offset, integral)`.
    fn raw(&self, path: &Path, n: usize) -> Vec<(TrackPoint, C64, [C64; 3])> {
        accumulate(self.params.rho, path, n, |p| self.phi(&ChartPoint::from_zw(p.z, p.w)))
    }

    fn total(&self, path: &Path) -> [f64; 3] {
        re3(&self.raw(path, AUX_SAMPLES).last().expect("nonempty path").2)
    }

    fn total_named(&self, name: PathName) -> Result<[f64; 3]> {
        Ok(self.total(&self.path(name)?))
    }

    /// Image of the h-diagonal midpoint, via the axis from `O` to `z = i`.
    pub fn x_h_mid(&self) -> [f64; 3] {
        let p = Path {
            name: PathName::H1,
            segments: vec![Segment {
                track: Track::Axis {
                    vertical: false,
                    sheet: 1.0,
                    tmap: TMap::FromZero { t1: 1.0 },
                },
                reversed: false,
                rp: false,
            }],
            start: Start::O,
        };
        self.total(&p)
    }

    /// Image of the start point of a path.
    pub fn start_x(&self, start: Start) -> Result<[f64; 3]> {
        Ok(match start {
            Start::O => [0.0; 3],
            Start::B => self.total_named(PathName::E)?,
            Start::BHat => add3(self.total_named(PathName::E)?, self.total_named(PathName::C)?),
            Start::OPrime => add3(self.start_x(Start::BHat)?, self.total_named(PathName::EHat)?),
            Start::OffMid => sub3(self.x_h_mid(), self.total_named(PathName::I)?),
            Start::VertexV => {
                let d = self.total_named(PathName::DCut)?;
                [-d[0], -d[1], -d[2]]
            }
            Start::H1End => self.total_named(PathName::H1)?,
            Start::H2End => add3(self.start_x(Start::OPrime)?, self.total_named(PathName::H2)?),
        })
    }

    /// Cumulative `X` along a named path with `n` samples.
    pub fn integrate_x(&self, name: PathName, n: usize) -> Result<Vec<XSample>> {
        if n < 2 {
            return Err(Error::Config("need at least two samples".into()));
        }
        let path = self.path(name)?;
        let u0 = start_u(
            &self.chart,
            &path,
            self.params.lambda,
            self.cutoff,
            &QuadratureSpec::precise(),
        )?;
        let x0 = self.start_x(path.start)?;
        Ok(self
            .raw(&path, n)
            .into_iter()
            .map(|(p, u, v)| XSample {
                base: crate::torus::TorusSample {
                    u: u0 + u,
                    z: p.z,
                    w: p.w,
                    sheet: 1,
                },
                x: add3(x0, re3(&v)),
            })
            .collect())
    }

    /// `Re` of the loop integral of `Phi` around the puncture.
    pub fn contour_period_alpha(&self) -> Result<[f64; 3]> {
        self.total_named(PathName::Alpha)
    }

    /// `Re int_I dh` against `F`.
    pub fn period_residual_i(&self, spec: &QuadratureSpec) -> Result<ResidualComparison> {
        let direct = self.total_named(PathName::I)?[2];
        let reduced = f_integral(self.params.rho, self.params.big_lambda, spec)?;
        Ok(self.compare(direct, reduced))
    }

    /// `Re int_II phi2` against `G`.
    pub fn period_residual_ii(&self, spec: &QuadratureSpec) -> Result<ResidualComparison> {
        let direct = self.total_named(PathName::II)?[1];
        let reduced = g_integral(self.params.rho, self.params.big_lambda, spec)?;
        Ok(self.compare(direct, reduced))
    }

    fn compare(&self, direct: f64, reduced: f64) -> ResidualComparison {
        ResidualComparison {
            direct,
            reduced,
            ratio: direct / reduced,
            expected_ratio: self.params.lambda * self.params.rho.cos().sqrt() / 2.0,
        }
    }

    pub fn period_b_check(&self) -> Result<PeriodBCheck> {
        Ok(PeriodBCheck {
            period_b: self.total_named(PathName::B)?,
            d_cut: self.total_named(PathName::DCut)?,
            alpha1: self.total_named(PathName::Alpha1)?,
        })
    }

    /// `d(Re int dh)/dtau` at `n` interior samples of path II.
    pub fn dh_rate_on_ii(&self, n: usize) -> Result<Vec<f64>> {
        let path = self.path(PathName::II)?;
        let seg = path.segments[0];
        (1..=n)
            .map(|k| {
                let tau = k as f64 / (n + 1) as f64;
                let p = seg.at(self.params.rho, tau);
                Ok((height_differential(p.z, self.params.lambda)? * p.du).re)
            })
            .collect()
    }

    fn flow_x(&self, from: &FlowPoint, to: C64) -> Result<FlowPoint> {
        flow(self.params.rho, from, to, &|p: &ChartPoint| self.phi(p), &self.ode)
    }

    /// Flow point at the h-diagonal midpoint, carrying its image.
    pub fn h_mid_point(&self) -> FlowPoint {
        let h = self.chart.anchor("h_mid");
        FlowPoint {
            u: h.u,
            p: ChartPoint::from_zw(h.z, h.w),
            x: self.x_h_mid(),
        }
    }

    /// `X` at an arbitrary point of the closed rectangle `D`, by flowing from
    /// the h-diagonal midpoint along a straight segment.
    pub fn x_at(&self, u: C64) -> Result<FlowPoint> {
        self.flow_x(&self.h_mid_point(), u)
    }

    /// Compares `X` at `m(p)` with the expected Euclidean image of `X(p)` for
    /// random interior points of `D`; each image is reached by an independent route.
    pub fn symmetry_pullback_check(&self, count: usize, seed: u64) -> Result<PullbackReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lh, lv) = (self.chart.l_h, self.chart.l_v);
        let up = self.chart.anchor("puncture").u;
        let mut pts = Vec::with_capacity(count);
        while pts.len() < count {
            let x = rng.gen_range(0.02..0.98) * lh;
            let y = rng.gen_range(0.02..0.98) * 0.5 * lv;
            let u = RhombusChart::from_d_coords(x, y);
            if (u - up).norm() > 0.05 * lh {
                pts.push(u);
            }
        }
        let h = self.h_mid_point();
        let bq = self.chart.anchor("b");
        let b = FlowPoint {
            u: bq.u,
            p: ChartPoint::from_zw(bq.z, bq.w),
            x: self.start_x(Start::B)?,
        };
        // r_P image of the midpoint via the opposite sheet of the h-diagonal
        let neg_h = {
            let p = Path {
                name: PathName::H1,
                segments: vec![Segment {
                    track: Track::Axis {
                        vertical: false,
                        sheet: -1.0,
                        tmap: TMap::FromZero { t1: 1.0 },
                    },
                    reversed: false,
                    rp: false,
                }],
                start: Start::O,
            };
            let s = apply_symmetry(
                &self.chart,
                Symmetry::RP,
                &crate::torus::TorusSample {
                    u: h.u,
                    z: h.p.z(),
                    w: h.p.w(),
                    sheet: 0,
                },
            );
            FlowPoint {
                u: s.u,
                p: ChartPoint::from_zw(s.z, s.w),
                x: self.total(&p),
            }
        };
        let rows: Vec<Result<[f64; 3]>> = pts
            .par_iter()
            .map(|&u| {
                let xp = self.flow_x(&h, u)?.x;
                let scale = 1.0 + norm3(xp);
                let xm = self.flow_x(&h, I * u.conj())?.x;
                let xv = self.flow_x(&b, -I * u.conj())?.x;
                let xr = self.flow_x(&neg_h, -u)?.x;
                Ok([
                    norm3(sub3(xm, [-xp[0], xp[1], -xp[2]])) / scale,
                    norm3(sub3(xv, [-xp[0], -xp[1], xp[2]])) / scale,
                    norm3(sub3(xr, [xp[0], -xp[1], -xp[2]])) / scale,
                ])
            })
            .collect();
        let mut max_dev = [0.0f64; 3];
        let mut violations = Vec::new();
        for (k, row) in rows.into_iter().enumerate() {
            let row = row?;
            for i in 0..3 {
                max_dev[i] = max_dev[i].max(row[i]);
                if row[i] > 1e-8 {
                    let name = ["mu", "mu_vert", "r_P"][i];
                    violations.push(format!("{name} at sample {k}: deviation {:.3e}", row[i]));
                }
            }
        }
        Ok(PullbackReport {
            samples: count,
            max_dev,
            violations,
        })
    }

    /// Argument-principle count of zeros and poles of `g` on the torus.
    ///
    /// The fundamental region `{x0 - L_h <= x <= x0 + L_h, |y| <= L_v/2}` (in
    /// `D`-coordinates) is split at `x = x0` and `x = x0 + L_h`; both halves
    /// are traversed by the flow and the winding of `g` is accumulated.
    pub fn degree_count(&self, per_side: usize) -> Result<DegreeCount> {
        let (lh, lv) = (self.chart.l_h, self.chart.l_v);
        let (xv, _) = RhombusChart::d_coords(self.chart.anchor("vertical").u);
        let x0 = 0.5 * xv;
        let corners = |xa: f64, xb: f64| {
            [
                RhombusChart::from_d_coords(xa, -0.5 * lv),
                RhombusChart::from_d_coords(xb, -0.5 * lv),
                RhombusChart::from_d_coords(xb, 0.5 * lv),
                RhombusChart::from_d_coords(xa, 0.5 * lv),
            ]
        };
        let mut windings = Vec::new();
        for (xa, xb) in [(x0, x0 + lh), (x0 - lh, x0)] {
            windings.push(self.winding(&corners(xa, xb), per_side)?);
        }
        let zeros = windings.iter().filter(|w| **w > 0).copied().sum();
        let poles = -windings.iter().filter(|w| **w < 0).copied().sum::<i64>();
        Ok(DegreeCount { zeros, poles })
    }

    fn winding(&self, corners: &[C64; 4], per_side: usize) -> Result<i64> {
        let zero = |_: &ChartPoint| [C64::new(0.0, 0.0); 3];
        let mut cur = crate::torus::locate(&self.chart, corners[0]).map(|s| FlowPoint {
            u: s.u,
            p: ChartPoint::from_zw(s.z, s.w),
            x: [0.0; 3],
        })?;
        let g_of = |fp: &FlowPoint| gauss_chart(&fp.p, self.params.r).g();
        let mut g_prev = g_of(&cur);
        let mut total = 0.0;
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            for j in 1..=per_side {
                let target = a + (b - a) * (j as f64 / per_side as f64);
                cur = flow(self.params.rho, &cur, target, &zero, &self.ode)?;
                let g = g_of(&cur);
                if is_inf(g) || is_inf(g_prev) || g.norm() == 0.0 || g_prev.norm() == 0.0 {
                    return Err(Error::Branch("g has a zero or pole on the counting contour".into()));
                }
                let step = (g / g_prev).arg();
                if step.abs() > FRAC_PI_2 {
                    return Err(Error::Branch(format!("winding step {step:.3} too large; refine")));
                }
                total += step;
                g_prev = g;
            }
        }
        Ok((total / (2.0 * PI)).round() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::E8_BAR;

    const RHO: f64 = 0.710_521_980_045_750_4;
    const LAMBDA: f64 = 0.588_299_530_365_709;

    fn surface() -> Surface {
        Surface::new(SurfaceParams::new(RHO, LAMBDA).unwrap(), &QuadratureSpec::precise()).unwrap()
    }

    #[test]
    fn gauss_map_examples() {
        let r = 1.3;
        assert!((gauss_map(C64::new(0.0, 0.0), r).g() + 1.0).norm() < 1e-15);
        assert_eq!(gauss_map(r * E8, r).g().norm(), 0.0);
        let v = gauss_map(-r * E8, r);
        assert!(v.inverted && is_inf(v.g()));
        for t in [-3.0, -0.2, 0.7, 5.0] {
            assert!((gauss_map(t * E8_BAR, r).g().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn height_differential_examples() {
        let l = 0.6;
        assert_eq!(height_differential(I * l, l).unwrap().norm(), 0.0);
        assert!((height_differential(C64::new(0.0, 0.0), l).unwrap() - E8 * l * l).norm() < 1e-15);
        assert!(height_differential(I / l, l).is_err());
        // imaginary along the h-diagonal direction
        for t in [0.1, 0.9, 3.0] {
            assert!((height_differential(I * t, l).unwrap() * E8).re.abs() < 1e-15);
        }
    }

    #[test]
    fn densities_match_gauss_map_form() {
        let s = surface();
        let p = s.params;
        for (z, w) in [
            (C64::new(0.3, 0.8), None),
            (C64::new(-2.0, 0.5), None),
            (C64::new(0.1, -0.2), None),
            (C64::new(0.0, 0.0), Some(C64::new(0.0, 0.0))),
        ] {
            let w = w.unwrap_or_else(|| (-2.0 * p.rho.cos() / crate::torus::q_of(p.rho, z)).sqrt());
            let ws = s
                .sample(crate::torus::TorusSample {
                    u: C64::new(0.0, 0.0),
                    z,
                    w,
                    sheet: 0,
                })
                .unwrap();
            let g = ws.g.g();
            let dh = ws.dh_du;
            let phi1 = 0.5 * (1.0 / g - g) * dh;
            let phi2 = 0.5 * I * (1.0 / g + g) * dh;
            assert!((ws.phi[0] - phi1).norm() < 1e-12 * (1.0 + phi1.norm()), "{z}");
            assert!((ws.phi[1] - phi2).norm() < 1e-12 * (1.0 + phi2.norm()), "{z}");
            assert!(ws.conformality_residual() < 1e-12);
            assert!(ws.metric_density() > 0.0);
        }
    }

    #[test]
    fn densities_agree_across_charts() {
        let s = surface();
        let z = C64::new(-1.3, 0.4);
        let w = (-2.0 * RHO.cos() / crate::torus::q_of(RHO, z)).sqrt();
        let a = phi_chart(
            &s.params,
            &ChartPoint {
                a: z,
                y_chart: false,
                b: w,
                q_chart: false,
            },
        );
        let b = phi_chart(
            &s.params,
            &ChartPoint {
                a: -1.0 / z,
                y_chart: true,
                b: 1.0 / w,
                q_chart: true,
            },
        );
        for i in 0..3 {
            assert!((a[i] - b[i]).norm() < 1e-13 * (1.0 + a[i].norm()));
        }
    }

    #[test]
    fn boundary_pieces_at_solution() {
        let s = surface();
        let t = s.params.t;
        let e = s.integrate_x(PathName::E, 50).unwrap();
        let a = e.last().unwrap().x[2];
        assert!(a > 0.0);
        assert!(e.windows(2).all(|p| p[1].x[2] > p[0].x[2]));
        for p in &e {
            assert!(p.x[0].abs() < 1e-9 && p.x[1].abs() < 1e-9);
        }
        let c = s.integrate_x(PathName::C, 50).unwrap();
        let end = c.last().unwrap().x;
        assert!(
            (end[2] + a).abs() < 1e-9 && end[0].abs() < 1e-9 && end[1].abs() < 1e-9,
            "{end:?}"
        );
        let h1 = s.integrate_x(PathName::H1, 60).unwrap();
        for p in &h1 {
            assert!(p.x[0].abs() < 1e-9 && p.x[2].abs() < 1e-9);
        }
        assert!(h1.windows(2).all(|p| p[1].x[1] < p[0].x[1]));
        let o_prime = s.start_x(Start::OPrime).unwrap();
        assert!((o_prime[2] + t / 2.0).abs() < 1e-9 * t, "{o_prime:?}");
        let h2 = s.integrate_x(PathName::H2, 60).unwrap();
        for p in &h2 {
            assert!(p.x[0].abs() < 1e-9 && (p.x[2] + t / 2.0).abs() < 1e-9);
            assert!(p.x[1] >= -1e-12);
        }
    }

    #[test]
    fn alpha_period_is_vertical_translation() {
        let s = surface();
        let t = s.params.t;
        let p = s.contour_period_alpha().unwrap();
        assert!(p[0].abs() < 1e-9 * t && p[1].abs() < 1e-9 * t, "{p:?}");
        assert!((p[2] - t).abs() < 1e-9 * t, "{p:?} vs {t}");
    }

    #[test]
    fn b_period_and_cut() {
        let s = surface();
        let t = s.params.t;
        let b = s.period_b_check().unwrap();
        for v in b.period_b {
            assert!(v.abs() < 1e-9 * t, "{:?}", b.period_b);
        }
        assert!((b.d_cut[2] + t / 2.0).abs() < 1e-9 * t, "{:?}", b.d_cut);
        assert!(b.alpha1[0].abs() < 1e-9 * t);
        assert!((b.alpha1[2].abs() - t / 2.0).abs() < 1e-9 * t, "{:?}", b.alpha1);
    }

    #[test]
    fn direct_residuals_track_reduced_integrals() {
        let spec = QuadratureSpec::precise();
        for (rho, big_lambda) in [(0.5, 3.0), (0.3, 2.2), (1.0, 2.05)] {
            let p = SurfaceParams::from_big_lambda(rho, big_lambda).unwrap();
            let s = Surface::new(p, &spec).unwrap();
            for r in [
                s.period_residual_i(&spec).unwrap(),
                s.period_residual_ii(&spec).unwrap(),
            ] {
                assert!(r.direct.signum() == r.reduced.signum());
                assert!((r.ratio / r.expected_ratio - 1.0).abs() < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn dh_on_ii_is_positive_for_large_lambda() {
        let p = SurfaceParams::diagnostic(RHO, 1.5).unwrap();
        let s = Surface {
            params: p,
            chart: RhombusChart::build(RHO, &QuadratureSpec::default()).unwrap(),
            cutoff: DEFAULT_CUTOFF,
            ode: Dopri5::default(),
        };
        assert!(s.dh_rate_on_ii(200).unwrap().iter().all(|v| *v > 0.0));
        let s = surface();
        assert!(s.dh_rate_on_ii(200).unwrap().iter().all(|v| *v < 0.0));
    }

    #[test]
    fn pullbacks_hold() {
        let s = surface();
        let rep = s.symmetry_pullback_check(8, 7).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    }

    #[test]
    fn gauss_map_has_degree_two() {
        let d = surface().degree_count(400).unwrap();
        assert_eq!((d.zeros, d.poles), (2, 2));
    }

    #[test]
    fn flow_and_tracks_agree_on_x() {
        // two routes to b: along E, and by flowing from the midpoint
        let s = surface();
        let xe = s.start_x(Start::B).unwrap();
        let xf = s.x_at(s.chart.anchor("b").u).unwrap().x;
        assert!(norm3(sub3(xe, xf)) < 1e-9);
    }
}
