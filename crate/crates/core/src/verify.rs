//! Numerical re-checks of the existence and embeddedness argument, collected
//! into a machine-readable report.
//!
//! Checks marked `diagnostic` confirm impossibility signs outside the surface
//! range; they count towards the exit status like the rest.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::{self, MeshOptions, SurfaceMesh, V3};
use crate::params::SurfaceParams;
use crate::periods::{
    self, f_integral, f_integral_result, g_integrand, lambda_curve_certificate, resolved_sign, solve_lambda_of_rho,
    PeriodSolution,
};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::torus::{PathName, Start};
use crate::weierstrass::{norm3, Surface};

/// Tolerance factor for geometric identities, relative to `T`.
pub const GEOMETRIC_TOL: f64 = 1e-8;
/// Seam and weld tolerance relative to `T`.
pub const WELD_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The statement being checked, in words.
    pub claim: String,
    pub quantity: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub diagnostic: bool,
    pub runtime_ms: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub params: SurfaceParams,
    pub residual_f: f64,
    pub residual_g: f64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<34} {:>6} {:>14} {:>10}  claim\n",
            "check", "result", "quantity", "tolerance"
        );
        for c in &self.checks {
            let tag = if c.passed { "pass" } else { "FAIL" };
            s.push_str(&format!(
                "{:<34} {:>6} {:>14.6e} {:>10.1e}  {}\n",
                c.name, tag, c.quantity, c.tolerance, c.claim
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub spec: QuadratureSpec,
    pub mesh: MeshOptions,
    /// Samples along `C` for the monotonicity and convexity checks.
    pub curve_samples: usize,
    /// Points per side of the rectangular grid for the graph comparison.
    pub omega_side: usize,
    pub pullback_samples: usize,
    pub seed: u64,
    /// Record wall-clock times; off for reproducible reports.
    pub timings: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            spec: QuadratureSpec::precise(),
            mesh: MeshOptions::default(),
            curve_samples: 1001,
            omega_side: 100,
            pullback_samples: 100,
            seed: 20_240_601,
            timings: true,
        }
    }
}

/// Outcome of one check before timing is attached.
struct Outcome {
    quantity: f64,
    tolerance: f64,
    passed: bool,
    detail: String,
}

fn outcome(quantity: f64, tolerance: f64, passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        quantity,
        tolerance,
        passed,
        detail: detail.into(),
    }
}

/// Everything the checks share.
pub struct Context {
    pub solution: PeriodSolution,
    pub surface: Surface,
    pub patch: SurfaceMesh,
    pub opts: VerifyOptions,
}

impl Context {
    pub fn build(solution: PeriodSolution, opts: VerifyOptions) -> Result<Self> {
        let surface = Surface::new(solution.params, &opts.spec)?;
        let patch = mesh::mesh_patch_d(&surface, &opts.mesh)?;
        Ok(Self {
            solution,
            surface,
            patch,
            opts,
        })
    }

    fn t(&self) -> f64 {
        self.surface.params.t
    }
}

type CheckFn = fn(&Context) -> Result<Outcome>;

struct CheckDef {
    name: &'static str,
    claim: &'static str,
    diagnostic: bool,
    run: CheckFn,
}

const CHECKS: &[CheckDef] = &[
    CheckDef {
        name: "solver_residuals",
        claim: "a parameter pair in (0, pi/2) x (0, 1) makes both reduced periods vanish",
        diagnostic: false,
        run: check_solver,
    },
    CheckDef {
        name: "bracket_signs",
        claim: "F > 0 at Lambda = 2+, F < 0 at Lambda = 2/sin(rho)-, F decreasing in Lambda",
        diagnostic: false,
        run: check_brackets,
    },
    CheckDef {
        name: "lambda_curve_bounds",
        claim: "2 < Lambda(rho) < min(2/sin rho, 8), Lambda < 3 - sin rho near pi/2, F(rho, 8) < 0",
        diagnostic: false,
        run: check_lambda_curve,
    },
    CheckDef {
        name: "near_end_constants",
        claim: "the two limit constants -1.2067 and 1.1547 and their negative sum",
        diagnostic: false,
        run: check_near_end,
    },
    CheckDef {
        name: "g_sign_for_nonpositive_rho",
        claim: "the G integrand has constant sign when rho <= 0",
        diagnostic: true,
        run: check_g_sign,
    },
    CheckDef {
        name: "dh_positive_on_ii_for_lambda_gt_1",
        claim: "Re dh along II is positive when lambda > 1",
        diagnostic: true,
        run: check_lambda_gt_one,
    },
    CheckDef {
        name: "alpha_period",
        claim: "the period around the puncture is the vertical vector (0, 0, T)",
        diagnostic: false,
        run: check_alpha,
    },
    CheckDef {
        name: "b_period_and_cut",
        claim: "the B cycle closes; the v-diagonal cut has height -T/2; alpha1 has no x1 part",
        diagnostic: false,
        run: check_b,
    },
    CheckDef {
        name: "direct_vs_reduced",
        claim: "direct path periods equal lambda sqrt(cos rho)/2 times F and G",
        diagnostic: false,
        run: check_direct,
    },
    CheckDef {
        name: "symmetry_pullbacks",
        claim: "X composed with mu, mu_vert, r_P equals the matching Euclidean motion of X",
        diagnostic: false,
        run: check_pullbacks,
    },
    CheckDef {
        name: "gauss_map_degree",
        claim: "the Gauss map has two zeros and two poles on the torus",
        diagnostic: false,
        run: check_degree,
    },
    CheckDef {
        name: "x3_decreasing_on_c",
        claim: "x3 decreases strictly from a to -a along C",
        diagnostic: false,
        run: check_x3_monotone,
    },
    CheckDef {
        name: "x3_increasing_on_ii_lambda_gt_1",
        claim: "x3 increases along II when lambda > 1",
        diagnostic: true,
        run: check_x3_lambda_gt_one,
    },
    CheckDef {
        name: "c_convex",
        claim:
            "the projected curve c is convex, closed at the origin, symmetric, in x1 <= 0, with turning in (pi, 2pi)",
        diagnostic: false,
        run: check_c_convex,
    },
    CheckDef {
        name: "graph_disjointness",
        claim: "spot check: the reflected graph lies strictly above the graph off c and meets it on c",
        diagnostic: false,
        run: check_graph,
    },
    CheckDef {
        name: "boundary_pieces",
        claim: "the images of E, E_hat, H1, H2, C are the stated axis segments and rays",
        diagnostic: false,
        run: check_boundary,
    },
    CheckDef {
        name: "mesh_integrity",
        claim: "patch in the slab, seams and stacked copies weld, exports round-trip",
        diagnostic: false,
        run: check_mesh,
    },
];

/// Names of all checks in report order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// Run every check concurrently; the report keeps declaration order.
pub fn run_all(ctx: &Context) -> VerificationReport {
    run_selected(ctx, &check_names())
}

pub fn run_selected(ctx: &Context, names: &[&str]) -> VerificationReport {
    let defs: Vec<&CheckDef> = CHECKS.iter().filter(|c| names.contains(&c.name)).collect();
    let checks = defs
        .par_iter()
        .map(|d| {
            let start = Instant::now();
            let out = (d.run)(ctx).unwrap_or_else(|e| outcome(f64::NAN, f64::NAN, false, format!("error: {e}")));
            let runtime_ms = if ctx.opts.timings {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            Check {
                name: d.name.into(),
                claim: d.claim.into(),
                quantity: out.quantity,
                tolerance: out.tolerance,
                passed: out.passed,
                diagnostic: d.diagnostic,
                runtime_ms,
                detail: out.detail,
            }
        })
        .collect();
    VerificationReport {
        params: ctx.solution.params,
        residual_f: ctx.solution.residual_f,
        residual_g: ctx.solution.residual_g,
        checks,
    }
}

fn check_solver(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.solution;
    let p = s.params;
    let worst = s.residual_f.abs().max(s.residual_g.abs());
    let ok = p.rho > 0.0 && p.rho < FRAC_PI_2 && p.lambda > 0.0 && p.lambda < 1.0 && worst < 1e-9;
    Ok(outcome(
        worst,
        1e-9,
        ok,
        format!(
            "rho0 = {:.15}, lambda0 = {:.15}, sign changes: {}",
            p.rho,
            p.lambda,
            s.sign_changes.len()
        ),
    ))
}

/// Bracket signs and monotonicity of `F` in `Lambda` at the given `rho` values.
pub fn bracket_report(rhos: &[f64], spec: &QuadratureSpec) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for &rho in rhos {
        let lo = f_integral_result(rho, 2.0 + 1e-6, spec)?;
        let hi = f_integral_result(rho, 2.0 / rho.sin() - 1e-6, spec)?;
        let signs = resolved_sign(&lo) == Some(1.0) && resolved_sign(&hi) == Some(-1.0);
        let (a, b) = (2.0 + 1e-6, 2.0 / rho.sin() - 1e-6);
        let vals = (0..10)
            .map(|k| f_integral(rho, a + (b - a) * k as f64 / 9.0, spec))
            .collect::<Result<Vec<_>>>()?;
        let mono = vals.windows(2).all(|w| w[1] < w[0]);
        ok &= signs && mono;
        detail.push(format!(
            "rho {rho}: F(2+) = {:.3e}, F(2/sin-) = {:.3e}, decreasing {mono}",
            lo.value, hi.value
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn check_brackets(ctx: &Context) -> Result<Outcome> {
    let (ok, detail) = bracket_report(&[0.2, 0.7, 1.2], &ctx.opts.spec)?;
    Ok(outcome(if ok { 0.0 } else { 1.0 }, 0.0, ok, detail))
}

fn check_lambda_curve(ctx: &Context) -> Result<Outcome> {
    let mut grid = periods::rho_grid(periods::DEFAULT_GRID);
    grid.extend([1.45, 1.5, 1.55]);
    let rep = lambda_curve_certificate(&grid, &ctx.opts.spec)?;
    let bad: Vec<String> = rep
        .points
        .iter()
        .filter(|p| !p.passed)
        .map(|p| format!("{:.4}", p.rho))
        .collect();
    let near: Vec<String> = rep
        .points
        .iter()
        .filter(|p| [1.45, 1.5, 1.55].contains(&p.rho))
        .map(|p| format!("Lambda({}) = {:.9}", p.rho, p.big_lambda))
        .collect();
    Ok(outcome(
        bad.len() as f64,
        0.0,
        rep.passed,
        format!(
            "{} points, failing at [{}]; {}",
            rep.points.len(),
            bad.join(", "),
            near.join(", ")
        ),
    ))
}

/// The constants of the near-`pi/2` estimate and their quadrature counterparts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NearEndConstants {
    /// `2 (1 - sqrt(1 + pi/2))`.
    pub first: f64,
    /// `-int_{-pi/2}^0 (1 - phi)^{-1/2}` by quadrature.
    pub first_quadrature: f64,
    /// `int_{-pi/2}^0 (1 - sin phi)^{-1/2}`, the limit being bounded.
    pub limit_integral: f64,
    /// `4 sqrt(3/2) / (3 sqrt 2)`.
    pub second: f64,
    /// `(4/3) sqrt(3/2) / sqrt(1 + sin rho)` at `rho = 1.5`, approaching `second`.
    pub second_at_rho: f64,
    /// Relative defect of the moment identity used for the second bound, at `rho = 1.5`.
    pub identity_defect: f64,
}

pub fn near_end_constants(spec: &QuadratureSpec) -> Result<NearEndConstants> {
    let first = 2.0 * (1.0 - (1.0 + FRAC_PI_2).sqrt());
    let first_quadrature = -integrate(|p| 1.0 / (1.0 - p).sqrt(), -FRAC_PI_2, 0.0, spec)?.checked()?;
    let limit_integral = integrate(|p| 1.0 / (1.0 - p.sin()).sqrt(), -FRAC_PI_2, 0.0, spec)?.checked()?;
    let second = 4.0 * 1.5f64.sqrt() / (3.0 * 2f64.sqrt());
    let rho: f64 = 1.5;
    let second_at_rho = 4.0 * 1.5f64.sqrt() / (3.0 * (1.0 + rho.sin()).sqrt());
    // int_{phi}^{rho} (sin t - sin phi) cos t / sqrt(sin rho - sin t) dt = (4/3)(sin rho - sin phi)^{3/2}
    let big_lambda = solve_lambda_of_rho(rho, spec, 1e-13)?;
    let s_phi = 2.0 * rho.sin() - 0.5 * big_lambda;
    let phi = s_phi.asin();
    let lhs = crate::quadrature::integrate_offsets(
        |a: crate::quadrature::Abscissa| {
            let t = a.x;
            let d = periods::sin_diff(rho, t, a.to_b);
            (t.sin() - s_phi) * t.cos() / d.sqrt()
        },
        phi,
        rho,
        spec,
    )?
    .checked()?;
    let rhs = 4.0 / 3.0 * (rho.sin() - s_phi).powf(1.5);
    Ok(NearEndConstants {
        first,
        first_quadrature,
        limit_integral,
        second,
        second_at_rho,
        identity_defect: (lhs / rhs - 1.0).abs(),
    })
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn check_near_end(ctx: &Context) -> Result<Outcome> {
    let c = near_end_constants(&ctx.opts.spec)?;
    let ok = round4(c.first) == -1.2067
        && round4(c.first_quadrature) == -1.2067
        && (c.first - c.first_quadrature).abs() < 1e-12
        && -c.limit_integral <= c.first
        && round4(c.second) == 1.1547
        && c.second_at_rho >= c.second
        && c.identity_defect < 1e-10
        && c.first + c.second < 0.0;
    Ok(outcome(
        c.first + c.second,
        0.0,
        ok,
        format!(
            "first {:.10}, by quadrature {:.10}, limit integral {:.10}, second {:.10}, identity defect {:.1e}",
            c.first, c.first_quadrature, c.limit_integral, c.second, c.identity_defect
        ),
    ))
}

/// Whether the `G` integrand keeps one sign at `n` interior abscissae.
pub fn g_integrand_constant_sign(rho: f64, big_lambda: f64, n: usize) -> bool {
    let vals: Vec<f64> = (1..=n)
        .map(|k| {
            let phi = -FRAC_PI_2 + (rho + FRAC_PI_2) * k as f64 / (n + 1) as f64;
            g_integrand(rho, big_lambda, phi)
        })
        .collect();
    vals.iter().all(|v| *v > 0.0) || vals.iter().all(|v| *v < 0.0)
}

fn check_g_sign(_ctx: &Context) -> Result<Outcome> {
    let mut bad = Vec::new();
    for rho in [-0.5, -0.1, 0.0] {
        for big_lambda in [2.0 + 1e-6, 2.5, 4.0, 8.0] {
            if !g_integrand_constant_sign(rho, big_lambda, 200) {
                bad.push(format!("({rho}, {big_lambda})"));
            }
        }
    }
    Ok(outcome(
        bad.len() as f64,
        0.0,
        bad.is_empty(),
        format!("sign changes at [{}]", bad.join(", ")),
    ))
}

fn diagnostic_surface(rho: f64, lambda: f64, spec: &QuadratureSpec) -> Result<Surface> {
    Surface::new(SurfaceParams::diagnostic(rho, lambda)?, spec)
}

fn check_lambda_gt_one(ctx: &Context) -> Result<Outcome> {
    let rho0 = ctx.surface.params.rho;
    let mut min_rate = f64::INFINITY;
    for rho in [rho0 - 0.01, rho0, rho0 + 0.01] {
        let s = diagnostic_surface(rho, 1.5, &ctx.opts.spec)?;
        min_rate = s.dh_rate_on_ii(200)?.into_iter().fold(min_rate, f64::min);
    }
    Ok(outcome(
        min_rate,
        0.0,
        min_rate > 0.0,
        "smallest Re dh/dtau over 600 samples",
    ))
}

fn check_alpha(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let p = ctx.surface.contour_period_alpha()?;
    let horiz = p[0].abs().max(p[1].abs()) / t;
    let rel = (p[2] - t).abs() / t;
    let q = horiz.max(rel);
    Ok(outcome(q, 1e-6, q < 1e-6, format!("period {p:?}, T = {t:.15}")))
}

fn check_b(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let b = ctx.surface.period_b_check()?;
    let pb = b.period_b.iter().fold(0.0f64, |m, v| m.max(v.abs())) / t;
    let cut = (b.d_cut[2] + t / 2.0).abs() / (t / 2.0);
    let a1 = (b.alpha1[0].abs() / t).max((b.alpha1[2].abs() - t / 2.0).abs() / (t / 2.0));
    let q = pb.max(cut).max(a1);
    Ok(outcome(
        q,
        1e-6,
        q < 1e-6,
        format!("B period {:?}, cut {:?}, alpha1 {:?}", b.period_b, b.d_cut, b.alpha1),
    ))
}

/// Generic parameter points for the direct/reduced comparison.
pub const DIRECT_POINTS: [(f64, f64); 5] = [(0.5, 3.0), (0.3, 2.2), (1.0, 2.05), (0.9, 2.4), (0.2, 4.0)];

fn check_direct(ctx: &Context) -> Result<Outcome> {
    let spec = &ctx.opts.spec;
    let mut worst = 0.0f64;
    let mut signs = true;
    for (rho, big_lambda) in DIRECT_POINTS {
        let s = Surface::new(SurfaceParams::from_big_lambda(rho, big_lambda)?, spec)?;
        for r in [s.period_residual_i(spec)?, s.period_residual_ii(spec)?] {
            signs &= r.direct.signum() == r.reduced.signum();
            worst = worst.max((r.ratio / r.expected_ratio - 1.0).abs());
        }
    }
    Ok(outcome(
        worst,
        1e-5,
        signs && worst < 1e-5,
        format!("signs agree: {signs}"),
    ))
}

fn check_pullbacks(ctx: &Context) -> Result<Outcome> {
    let rep = ctx
        .surface
        .symmetry_pullback_check(ctx.opts.pullback_samples, ctx.opts.seed)?;
    let q = rep.max_dev.iter().copied().fold(0.0, f64::max);
    Ok(outcome(
        q,
        GEOMETRIC_TOL,
        q < GEOMETRIC_TOL,
        format!("{} samples, max deviation per map {:?}", rep.samples, rep.max_dev),
    ))
}

fn check_degree(ctx: &Context) -> Result<Outcome> {
    let d = ctx.surface.degree_count(400)?;
    let ok = d.zeros == 2 && d.poles == 2;
    Ok(outcome(
        d.zeros as f64,
        0.0,
        ok,
        format!("zeros {}, poles {}", d.zeros, d.poles),
    ))
}

/// Largest step increase of `x3` along a sampled path (negative when strictly decreasing).
fn max_step_increase(xs: &[V3]) -> f64 {
    xs.windows(2)
        .map(|w| w[1][2] - w[0][2])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_x3_monotone(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let n = ctx.opts.curve_samples.max(101) | 1;
    let c = ctx.surface.integrate_x(PathName::C, n)?;
    let xs: Vec<V3> = c.iter().map(|p| p.x).collect();
    let a = ctx.surface.start_x(Start::B)?[2];
    let worst = max_step_increase(&xs);
    let mid = xs[xs.len() / 2][2];
    let ends = (xs[0][2] - a).abs().max((xs[xs.len() - 1][2] + a).abs());
    let ok = worst < 0.0 && ends < GEOMETRIC_TOL * t && mid.abs() < GEOMETRIC_TOL * t;
    Ok(outcome(
        worst,
        0.0,
        ok,
        format!(
            "{} samples, a = {a:.12}, x3 at the midpoint {mid:.2e}, endpoint error {ends:.2e}",
            xs.len()
        ),
    ))
}

fn check_x3_lambda_gt_one(ctx: &Context) -> Result<Outcome> {
    let s = diagnostic_surface(ctx.surface.params.rho, 1.5, &ctx.opts.spec)?;
    let xs: Vec<V3> = s.integrate_x(PathName::II, 201)?.iter().map(|p| p.x).collect();
    let least = xs.windows(2).map(|w| w[1][2] - w[0][2]).fold(f64::INFINITY, f64::min);
    Ok(outcome(least, 0.0, least > 0.0, "smallest step of x3 along II"))
}

/// Geometry of the projected curve `c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveShape {
    pub points: Vec<[f64; 2]>,
    pub turning: Vec<f64>,
    pub total_turning: f64,
    pub constant_sign: bool,
    pub max_x1: f64,
    pub endpoint_gap: f64,
    pub symmetry_residual: f64,
}

pub fn curve_shape(s: &Surface, n: usize) -> Result<CurveShape> {
    let n = n.max(101) | 1;
    let pts: Vec<[f64; 2]> = s
        .integrate_x(PathName::C, n)?
        .iter()
        .map(|p| [p.x[0], p.x[1]])
        .collect();
    let dirs: Vec<[f64; 2]> = pts
        .windows(2)
        .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
        .filter(|d| d[0].hypot(d[1]) > 0.0)
        .collect();
    let turning: Vec<f64> = dirs
        .windows(2)
        .map(|w| (w[0][0] * w[1][1] - w[0][1] * w[1][0]).atan2(w[0][0] * w[1][0] + w[0][1] * w[1][1]))
        .collect();
    let total_turning = turning.iter().sum::<f64>();
    let constant_sign = turning.iter().all(|t| *t > 0.0) || turning.iter().all(|t| *t < 0.0);
    let max_x1 = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let last = pts[pts.len() - 1];
    let endpoint_gap = pts[0][0].hypot(pts[0][1]).max(last[0].hypot(last[1]));
    let m = pts.len();
    let symmetry_residual = (0..m)
        .map(|k| {
            let (p, q) = (pts[k], pts[m - 1 - k]);
            (p[0] - q[0]).hypot(p[1] + q[1])
        })
        .fold(0.0, f64::max);
    Ok(CurveShape {
        points: pts,
        turning,
        total_turning,
        constant_sign,
        max_x1,
        endpoint_gap,
        symmetry_residual,
    })
}

fn check_c_convex(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let c = curve_shape(&ctx.surface, ctx.opts.curve_samples)?;
    let tol = GEOMETRIC_TOL * t;
    let ok = c.constant_sign
        && c.total_turning.abs() > PI
        && c.total_turning.abs() < 2.0 * PI
        && c.max_x1 <= tol
        && c.endpoint_gap < tol
        && c.symmetry_residual < tol;
    Ok(outcome(
        c.total_turning.abs(),
        0.0,
        ok,
        format!(
            "total turning {:.6}, constant sign {}, max x1 {:.2e}, endpoint gap {:.2e}, symmetry residual {:.2e}",
            c.total_turning, c.constant_sign, c.max_x1, c.endpoint_gap, c.symmetry_residual
        ),
    ))
}

/// Locates points in the projection of a mesh onto the `(x1, x2)`-plane.
pub struct ProjectedLocator<'a> {
    mesh: &'a SurfaceMesh,
    lo: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> ProjectedLocator<'a> {
    /// Buckets cover `[-extent, extent]^2`; triangles outside are ignored.
    pub fn new(mesh: &'a SurfaceMesh, extent: f64, cells: usize) -> Self {
        let lo = [-extent, -extent];
        let cell = 2.0 * extent / cells as f64;
        let mut buckets = vec![Vec::new(); cells * cells];
        for (k, f) in mesh.faces.iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in f {
                let p = mesh.vertices[v];
                for i in 0..2 {
                    a[i] = a[i].min(p[i]);
                    b[i] = b[i].max(p[i]);
                }
            }
            if b[0] < lo[0] || b[1] < lo[1] || a[0] > extent || a[1] > extent {
                continue;
            }
            let idx = |v: f64, l: f64| (((v - l) / cell).floor().max(0.0) as usize).min(cells - 1);
            for i in idx(a[0], lo[0])..=idx(b[0], lo[0]) {
                for j in idx(a[1], lo[1])..=idx(b[1], lo[1]) {
                    buckets[i * cells + j].push(k);
                }
            }
        }
        Self {
            mesh,
            lo,
            cell,
            nx: cells,
            ny: cells,
            buckets,
        }
    }

    /// Linear interpolation of `x3` at `(x1, x2)` and the number of covering triangles.
    pub fn height(&self, q: [f64; 2]) -> (Option<f64>, usize) {
        let i = ((q[0] - self.lo[0]) / self.cell).floor();
        let j = ((q[1] - self.lo[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return (None, 0);
        }
        let mut found = None;
        let mut hits = 0;
        for &k in &self.buckets[i as usize * self.ny + j as usize] {
            let f = self.mesh.faces[k];
            let (a, b, c) = (
                self.mesh.vertices[f[0]],
                self.mesh.vertices[f[1]],
                self.mesh.vertices[f[2]],
            );
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if det == 0.0 {
                continue;
            }
            let l1 = ((q[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (q[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (q[1] - a[1]) - (q[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            let eps = 1e-10;
            if l0 >= -eps && l1 >= -eps && l2 >= -eps {
                if l0 > eps && l1 > eps && l2 > eps {
                    hits += 1;
                }
                if found.is_none() {
                    found = Some(l0 * a[2] + l1 * b[2] + l2 * c[2]);
                }
            }
        }
        (found, hits)
    }
}

fn point_in_polygon(poly: &[[f64; 2]], q: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if q[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn distance_to_polyline(poly: &[[f64; 2]], q: [f64; 2]) -> f64 {
    poly.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let l2 = d[0] * d[0] + d[1] * d[1];
            let t = if l2 == 0.0 {
                0.0
            } else {
                (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
            };
            (q[0] - a[0] - t * d[0]).hypot(q[1] - a[1] - t * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Height of the point of a space polyline whose projection is nearest to `q`.
fn height_on_polyline(poly: &[V3], q: [f64; 2]) -> f64 {
    let mut best = (f64::INFINITY, f64::NAN);
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = if l2 == 0.0 {
            0.0
        } else {
            (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
        };
        let dist = (q[0] - a[0] - t * d[0]).hypot(q[1] - a[1] - t * d[1]);
        if dist < best.0 {
            best = (dist, a[2] + t * (b[2] - a[2]));
        }
    }
    best.1
}

/// Sampled graph comparison over the domain outside `c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphCheckData {
    /// `(x1, x2, F, F_hat, distance to c)` at covered grid points outside `c`.
    pub samples: Vec<[f64; 5]>,
    pub uncovered: usize,
    /// Points covered by more than one projected triangle.
    pub overlaps: usize,
    pub band: f64,
    pub c: Vec<[f64; 2]>,
    /// Largest `|F_hat - F|` at the nodes of `c`.
    pub on_c_gap: f64,
}

pub fn graph_check_data(patch: &SurfaceMesh, side: usize) -> Result<GraphCheckData> {
    let c: Vec<[f64; 2]> = mesh::boundary(patch, "c")?
        .points
        .iter()
        .map(|p| [p[0], p[1]])
        .collect();
    let diam = c
        .iter()
        .flat_map(|p| c.iter().map(move |q| (p[0] - q[0]).hypot(p[1] - q[1])))
        .fold(0.0, f64::max);
    let l = 5.0 * diam;
    let loc = ProjectedLocator::new(patch, 1.05 * l, 256);
    // points closer to c than two spacings of the ring of triangles touching c
    // count as lying on c
    let on_c: Vec<bool> = patch
        .vertices
        .iter()
        .map(|v| distance_to_polyline(&c, [v[0], v[1]]) < 1e-12 * (1.0 + l))
        .collect();
    let radial = patch
        .faces
        .iter()
        .filter(|f| f.iter().any(|&v| on_c[v]))
        .map(|f| {
            let p: Vec<V3> = f.iter().map(|&v| patch.vertices[v]).collect();
            (0..3)
                .map(|k| (p[k][0] - p[(k + 1) % 3][0]).hypot(p[k][1] - p[(k + 1) % 3][1]))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let band = 2.0 * radial;
    let pts: Vec<[f64; 2]> = (0..side)
        .flat_map(|i| {
            (0..side).map(move |j| {
                [
                    -l + (i as f64 + 0.5) * l / side as f64,
                    -l + (j as f64 + 0.5) * 2.0 * l / side as f64,
                ]
            })
        })
        .filter(|q| !point_in_polygon(&c, *q))
        .collect();
    let rows: Vec<Option<([f64; 5], usize)>> = pts
        .par_iter()
        .map(|&q| {
            let (f, hits) = loc.height(q);
            let (fr, hits_r) = loc.height([q[0], -q[1]]);
            match (f, fr) {
                (Some(f), Some(fr)) => Some(([q[0], q[1], f, -fr, distance_to_polyline(&c, q)], hits.max(hits_r))),
                _ => None,
            }
        })
        .collect();
    let mut samples = Vec::new();
    let mut uncovered = 0;
    let mut overlaps = 0;
    for r in rows {
        match r {
            Some((s, hits)) => {
                if hits > 1 {
                    overlaps += 1;
                }
                samples.push(s);
            }
            None => uncovered += 1,
        }
    }
    // on c the patch is steep, so F is read off the boundary curve C; both ends
    // of c sit at the origin, under the vertical axis, and are skipped
    let cpts = &mesh::boundary(patch, "C")?.points;
    let on_c_gap = cpts[1..cpts.len() - 1]
        .iter()
        .map(|p| (-height_on_polyline(cpts, [p[0], -p[1]]) - p[2]).abs())
        .fold(0.0, f64::max);
    Ok(GraphCheckData {
        samples,
        uncovered,
        overlaps,
        band,
        c,
        on_c_gap,
    })
}

fn check_graph(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let g = graph_check_data(&ctx.patch, ctx.opts.omega_side)?;
    let mut worst_off = f64::INFINITY;
    let mut worst_band = f64::INFINITY;
    let mut off_count = 0;
    for s in &g.samples {
        let gap = s[3] - s[2];
        if s[4] > g.band {
            off_count += 1;
            worst_off = worst_off.min(gap);
        } else {
            worst_band = worst_band.min(gap);
        }
    }
    let ok = worst_off > 0.0
        && g.uncovered == 0
        && g.overlaps == 0
        && g.on_c_gap < WELD_TOL * t
        && worst_band > -1e-3 * t
        && g.samples.iter().all(|s| s[0] <= 0.0);
    Ok(outcome(
        worst_off,
        0.0,
        ok,
        format!(
            "{} samples ({} off the band of width {:.3e} around c), uncovered {}, overlaps {}, min gap off c {:.4e}, min gap near c {:.3e}, gap on c {:.2e}",
            g.samples.len(),
            off_count,
            g.band,
            g.uncovered,
            g.overlaps,
            worst_off,
            worst_band,
            g.on_c_gap
        ),
    ))
}

/// Largest deviation of the boundary images from their stated positions, relative to `T`.
pub fn boundary_deviation(s: &Surface, n: usize) -> Result<(f64, String)> {
    let t = s.params.t;
    let a = s.start_x(Start::B)?[2];
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut track = |name: &str, dev: f64| {
        worst = worst.max(dev / t);
        notes.push(format!("{name} {:.2e}", dev / t));
    };
    let xs = |name| -> Result<Vec<V3>> { Ok(s.integrate_x(name, n)?.iter().map(|p| p.x).collect()) };
    let e = xs(PathName::E)?;
    let mono_up = |v: &[V3], k: usize| v.windows(2).map(|w| (w[0][k] - w[1][k]).max(0.0)).fold(0.0, f64::max);
    let mono_down = |v: &[V3], k: usize| v.windows(2).map(|w| (w[1][k] - w[0][k]).max(0.0)).fold(0.0, f64::max);
    let axis = |v: &[V3]| v.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    track("E", axis(&e).max(e[0][2].abs()).max(mono_up(&e, 2)));
    let eh = xs(PathName::EHat)?;
    track(
        "E_hat",
        axis(&eh)
            .max((eh[0][2] + a).abs())
            .max((eh[eh.len() - 1][2] + t / 2.0).abs())
            .max(mono_down(&eh, 2)),
    );
    let h1 = xs(PathName::H1)?;
    track(
        "H1",
        h1.iter()
            .map(|p| p[0].abs().max(p[2].abs()))
            .fold(0.0, f64::max)
            .max(mono_down(&h1, 1)),
    );
    let h2 = xs(PathName::H2)?;
    track(
        "H2",
        h2.iter()
            .map(|p| p[0].abs().max((p[2] + t / 2.0).abs()))
            .fold(0.0, f64::max)
            .max(mono_up(&h2, 1)),
    );
    let c = xs(PathName::C)?;
    let (c0, c1) = (c[0], c[c.len() - 1]);
    track(
        "C",
        norm3([c0[0], c0[1], c0[2] - a]).max(norm3([c1[0], c1[1], c1[2] + a])),
    );
    Ok((worst, notes.join(", ")))
}

fn check_boundary(ctx: &Context) -> Result<Outcome> {
    let t = ctx.t();
    let (dev, notes) = boundary_deviation(&ctx.surface, 201)?;
    let a = ctx.patch.metadata.a;
    let slab = ctx
        .patch
        .vertices
        .iter()
        .map(|p| p[0].max(-t / 2.0 - p[2]).max(p[2] - a))
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = dev < GEOMETRIC_TOL && a > 0.0 && slab <= WELD_TOL * t;
    Ok(outcome(
        dev,
        GEOMETRIC_TOL,
        ok,
        format!("{notes}; a = {a:.12}; slab excess {slab:.2e}"),
    ))
}

/// Largest distance from each point of `from`, shifted by `shift`, to the nearest point of `to`.
pub fn polyline_match(from: &[V3], to: &[V3], shift: V3) -> f64 {
    from.iter()
        .map(|p| {
            let q = [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
            to.iter()
                .map(|r| norm3([r[0] - q[0], r[1] - q[1], r[2] - q[2]]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn check_mesh(ctx: &Context) -> Result<Outcome> {
    let patch = &ctx.patch;
    let t = ctx.t();
    let tol = WELD_TOL * t;
    let fd = mesh::assemble_fundamental_domain(patch)?;
    let stack = mesh::stack_periods(&fd.mesh, 3)?;
    let h2 = &mesh::boundary(&fd.mesh, "H2")?.points;
    let h2_up = &mesh::boundary(&fd.mesh, "sigma_s:H2")?.points;
    let stack_gap = polyline_match(h2, h2_up, [0.0, 0.0, t]);
    let (v, f) = mesh::parse_obj(&mesh::obj_bytes(patch, &[])?)?;
    let obj_err = v
        .iter()
        .zip(&patch.vertices)
        .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs() / b[i].abs().max(1e-300)))
        .fold(0.0, f64::max);
    let obj_ok = f == patch.faces && v.len() == patch.vertices.len() && obj_err <= 5e-9;
    let (pv, pf) = mesh::parse_ply(&mesh::ply_bytes(patch, &[])?)?;
    let ply_ok = pv == patch.vertices && pf == patch.faces;
    let (lo, hi) = stack.mesh.bounding_box();
    let (lo1, hi1) = fd.mesh.bounding_box();
    let height_ok = ((hi[2] - lo[2]) - (hi1[2] - lo1[2]) - 2.0 * t).abs() < tol;
    let q = fd.max_gap.max(stack_gap);
    let ok =
        q < tol && obj_ok && ply_ok && height_ok && fd.mesh.orientation_consistent() && patch.min_face_area() > 0.0;
    Ok(outcome(
        q / t,
        WELD_TOL,
        ok,
        format!(
            "seam gap {:.2e}, stack gap {:.2e}, welded {} of {}, OBJ max rel error {:.1e}, PLY exact {}, stack height ok {}",
            fd.max_gap, stack_gap, fd.merged, fd.input_vertices, obj_err, ply_ok, height_ok
        ),
    ))
}

/// Solve the period problem and run every check.
pub fn verify(opts: VerifyOptions) -> Result<VerificationReport> {
    let sol = periods::solve_period_problem(&opts.spec, periods::DEFAULT_GRID, periods::DEFAULT_ROOT_TOL)?;
    let ctx = Context::build(sol, opts)?;
    Ok(run_all(&ctx))
}
