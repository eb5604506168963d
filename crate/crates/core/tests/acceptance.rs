//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the summary is always printed; exits nonzero on any failure.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use common::{oracle_f, oracle_g, oracle_lambda};
use helicoid::periods::{self, f_integral};
use helicoid::quadrature::integrate;
use helicoid::verify::{self, Context, VerificationReport, VerifyOptions};
use helicoid::QuadratureSpec;

struct Line {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn from_checks(rep: &VerificationReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        match rep.check(n) {
            Some(c) => {
                ok &= c.passed;
                parts.push(format!(
                    "{n}={:.3e}{}",
                    c.quantity,
                    if c.passed { "" } else { " FAILED" }
                ));
            }
            None => {
                ok = false;
                parts.push(format!("{n} missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

fn main() {
    let spec = QuadratureSpec::precise();
    let mut lines = Vec::new();

    // 1: solver, timed, cross-checked against the Simpson oracle
    let start = Instant::now();
    let sol = periods::solve_default();
    let secs = start.elapsed().as_secs_f64();
    let sol = match sol {
        Ok(s) => s,
        Err(e) => {
            println!("criterion  1 FAIL solver: {e}");
            std::process::exit(1);
        }
    };
    let p = sol.params;
    let oracle_res = oracle_g(p.rho, oracle_lambda(p.rho))
        .abs()
        .max(oracle_f(p.rho, p.big_lambda).abs());
    lines.push(Line {
        id: 1,
        title: "solver success",
        passed: p.rho > 0.0
            && p.rho < FRAC_PI_2
            && p.lambda > 0.0
            && p.lambda < 1.0
            && sol.residual_f.abs() < 1e-9
            && sol.residual_g.abs() < 1e-9
            && oracle_res < 1e-9
            && secs < 30.0,
        detail: format!(
            "rho0={:.15} lambda0={:.15} |F|={:.1e} |G|={:.1e} oracle={:.1e} time={secs:.2}s",
            p.rho,
            p.lambda,
            sol.residual_f.abs(),
            sol.residual_g.abs(),
            oracle_res
        ),
    });

    let opts = VerifyOptions {
        timings: false,
        ..VerifyOptions::default()
    };
    let ctx = Context::build(sol, opts).expect("verification context");
    let rep = verify::run_all(&ctx);

    // 2: brackets, with the oracle agreeing on every sign
    let (mut ok, d) = from_checks(&rep, &["bracket_signs"]);
    for rho in [0.2f64, 0.7, 1.2] {
        ok &= oracle_f(rho, 2.0 + 1e-6) > 0.0 && oracle_f(rho, 2.0 / rho.sin() - 1e-6) < 0.0;
        ok &= f_integral(rho, 2.0 + 1e-6, &spec).is_ok_and(|v| v > 0.0);
    }
    lines.push(Line {
        id: 2,
        title: "bracket signs and monotonicity",
        passed: ok,
        detail: d,
    });

    let groups: [(usize, &str, &[&str]); 6] = [
        (3, "Lambda(rho) certificate", &["lambda_curve_bounds"]),
        (4, "near-end constants", &["near_end_constants"]),
        (
            5,
            "impossibility for rho <= 0 and lambda > 1",
            &["g_sign_for_nonpositive_rho", "dh_positive_on_ii_for_lambda_gt_1"],
        ),
        (6, "period closure", &["alpha_period", "b_period_and_cut"]),
        (7, "direct vs reduced periods", &["direct_vs_reduced"]),
        (8, "symmetry pullbacks", &["symmetry_pullbacks"]),
    ];
    for (id, title, names) in groups {
        let (passed, detail) = from_checks(&rep, names);
        lines.push(Line {
            id,
            title,
            passed,
            detail,
        });
    }
    let (passed, detail) = from_checks(
        &rep,
        &[
            "x3_decreasing_on_c",
            "c_convex",
            "graph_disjointness",
            "boundary_pieces",
        ],
    );
    lines.push(Line {
        id: 9,
        title: "embeddedness spot checks",
        passed,
        detail,
    });
    let (passed, detail) = from_checks(&rep, &["mesh_integrity", "boundary_pieces"]);
    lines.push(Line {
        id: 10,
        title: "mesh integrity",
        passed,
        detail,
    });

    // 11: quadrature engine
    let a = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &spec)
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    let b = integrate(|x: f64| 1.0 / x.sin().sqrt(), 0.0, FRAC_PI_2, &spec)
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    let beta = 2.622_057_554_292_119_8;
    let ea = (a - 2.0).abs();
    let eb = (b - beta).abs() / beta;
    lines.push(Line {
        id: 11,
        title: "quadrature engine",
        passed: ea < 1e-12 && eb < 1e-10,
        detail: format!("|I1-2|={ea:.1e} rel err beta={eb:.1e}"),
    });

    let mut failed = 0;
    for l in &lines {
        let tag = if l.passed { "PASS" } else { "FAIL" };
        if !l.passed {
            failed += 1;
        }
        println!("criterion {:>2} {tag} {}: {}", l.id, l.title, l.detail);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
