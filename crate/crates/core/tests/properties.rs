use proptest::prelude::*;

use helicoid::cli::{parse_config, CONFIG_KEYS};
use helicoid::periods::f_integral;
use helicoid::quadrature::integrate;
use helicoid::torus::{apply_symmetry, locate, relation_residual, RhombusChart, Symmetry};
use helicoid::QuadratureSpec;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn f_decreases_in_lambda(rho in 0.05f64..1.5, s in 0.01f64..0.99, ds in 0.005f64..0.3) {
        let spec = QuadratureSpec::default();
        let top = (2.0 / rho.sin()).min(8.0);
        let l1 = 2.0 + s * (top - 2.0);
        let l2 = (l1 + ds * (top - 2.0)).min(top - 1e-6 * (top - 2.0));
        prop_assume!(l2 > l1);
        prop_assert!(f_integral(rho, l2, &spec).unwrap() < f_integral(rho, l1, &spec).unwrap());
    }

    #[test]
    fn quadrature_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k in 0.1f64..4.0) {
        let spec = QuadratureSpec::precise();
        let f = |x: f64| x.powf(-0.5) * (k * x).cos();
        let g = |x: f64| (1.0 - x).powf(-0.5) * x * x;
        let lhs = integrate(|x: f64| a * f(x) + b * g(x), 0.0, 1.0, &spec).unwrap().value;
        let rhs = a * integrate(f, 0.0, 1.0, &spec).unwrap().value + b * integrate(g, 0.0, 1.0, &spec).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn config_accepts_known_keys_only(idx in 0usize..CONFIG_KEYS.len(), junk in "[a-z]{3,10}") {
        let key = CONFIG_KEYS[idx];
        let good = format!("{key} = 1\n");
        prop_assert!(parse_config(&good).is_ok());
        prop_assume!(!CONFIG_KEYS.contains(&junk.as_str()));
        let bad = format!("{junk} = 1\n");
        prop_assert!(parse_config(&bad).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symmetries_preserve_the_torus(x in 0.05f64..0.95, y in 0.05f64..0.45) {
        let spec = QuadratureSpec::precise();
        let chart = RhombusChart::build(0.710_521_980_045_750_4, &spec).unwrap();
        let u = RhombusChart::from_d_coords(x * chart.l_h, y * chart.l_v);
        let s = locate(&chart, u).unwrap();
        prop_assert!(relation_residual(chart.rho, s.z, s.w) < 1e-9);
        for m in Symmetry::ALL {
            let t = apply_symmetry(&chart, m, &s);
            prop_assert!(relation_residual(chart.rho, t.z, t.w) < 1e-9, "{:?}", m);
        }
    }
}
