use super::*;
use crate::error::Error;
use crate::reference::{tm_nr, tm_rwa};
use std::f64::consts::PI;

fn unit() -> TestFunction {
    TestFunction::gaussian(0.0, 1.0)
}

#[test]
fn fourier_matches_quadrature() {
    let h = TestFunction::new(0.3, 0.8, vec![0.5, -1.0, 0.25, 0.1]).unwrap();
    for u in [-2.0, -0.3, 0.0, 0.9, 3.1] {
        let (a, b) = h.support();
        let q = crate::quadrature::integrate(
            |x| num_complex::Complex64::from_polar(h.eval(x), u * x),
            a,
            b,
            &[h.center],
            1e-14,
        )
        .unwrap();
        assert!((q - h.fourier(u)).norm() < 1e-12, "u = {u}");
    }
}

#[test]
fn principal_value_of_odd_gaussian() {
    let h = TestFunction::new(0.0, 1.0, vec![0.0, 1.0]).unwrap();
    assert!((h.principal_value().unwrap() - (2.0 * PI).sqrt()).abs() < 1e-12);
    assert!(unit().principal_value().unwrap().abs() < 1e-14);
}

#[test]
fn unit_gaussians_converge_to_delta() {
    let r = check_delta_limit(&unit(), &unit(), &unit(), true, &LIMIT_LAMBDAS).unwrap();
    // 2π·h(0)·∫e^{-t²} = 2π√π.
    assert!((r.limit_value.re - 2.0 * PI * PI.sqrt()).abs() < 1e-12);
    assert!(r.monotone);
    assert!(r.ratios().iter().all(|&q| q <= 0.5), "{:?}", r.errors);
    assert!(r.final_relative_error() <= 5e-2);
}

#[test]
fn vanishing_h_at_origin_gives_zero_limit() {
    let h = TestFunction::new(0.0, 1.0, vec![0.0, 0.0, 1.0]).unwrap();
    let g = TestFunction::gaussian(0.5, 1.2);
    let r = check_delta_limit(&unit(), &g, &h, true, &LIMIT_LAMBDAS).unwrap();
    assert_eq!(r.limit_value.norm(), 0.0);
    assert!(r.monotone, "{:?}", r.errors);
    assert!(*r.errors.last().unwrap() < 1e-2);
}

#[test]
fn frequency_mismatch_has_zero_limit() {
    let g = TestFunction::gaussian(0.4, 0.7);
    let r = check_delta_limit(&unit(), &g, &unit(), false, &LIMIT_LAMBDAS).unwrap();
    assert_eq!(r.limit_value.norm(), 0.0);
    assert!(*r.errors.last().unwrap() < 1e-6);
}

#[test]
fn causal_limit_of_even_h_is_half() {
    let plain = check_delta_limit(&unit(), &unit(), &unit(), true, &LIMIT_LAMBDAS).unwrap();
    let causal = check_causal_delta_limit(&unit(), &unit(), &unit(), &LIMIT_LAMBDAS).unwrap();
    assert!((causal.limit_value - plain.limit_value * 0.5).norm() < 1e-12);
    assert!(causal.monotone);
    assert!(causal.ratios().iter().all(|&q| q <= 0.5));
    assert!((causal_ratio(&plain, &causal).unwrap() - 0.5).norm() < 1e-3);
}

#[test]
fn causal_limit_of_odd_h_is_imaginary() {
    let odd = TestFunction::new(0.0, 1.0, vec![0.0, 1.0]).unwrap();
    let r = check_causal_delta_limit(&unit(), &unit(), &odd, &LIMIT_LAMBDAS).unwrap();
    let expected = -(2.0 * PI).sqrt() * PI.sqrt();
    assert!(r.limit_value.re.abs() < 1e-14);
    assert!((r.limit_value.im - expected).abs() < 1e-10);
    assert!(r.final_relative_error() < 5e-2);
}

#[test]
fn causal_ordering_with_later_g_vanishes() {
    let f = TestFunction::gaussian(-3.0, 0.4);
    let g = TestFunction::gaussian(3.0, 0.4);
    let r = check_causal_delta_limit(&f, &g, &unit(), &LIMIT_LAMBDAS).unwrap();
    assert!(r.limit_value.norm() < 1e-20);
    assert!(r.errors.iter().all(|&e| e < 1e-12));
}

#[test]
fn lambda_list_must_decrease() {
    let err = check_delta_limit(&unit(), &unit(), &unit(), true, &[0.1, 0.2]).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
}

#[test]
fn limit_suite_passes() {
    let r = run_limit_suite().unwrap();
    assert!(r.pass, "{}", r.to_json());
}

#[test]
fn identity_suite_passes_on_reference_models() {
    for spec in [tm_rwa(), tm_nr()] {
        let r = run_identity_suite(&spec).unwrap();
        assert!(r.pass, "{}", r.to_json());
        let names: Vec<&str> = r.checks.iter().map(|c| c.check.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
    let rwa = run_identity_suite(&tm_rwa()).unwrap();
    assert!(rwa.checks.iter().any(|c| c.check == "drift_rwa_unprojected"));
}

#[test]
fn identity_suite_refuses_overlapping_supports() {
    let mut spec = tm_nr();
    spec.bath.densities[1] = spec.bath.densities[0].clone();
    let err = run_identity_suite(&spec).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert!(err.to_string().contains("overlap"));
}
