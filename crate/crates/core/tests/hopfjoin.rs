use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rhm_core::exec::Execution;
use rhm_core::hopfjoin::{solve_bvp, solve_many, BvpOptions};
use rhm_core::{Error, HopfJoinSpec};

#[test]
fn symmetric_hopf_passes_through_equator() {
    let spec = HopfJoinSpec::hopf(2, 2, 6.0, 6.0);
    let sol = solve_bvp(&spec, &BvpOptions::default()).unwrap();
    assert!((sol.eval(FRAC_PI_4).unwrap().psi - FRAC_PI_2).abs() < 1e-8);
    assert!(sol.boundary_error.abs() < 1e-8);
    assert!(sol.residual < 1e-6);
    assert!((sol.eval(FRAC_PI_2).unwrap().psi - PI).abs() < 1e-12);
    assert_eq!(sol.eval(0.0).unwrap().psi, 0.0);
}

#[test]
fn eps_robustness() {
    for spec in [HopfJoinSpec::hopf(2, 2, 6.0, 6.0), HopfJoinSpec::join(2, 3, 2.0, 3.0), HopfJoinSpec::join(3, 3, 8.0, 8.0)] {
        let a1 = solve_bvp(&spec, &BvpOptions::default()).unwrap().a;
        let a2 = solve_bvp(&spec, &BvpOptions { eps: 5e-5, ..BvpOptions::default() }).unwrap().a;
        assert!((a1 - a2).abs() < 1e-7, "{spec:?}: {a1} vs {a2}");
    }
}

#[test]
fn range_bounds_hold() {
    let sol = solve_bvp(&HopfJoinSpec::join(3, 3, 8.0, 8.0), &BvpOptions::default()).unwrap();
    for i in 0..=400 {
        let r = sol.eval(FRAC_PI_2 * f64::from(i) / 400.0).unwrap().psi;
        assert!((-1e-12..=FRAC_PI_2 + 1e-12).contains(&r));
    }
}

#[test]
fn missing_bracket_is_reported() {
    let err = solve_bvp(&HopfJoinSpec::hopf(1, 2, 1.0, 2.0), &BvpOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NoBracket { .. }), "{err}");
}

#[test]
fn batch_matches_sequential() {
    let specs = [HopfJoinSpec::hopf(1, 1, 1.0, 1.0), HopfJoinSpec::join(2, 3, 2.0, 3.0), HopfJoinSpec::hopf(3, 3, 3.0, 3.0)];
    let par = solve_many(&specs, &BvpOptions::default());
    let seq = solve_many(&specs, &BvpOptions { exec: Execution::Sequential, ..BvpOptions::default() });
    for (p, s) in par.iter().zip(&seq) {
        assert_eq!(p.as_ref().unwrap().a, s.as_ref().unwrap().a);
    }
}
