use std::f64::consts::{FRAC_PI_2, PI};

use rhm_core::asymptotics;
use rhm_core::dirichlet::{
    critical_values_of, default_r_grid, profile_residuals, solve_with, trace_canonical, CanonicalTrajectory,
    SolutionCount, TraceOptions,
};
use rhm_core::{PhasePoint, ProblemSpec};

fn trace(spec: ProblemSpec) -> CanonicalTrajectory {
    trace_canonical(&spec, &TraceOptions::default()).unwrap()
}

/// `n` points strictly inside `(lo, hi)`, `margin` from both ends, or a
/// tenth of the width when the interval is narrower than that.
fn interior(lo: f64, hi: f64, n: usize, margin: f64) -> Vec<f64> {
    let margin = margin.min(0.1 * (hi - lo));
    let (a, b) = (lo + margin, hi - margin);
    (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect()
}

#[test]
fn strip_and_capture() {
    for k in 1..=3 {
        for n in 3..=10 {
            let ct = trace(ProblemSpec::flat(n, k));
            for s in ct.traj.samples() {
                assert!(s.state.psi > 0.0 && s.state.psi < PI, "n={n} k={k} t={}", s.t);
            }
            let end = ct.traj.last();
            assert!(end.chart_distance(PhasePoint::new(FRAC_PI_2, 0.0)) <= 1e-9);
        }
    }
}

#[test]
fn count_parity_k1() {
    for n in 3..=6 {
        let ct = trace(ProblemSpec::flat(n, 1));
        let cv = critical_values_of(&ct).unwrap();
        for rho in interior(cv.sigma_n, FRAC_PI_2, 5, 1e-4) {
            match solve_with(&ct, rho, 10).unwrap().count {
                SolutionCount::Finite(c) => assert!(c % 2 == 1, "n={n} rho={rho} count={c}"),
                SolutionCount::Infinite => panic!("infinite off the equator"),
            }
        }
        for rho in interior(FRAC_PI_2, cv.rho_n, 5, 1e-4) {
            match solve_with(&ct, rho, 10).unwrap().count {
                SolutionCount::Finite(c) => assert!(c % 2 == 0 && c > 0, "n={n} rho={rho} count={c}"),
                SolutionCount::Infinite => panic!("infinite off the equator"),
            }
        }
        assert_eq!(solve_with(&ct, cv.rho_n, 10).unwrap().count, SolutionCount::Finite(1));
        for rho in interior(cv.rho_n, PI, 5, 1e-4) {
            assert_eq!(solve_with(&ct, rho, 10).unwrap().count, SolutionCount::Finite(0));
        }
        for rho in interior(0.0, cv.sigma_n, 5, 1e-4) {
            assert_eq!(solve_with(&ct, rho, 10).unwrap().count, SolutionCount::Finite(1));
        }
    }
}

#[test]
fn critical_values_decrease_with_dimension() {
    let rhos: Vec<f64> = (3..=6)
        .map(|n| critical_values_of(&trace(ProblemSpec::flat(n, 1))).unwrap().rho_n)
        .collect();
    for w in rhos.windows(2) {
        assert!(w[1] < w[0], "{rhos:?}");
    }
    assert!(rhos.iter().all(|&r| r > FRAC_PI_2 && r < PI));
}

#[test]
fn equator_crossing_rate() {
    for (n, k) in [(3, 1), (4, 1), (4, 2)] {
        let spec = ProblemSpec::flat(n, k);
        let ct = trace(spec);
        let taus: Vec<f64> = ct.crossings(FRAC_PI_2).unwrap().iter().map(|r| r.tau).collect();
        let (a, b) = (ct.t_start() + 0.5 * (ct.t_end() - ct.t_start()), ct.t_end());
        let inside = taus.iter().filter(|&&t| t >= a && t <= b).count() as f64;
        let rate = asymptotics::winding_rate(&spec).unwrap().unwrap().abs() / PI;
        let observed = inside / (b - a);
        assert!((observed / rate - 1.0).abs() < 0.1, "n={n} k={k}: {observed} vs {rate}");
    }
}

#[test]
fn south_north_symmetry_exact() {
    let ct = trace(ProblemSpec::flat(5, 2));
    for rho in [0.2, 0.9, 1.4, 1.7, 2.6] {
        let here = solve_with(&ct, rho, 10).unwrap();
        let there = solve_with(&ct, PI - rho, 10).unwrap();
        let s: Vec<f64> = here.south().map(|s| s.tau).collect();
        let n: Vec<f64> = there.north().map(|s| s.tau).collect();
        assert_eq!(s, n);
    }
}

#[test]
fn every_solution_satisfies_the_equation() {
    let grid = default_r_grid();
    for (n, k) in [(3, 1), (5, 1), (4, 2), (8, 1)] {
        let ct = trace(ProblemSpec::flat(n, k));
        for rho in [0.4, 1.3, FRAC_PI_2, 1.75] {
            let set = solve_with(&ct, rho, 6).unwrap();
            for sol in set.solutions.iter().filter(|s| !s.is_constant()) {
                let res = profile_residuals(&ct, sol.tau, &grid).unwrap();
                let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
                assert!(worst < 1e-6, "n={n} k={k} rho={rho} tau={}: {worst:e}", sol.tau);
            }
            for sol in set.north() {
                assert!((ct.state(sol.tau).unwrap().psi - rho).abs() < 1e-8);
            }
            for sol in set.south().filter(|s| !s.is_constant()) {
                assert!((ct.state(sol.tau).unwrap().psi - (PI - rho)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn twisted_spiral_in_high_dimension() {
    let flat = trace(ProblemSpec::flat(8, 1));
    assert!(flat.crossings(FRAC_PI_2).unwrap().is_empty());
    let twisted = trace(ProblemSpec::twisted(8, 1, 6.0));
    assert!(twisted.crossings(FRAC_PI_2).unwrap().len() >= 5);
}

#[test]
fn requested_levels_match_enumeration() {
    let opts = TraceOptions { levels: vec![1.0, 1.8], ..TraceOptions::default() };
    let ct = trace_canonical(&ProblemSpec::flat(3, 1), &opts).unwrap();
    for lc in &ct.level_crossings {
        let roots: Vec<f64> = ct.crossings(lc.level).unwrap().iter().map(|r| r.tau).collect();
        assert_eq!(roots.len(), lc.times.len());
        for (a, b) in roots.iter().zip(&lc.times) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
