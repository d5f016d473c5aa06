//! Local analysis at the equilibria of the log-variable flow.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{k0_threshold, PhasePoint, ProblemSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Saddle,
    StableSpiral,
    StableNode,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub location: PhasePoint,
    /// Roots of the characteristic polynomial, larger real part first.
    pub eigenvalues: [Complex64; 2],
    pub classification: Classification,
    /// `damping² - 4·stiffness` of `λ² + damping·λ + stiffness`.
    pub discriminant: f64,
}

/// Roots of `λ² + b λ + c = 0`, ordered by decreasing real part (and
/// decreasing imaginary part for a complex pair).
///
/// Real roots use the cancellation-free form `q = -(b + sign(b)√Δ)/2`,
/// `λ = {q, c/q}`.
pub fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn classify(roots: &[Complex64; 2], disc: f64) -> Classification {
    if disc < 0.0 {
        if roots[0].re < 0.0 {
            Classification::StableSpiral
        } else {
            Classification::Unstable
        }
    } else if roots[0].re > 0.0 && roots[1].re < 0.0 {
        Classification::Saddle
    } else if roots[0].re < 0.0 {
        Classification::StableNode
    } else {
        Classification::Unstable
    }
}

fn require_log_variant(spec: &ProblemSpec) -> Result<()> {
    spec.validate()?;
    match spec.variant {
        Variant::FlatBallLog | Variant::TwistedLog => Ok(()),
        Variant::SphereDomain => Err(Error::ParameterDomain(
            "equilibrium analysis needs an autonomous log-variable variant".into(),
        )),
    }
}

fn report(spec: &ProblemSpec, psi_star: f64, stiffness: f64) -> EquilibriumReport {
    let damping = spec.damping();
    let eigenvalues = quadratic_roots(damping, stiffness);
    let discriminant = damping * damping - 4.0 * stiffness;
    EquilibriumReport {
        location: PhasePoint::new(psi_star, 0.0),
        eigenvalues,
        classification: classify(&eigenvalues, discriminant),
        discriminant,
    }
}

/// Linearization of `psi'' = -D psi' + K sin 2psi` at `(psi_star, 0)`:
/// `λ² + D λ - 2K cos(2 psi_star) = 0`.
pub fn linearize(spec: &ProblemSpec, psi_star: f64) -> EquilibriumReport {
    report(spec, psi_star, -2.0 * spec.forcing() * (2.0 * psi_star).cos())
}

/// Reports for the pole, equator and antipodal pole equilibria.
pub fn classify_equilibria(spec: &ProblemSpec) -> Result<Vec<EquilibriumReport>> {
    require_log_variant(spec)?;
    if spec.n < 3 {
        return Err(Error::ParameterDomain(
            "n = 2 has no damping; use the closed-form solutions".into(),
        ));
    }
    // cos 2psi* is exactly ±1 at these points; skip the rounded cosine.
    let k2 = 2.0 * spec.forcing();
    Ok(vec![report(spec, 0.0, -k2), report(spec, FRAC_PI_2, k2), report(spec, PI, -k2)])
}

/// The equator report alone.
pub fn equator(spec: &ProblemSpec) -> Result<EquilibriumReport> {
    Ok(classify_equilibria(spec)?[1])
}

/// Indicial exponents `(λ⁺, λ⁻)` of the pole equilibrium: roots of
/// `λ² + D λ - 2K = 0`. For untwisted problems `λ⁺ = k` exactly.
pub fn origin_exponents(spec: &ProblemSpec) -> Result<(f64, f64)> {
    require_log_variant(spec)?;
    let r = quadratic_roots(spec.damping(), -2.0 * spec.forcing());
    Ok((r[0].re, r[1].re))
}

/// Launch state on the unstable manifold of the pole: `(δ, λ⁺δ)` at
/// `t0 = ln(δ)/λ⁺`, so that `e^{-λ⁺ t} psi(t) → 1` as `t → -∞`.
///
/// The manifold is tangent to the eigenvector to second order (the
/// nonlinearity is odd), so the launch error is `O(δ³)`.
pub fn manifold_start(spec: &ProblemSpec, delta: f64) -> Result<(f64, PhasePoint)> {
    if !(delta > 0.0 && delta <= 1e-6) {
        return Err(Error::ParameterDomain(format!("launch offset {delta} outside (0, 1e-6]")));
    }
    let (lp, _) = origin_exponents(spec)?;
    Ok((delta.ln() / lp, PhasePoint::new(delta, lp * delta)))
}

/// Rotation rate of the polar angle around a spiral equator, `-Im λ`.
/// `None` when the equator is not a spiral.
pub fn winding_rate(spec: &ProblemSpec) -> Result<Option<f64>> {
    let eq = equator(spec)?;
    Ok((eq.classification == Classification::StableSpiral).then(|| -eq.eigenvalues[0].im))
}

/// Closed-form winding rate `-½ √(-(4 + 8k - 4k² - 4n - 4kn + n²))` for the
/// untwisted problem, `None` if the radicand is negative.
pub fn winding_rate_formula(n: u32, k: u32) -> Option<f64> {
    let (n, k) = (f64::from(n), f64::from(k));
    let inner = -(4.0 + 8.0 * k - 4.0 * k * k - 4.0 * n - 4.0 * k * n + n * n);
    (inner > 0.0).then(|| -0.5 * inner.sqrt())
}

/// Integer discriminant `(n-2)² - 4k(k+n-2)` of the untwisted equator.
pub fn equator_discriminant(n: u32, k: u32) -> i64 {
    let (n, k) = (i64::from(n), i64::from(k));
    (n - 2) * (n - 2) - 4 * k * (k + n - 2)
}

/// Largest `n ≥ 3` for which the untwisted equator is a spiral.
pub fn spiral_max_dimension(k: u32) -> u32 {
    let mut n = 3;
    while equator_discriminant(n + 1, k) < 0 {
        n += 1;
    }
    n
}

/// Comparison of `k0_threshold(k)` with the dimension where the equator
/// linearization changes from spiral to node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Audit {
    pub k: u32,
    pub k0: u32,
    pub spiral_max_n: u32,
    pub agrees: bool,
}

pub fn k0_audit(k: u32) -> Result<K0Audit> {
    let k0 = k0_threshold(k)?;
    let spiral_max_n = spiral_max_dimension(k);
    Ok(K0Audit { k, k0, spiral_max_n, agrees: k0 == spiral_max_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, System, Tolerances};
    use crate::model::TwistConvention;
    use proptest::prelude::*;

    #[test]
    fn n3_k1_equator() {
        let r = classify_equilibria(&ProblemSpec::flat(3, 1)).unwrap();
        assert_eq!(r[0].classification, Classification::Saddle);
        assert_eq!(r[2].classification, Classification::Saddle);
        let eq = r[1];
        assert_eq!(eq.classification, Classification::StableSpiral);
        assert!((eq.eigenvalues[0].re + 0.5).abs() < 1e-15);
        assert!((eq.eigenvalues[0].im - 7f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(eq.discriminant, -7.0);
    }

    #[test]
    fn n7_k1_node() {
        let eq = equator(&ProblemSpec::flat(7, 1)).unwrap();
        assert_eq!(eq.discriminant, 1.0);
        assert_eq!(eq.classification, Classification::StableNode);
    }

    #[test]
    fn rejects_n2_and_sphere() {
        assert!(classify_equilibria(&ProblemSpec::flat(2, 1)).is_err());
        assert!(classify_equilibria(&ProblemSpec::sphere(3, 1)).is_err());
    }

    #[test]
    fn paper_literal_saddle() {
        let spec = ProblemSpec::twisted(3, 1, 0.0).with_twist(TwistConvention::PaperLiteral);
        let r = classify_equilibria(&spec).unwrap();
        assert_eq!(r[0].eigenvalues[0].re, 1.0);
        assert_eq!(r[0].eigenvalues[1].re, -5.0);
        assert_eq!(r[0].classification, Classification::Saddle);
    }

    #[test]
    fn origin_exponent_values() {
        assert_eq!(origin_exponents(&ProblemSpec::flat(3, 1)).unwrap(), (1.0, -2.0));
        assert_eq!(origin_exponents(&ProblemSpec::flat(5, 3)).unwrap(), (3.0, -6.0));
        for n in 2..40 {
            for k in 1..12 {
                let (lp, lm) = origin_exponents(&ProblemSpec::flat(n, k)).unwrap();
                assert_eq!(lp, f64::from(k), "n={n} k={k}");
                assert_eq!(lm, -f64::from(n - 2 + k));
            }
        }
    }

    #[test]
    fn launch_states() {
        let (t0, s) = manifold_start(&ProblemSpec::flat(3, 1), 1e-8).unwrap();
        assert_eq!(t0, 1e-8f64.ln());
        assert_eq!(s, PhasePoint::new(1e-8, 1e-8));
        let (t0, s) = manifold_start(&ProblemSpec::flat(4, 2), 1e-8).unwrap();
        assert_eq!(t0, 1e-8f64.ln() / 2.0);
        assert_eq!(s, PhasePoint::new(1e-8, 2e-8));
        assert!(manifold_start(&ProblemSpec::flat(3, 1), 1e-5).is_err());
        assert!(manifold_start(&ProblemSpec::flat(3, 1), 0.0).is_err());
    }

    #[test]
    fn launch_is_tangent_to_manifold() {
        // Flow backward for Δt = 1 via time reversal; the stable direction
        // is amplified backward, so any off-manifold launch error shows up.
        for (n, k) in [(3, 1), (4, 2), (6, 1)] {
            let spec = ProblemSpec::flat(n, k);
            let delta = 1e-7;
            let (t0, s) = manifold_start(&spec, delta).unwrap();
            let (lp, _) = origin_exponents(&spec).unwrap();
            let fwd = spec.vector_field();
            let back = move |tau: f64, y: PhasePoint| {
                let d = fwd(-tau, y);
                PhasePoint::new(-d.psi, -d.dpsi)
            };
            let tol = Tolerances { rel: 1e-13, abs: 1e-24, ..Tolerances::default() };
            let tr = integrate(System::Problem(spec), back, -t0, s, -t0 + 1.0, &tol, &[]).unwrap();
            let end = tr.last();
            // Re-project onto the manifold: it is psi' = λ⁺ psi + O(psi³).
            let projected = delta * (-lp).exp();
            assert!((end.psi - projected).abs() < 10.0 * delta * delta, "n={n} k={k}");
            assert!((end.dpsi - lp * end.psi).abs() < 10.0 * delta * delta);
        }
    }

    #[test]
    fn jk_regression_k1() {
        let k0 = k0_threshold(1).unwrap();
        for n in 3..=20 {
            let eq = equator(&ProblemSpec::flat(n, 1)).unwrap();
            assert_eq!(eq.classification == Classification::StableSpiral, n <= k0, "n = {n}");
        }
    }

    #[test]
    fn twisted_zero_equals_flat() {
        for n in 3..15 {
            for k in 1..5 {
                assert_eq!(
                    classify_equilibria(&ProblemSpec::flat(n, k)).unwrap(),
                    classify_equilibria(&ProblemSpec::twisted(n, k, 0.0)).unwrap()
                );
            }
        }
    }

    #[test]
    fn k0_audit_values() {
        let a = k0_audit(1).unwrap();
        assert!(a.agrees && a.k0 == 6 && a.spiral_max_n == 6);
        let a = k0_audit(2).unwrap();
        assert_eq!((a.k0, a.spiral_max_n, a.agrees), (8, 11, false));
    }

    #[test]
    fn winding_formula_matches_eigenvalues() {
        for n in 3..30 {
            for k in 1..6 {
                let lin = winding_rate(&ProblemSpec::flat(n, k)).unwrap();
                let formula = winding_rate_formula(n, k);
                match (lin, formula) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                    (None, None) => {}
                    other => panic!("n={n} k={k}: {other:?}"),
                }
            }
        }
        assert!((winding_rate_formula(3, 1).unwrap() + 7f64.sqrt() / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn vieta_and_residual(n in 3u32..40, k in 1u32..10, c in 0.0f64..6.0, conv in 0usize..3) {
            let twist = [TwistConvention::Energy, TwistConvention::El3, TwistConvention::PaperLiteral][conv];
            let spec = ProblemSpec::twisted(n, k, c).with_twist(twist);
            for rep in classify_equilibria(&spec).unwrap() {
                let b = spec.damping();
                let cc = -2.0 * spec.forcing() * (2.0 * rep.location.psi).cos();
                let [l1, l2] = rep.eigenvalues;
                let scale = 1.0 + b.abs() + cc.abs();
                prop_assert!(((l1 + l2).re + b).abs() < 1e-12 * scale);
                prop_assert!(((l1 * l2).re - cc).abs() < 1e-12 * scale * scale);
                for l in [l1, l2] {
                    let res = l * l + l * b + cc;
                    prop_assert!(res.norm() < 1e-12 * scale * scale);
                }
            }
        }
    }
}
