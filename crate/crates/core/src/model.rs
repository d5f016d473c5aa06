//! Problem parameters and the right-hand sides of the reduced ODE families.
//!
//! Every log-variable family shares the autonomous form
//!
//! ```text
//! psi'' = -D psi' + K sin(2 psi)
//! ```
//!
//! with damping `D` and forcing `K` read off a [`ProblemSpec`]. The sphere
//! domain and the Hopf/Join constructions are non-autonomous and singular at
//! the ends of their intervals.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ODE family selector for [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Radial profile on the flat unit ball in the variable `t = ln r`.
    FlatBallLog,
    /// Radial profile on a round sphere in the polar angle `r ∈ (0, π)`.
    SphereDomain,
    /// Flat ball with a block rotation `R_{c ln r}` post-composed.
    TwistedLog,
}

/// Which normalization of the twist term to use in [`Variant::TwistedLog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwistConvention {
    /// Coefficient `e_k + c²/2`, re-derived from the twisted energy functional.
    #[default]
    Energy,
    /// Coefficient `e_k + c²`, as printed in the log-variable twisted equation.
    El3,
    /// Damping `2n - 2` and forcing `((2n - 1) + c²)/2` on `sin 2ψ`, the
    /// literal system used in the twisted existence argument.
    PaperLiteral,
}

/// Dimensions, degree and twist of a rotationally symmetric Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Domain dimension.
    pub n: u32,
    /// Target sphere dimension. Validated and echoed, never used in equations.
    pub m: u32,
    /// Eigenmap degree.
    pub k: u32,
    /// Twist rate of `g(t) = c t`.
    pub c: f64,
    pub variant: Variant,
    pub twist: TwistConvention,
}

impl ProblemSpec {
    pub fn flat(n: u32, k: u32) -> Self {
        Self {
            n,
            m: n.max(2),
            k,
            c: 0.0,
            variant: Variant::FlatBallLog,
            twist: TwistConvention::Energy,
        }
    }

    pub fn twisted(n: u32, k: u32, c: f64) -> Self {
        Self {
            c,
            variant: Variant::TwistedLog,
            ..Self::flat(n, k)
        }
    }

    pub fn sphere(n: u32, k: u32) -> Self {
        Self {
            variant: Variant::SphereDomain,
            ..Self::flat(n, k)
        }
    }

    pub fn with_m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }

    pub fn with_twist(mut self, twist: TwistConvention) -> Self {
        self.twist = twist;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::ParameterDomain(format!("n = {} < 2", self.n)));
        }
        if self.k < 1 {
            return Err(Error::ParameterDomain(format!("k = {} < 1", self.k)));
        }
        if self.m < 2 {
            return Err(Error::ParameterDomain(format!("m = {} < 2", self.m)));
        }
        if !self.c.is_finite() {
            return Err(Error::ParameterDomain(format!("twist rate c = {}", self.c)));
        }
        if self.variant == Variant::TwistedLog && self.n < 3 {
            return Err(Error::ParameterDomain(
                "twisted maps have finite energy only for n >= 3".into(),
            ));
        }
        Ok(())
    }

    /// Energy density `e_k` of the degree-`k` eigenmap.
    pub fn density(&self) -> f64 {
        0.5 * f64::from(self.k) * f64::from(self.k + self.n - 2)
    }

    /// Coefficient `D` of `psi'` in the log-variable equation.
    pub fn damping(&self) -> f64 {
        let n = f64::from(self.n);
        match (self.variant, self.twist) {
            (Variant::TwistedLog, TwistConvention::PaperLiteral) => 2.0 * n - 2.0,
            _ => n - 2.0,
        }
    }

    /// Coefficient `K` of `sin 2psi` in the log-variable equation. It is also
    /// the `sin² psi` weight in the energy, `∫ (psi'² + 2K sin² psi) e^{Dt} dt`.
    pub fn forcing(&self) -> f64 {
        let c2 = self.c * self.c;
        match self.variant {
            Variant::TwistedLog => match self.twist {
                TwistConvention::Energy => self.density() + 0.5 * c2,
                TwistConvention::El3 => self.density() + c2,
                TwistConvention::PaperLiteral => 0.5 * ((2.0 * f64::from(self.n) - 1.0) + c2),
            },
            _ => self.density(),
        }
    }

    /// Lyapunov function `V = psi'² - 2K sin² psi`.
    pub fn lyapunov(&self, state: PhasePoint) -> f64 {
        let s = state.psi.sin();
        state.dpsi * state.dpsi - 2.0 * self.forcing() * s * s
    }

    /// The right-hand side as an infallible closure for the integrator.
    ///
    /// Only meaningful for the autonomous log-variable families; the sphere
    /// domain must go through [`rhs`] so that its singular endpoints are
    /// rejected.
    pub fn vector_field(&self) -> impl Fn(f64, PhasePoint) -> PhasePoint + Send + Sync {
        let d = self.damping();
        let f = self.forcing();
        move |_t, y| PhasePoint::new(y.dpsi, -d * y.dpsi + f * sin2(y.psi))
    }
}

/// Which construction a [`HopfJoinSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    Hopf,
    Join,
}

/// Sphere dimensions and eigenvalues of a Hopf or Join boundary-value problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfJoinSpec {
    pub p1: u32,
    pub p2: u32,
    pub lam1: f64,
    pub lam2: f64,
    pub kind: Construction,
}

impl HopfJoinSpec {
    pub fn hopf(p1: u32, p2: u32, lam1: f64, lam2: f64) -> Self {
        Self { p1, p2, lam1, lam2, kind: Construction::Hopf }
    }

    pub fn join(p1: u32, p2: u32, lam1: f64, lam2: f64) -> Self {
        Self { p1, p2, lam1, lam2, kind: Construction::Join }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 < 1 || self.p2 < 1 {
            return Err(Error::ParameterDomain(format!(
                "sphere dimensions must be >= 1 (p1 = {}, p2 = {})",
                self.p1, self.p2
            )));
        }
        if !(self.lam1 > 0.0 && self.lam2 > 0.0) || !self.lam1.is_finite() || !self.lam2.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "eigenvalues must be positive (lam1 = {}, lam2 = {})",
                self.lam1, self.lam2
            )));
        }
        Ok(())
    }

    /// Boundary value `r(π/2)`.
    pub fn target(&self) -> f64 {
        match self.kind {
            Construction::Hopf => PI,
            Construction::Join => FRAC_PI_2,
        }
    }

    /// The same equation seen from the other endpoint, `s = π/2 - t`,
    /// `u = target - r`. Both constructions keep their form with the two
    /// sphere factors swapped.
    pub fn mirrored(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
            lam1: self.lam2,
            lam2: self.lam1,
            kind: self.kind,
        }
    }

    pub(crate) fn second_derivative(&self, t: f64, r: f64, dr: f64) -> f64 {
        let (s, c) = t.sin_cos();
        let damping = f64::from(self.p1) * c / s - f64::from(self.p2) * s / c;
        let sign = match self.kind {
            Construction::Hopf => 1.0,
            Construction::Join => -1.0,
        };
        let potential = 0.5 * (self.lam1 / (s * s) + sign * self.lam2 / (c * c));
        -damping * dr + potential * (2.0 * r).sin()
    }
}

/// A point of the `(psi, psi')` phase plane.
///
/// The `(q, p)` chart is `q = 2 psi - π`, `p = 2 psi'`; it puts the equator
/// equilibrium at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub psi: f64,
    pub dpsi: f64,
}

impl PhasePoint {
    pub const fn new(psi: f64, dpsi: f64) -> Self {
        Self { psi, dpsi }
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite() && self.dpsi.is_finite()
    }

    pub fn to_qp(self) -> (f64, f64) {
        (2.0 * self.psi - PI, 2.0 * self.dpsi)
    }

    pub fn from_qp(q: f64, p: f64) -> Self {
        Self::new(0.5 * (q + PI), 0.5 * p)
    }

    /// Euclidean distance in the `(q, p)` chart.
    pub fn chart_distance(self, other: PhasePoint) -> f64 {
        2.0 * (self.psi - other.psi).hypot(self.dpsi - other.dpsi)
    }
}

/// `sin(2 psi)` with the argument reduced to the nearest multiple of π
/// first, so it vanishes exactly at every floating-point `jπ/2` produced by
/// `FRAC_PI_2`, `PI` and friends, and keeps full relative accuracy near them.
pub fn sin2(psi: f64) -> f64 {
    let x = 2.0 * psi;
    let j = (x / PI).round();
    let r = x - j * PI;
    if j.rem_euclid(2.0) == 0.0 {
        r.sin()
    } else {
        -r.sin()
    }
}

/// Energy density `k(k + n - 2)/2` of a degree-`k` eigenmap on `S^{n-1}`.
pub fn eigen_density(n: u32, k: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::ParameterDomain(format!("n = {n} < 2")));
    }
    if k < 1 {
        return Err(Error::ParameterDomain(format!("k = {k} < 1")));
    }
    Ok(0.5 * f64::from(k) * f64::from(k + n - 2))
}

/// Dimension threshold `⌊2(1 + k + √k)⌋`.
///
/// Computed as `2 + 2k + ⌊√(4k)⌋` in integers, so perfect squares are exact.
pub fn k0_threshold(k: u32) -> Result<u32> {
    if k < 1 {
        return Err(Error::ParameterDomain(format!("k = {k} < 1")));
    }
    let k = u64::from(k);
    Ok((2 + 2 * k + isqrt(4 * k)) as u32)
}

pub(crate) fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Derivative `(psi', psi'')` of the selected family at `(t, state)`.
pub fn rhs(spec: &ProblemSpec, t: f64, state: PhasePoint) -> Result<PhasePoint> {
    spec.validate()?;
    match spec.variant {
        Variant::FlatBallLog | Variant::TwistedLog => Ok((spec.vector_field())(t, state)),
        Variant::SphereDomain => {
            if !(t > 0.0 && t < PI) {
                return Err(Error::SingularPoint { t });
            }
            let s = t.sin();
            let ddrho = -f64::from(spec.n - 1) * t.cos() / s * state.dpsi
                + spec.density() * sin2(state.psi) / (s * s);
            Ok(PhasePoint::new(state.dpsi, ddrho))
        }
    }
}

/// Derivative `(r', r'')` of the Hopf or Join equation at `(t, state)`.
pub fn rhs_hopfjoin(spec: &HopfJoinSpec, t: f64, state: PhasePoint) -> Result<PhasePoint> {
    spec.validate()?;
    if !(t > 0.0 && t < FRAC_PI_2) {
        return Err(Error::SingularPoint { t });
    }
    Ok(PhasePoint::new(state.dpsi, spec.second_derivative(t, state.psi, state.dpsi)))
}

/// Residual of the radial equation `Φ'' + (n-1)Φ'/r - e sin(2Φ)/r² = 0`
/// multiplied through by `r²`, which keeps it well scaled near `r = 0`.
pub fn radial_residual(n: u32, density: f64, r: f64, phi: f64, dphi: f64, ddphi: f64) -> f64 {
    r * r * ddphi + f64::from(n - 1) * r * dphi - density * (2.0 * phi).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn density_values() {
        assert_eq!(eigen_density(3, 1).unwrap(), 1.0);
        assert_eq!(eigen_density(3, 2).unwrap(), 3.0);
        assert_eq!(eigen_density(2, 1).unwrap(), 0.5);
        assert!(matches!(eigen_density(1, 1), Err(Error::ParameterDomain(_))));
        assert!(matches!(eigen_density(3, 0), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn degree_one_density() {
        for n in 2..50 {
            assert_eq!(eigen_density(n, 1).unwrap(), f64::from(n - 1) / 2.0);
        }
    }

    #[test]
    fn k0_values() {
        assert_eq!(k0_threshold(1).unwrap(), 6);
        assert_eq!(k0_threshold(4).unwrap(), 14);
        assert_eq!(k0_threshold(2).unwrap(), 8);
        assert!(k0_threshold(0).is_err());
    }

    #[test]
    fn k0_matches_high_precision_floor() {
        // Independent route: floor of 2(1 + k + sqrt k) with sqrt k bracketed
        // by integer squares at a 1e6 scale.
        for k in 1..2000u64 {
            let scaled = 1_000_000u64;
            let s = isqrt(k * scaled * scaled);
            // s/scaled <= sqrt k < (s+1)/scaled
            let lo = 2 * (scaled * (1 + k) + s);
            let hi = 2 * (scaled * (1 + k) + s + 1);
            let (flo, fhi) = (lo / scaled, (hi - 1) / scaled);
            if flo == fhi {
                assert_eq!(u64::from(k0_threshold(k as u32).unwrap()), flo, "k = {k}");
            }
        }
    }

    #[test]
    fn flat_rhs_examples() {
        let spec = ProblemSpec::flat(3, 1);
        let d = rhs(&spec, 0.0, PhasePoint::new(FRAC_PI_2, 0.0)).unwrap();
        assert_eq!(d, PhasePoint::new(0.0, 0.0));
        let d = rhs(&spec, 0.0, PhasePoint::new(PI / 4.0, 0.0)).unwrap();
        assert_eq!(d.psi, 0.0);
        assert!((d.dpsi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_identity_is_harmonic() {
        let spec = ProblemSpec::sphere(3, 1);
        for i in 1..200 {
            let r = PI * f64::from(i) / 200.0;
            let d = rhs(&spec, r, PhasePoint::new(r, 1.0)).unwrap();
            assert!(d.dpsi.abs() < 1e-12, "r = {r}, rho'' = {}", d.dpsi);
        }
        assert!(matches!(
            rhs(&spec, 0.0, PhasePoint::new(0.0, 1.0)),
            Err(Error::SingularPoint { .. })
        ));
        assert!(rhs(&spec, PI, PhasePoint::new(PI, 1.0)).is_err());
    }

    #[test]
    fn sphere_identity_for_any_dimension() {
        // e_1 = (n-1)/2 makes rho = r exact in every dimension.
        for n in 2..12 {
            let spec = ProblemSpec::sphere(n, 1);
            let r = 0.731;
            let d = rhs(&spec, r, PhasePoint::new(r, 1.0)).unwrap();
            assert!(d.dpsi.abs() < 1e-13);
        }
    }

    #[test]
    fn hopf_join_exact_profiles() {
        let hopf = HopfJoinSpec::hopf(1, 1, 1.0, 1.0);
        let join = HopfJoinSpec::join(2, 3, 2.0, 3.0);
        for i in 1..100 {
            let t = FRAC_PI_2 * f64::from(i) / 100.0;
            let d = rhs_hopfjoin(&hopf, t, PhasePoint::new(2.0 * t, 2.0)).unwrap();
            assert!(d.dpsi.abs() < 1e-12, "hopf t = {t}: {}", d.dpsi);
            let d = rhs_hopfjoin(&join, t, PhasePoint::new(t, 1.0)).unwrap();
            assert!(d.dpsi.abs() < 1e-12, "join t = {t}: {}", d.dpsi);
        }
        let d = rhs_hopfjoin(&hopf, PI / 4.0, PhasePoint::new(FRAC_PI_2, 0.0)).unwrap();
        assert!(d.dpsi.abs() < 1e-15);
        assert!(matches!(
            rhs_hopfjoin(&hopf, FRAC_PI_2, PhasePoint::default()),
            Err(Error::SingularPoint { .. })
        ));
        assert!(rhs_hopfjoin(&hopf, 0.0, PhasePoint::default()).is_err());
    }

    #[test]
    fn validation() {
        assert!(ProblemSpec::flat(2, 1).validate().is_ok());
        assert!(ProblemSpec::twisted(2, 1, 1.0).validate().is_err());
        assert!(ProblemSpec::flat(3, 1).with_m(1).validate().is_err());
        assert!(HopfJoinSpec::hopf(0, 1, 1.0, 1.0).validate().is_err());
        assert!(HopfJoinSpec::join(1, 1, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn paper_literal_coefficients() {
        let s = ProblemSpec::twisted(3, 1, 2.0).with_twist(TwistConvention::PaperLiteral);
        assert_eq!(s.damping(), 4.0);
        assert_eq!(s.forcing(), 0.5 * (5.0 + 4.0));
        let s = ProblemSpec::twisted(3, 1, 2.0).with_twist(TwistConvention::El3);
        assert_eq!(s.forcing(), 1.0 + 4.0);
    }

    proptest! {
        #[test]
        fn flat_rhs_symmetries(psi in -10.0f64..10.0, dpsi in -5.0f64..5.0, n in 3u32..12, k in 1u32..5) {
            let spec = ProblemSpec::flat(n, k);
            let a = rhs(&spec, 0.0, PhasePoint::new(psi, dpsi)).unwrap();
            let shifted = rhs(&spec, 0.0, PhasePoint::new(psi + PI, dpsi)).unwrap();
            let mirrored = rhs(&spec, 0.0, PhasePoint::new(-psi, -dpsi)).unwrap();
            prop_assert_eq!(a.psi, shifted.psi);
            prop_assert!((a.dpsi - shifted.dpsi).abs() < 1e-12 * (1.0 + a.dpsi.abs()));
            prop_assert_eq!(mirrored.psi, -a.psi);
            prop_assert!((mirrored.dpsi + a.dpsi).abs() < 1e-12 * (1.0 + a.dpsi.abs()));
        }

        #[test]
        fn untwisted_twist_agrees(psi in -4.0f64..4.0, dpsi in -3.0f64..3.0, n in 3u32..20, k in 1u32..6) {
            let flat = rhs(&ProblemSpec::flat(n, k), 0.0, PhasePoint::new(psi, dpsi)).unwrap();
            let tw = rhs(&ProblemSpec::twisted(n, k, 0.0), 0.0, PhasePoint::new(psi, dpsi)).unwrap();
            prop_assert_eq!(flat, tw);
        }
    }
}
