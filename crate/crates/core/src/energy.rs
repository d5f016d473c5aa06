//! Energy quadrature, Lyapunov monitoring, and discrete first and second
//! variation of the reduced energy
//! `I = ∫ (Ψ'² + 2K sin²Ψ) e^{Dt} dt` over `(-∞, 0]`.

use serde::{Deserialize, Serialize};

use crate::dirichlet::{Branch, CanonicalTrajectory, ClosedFormN2, Pole};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{sin2, ProblemSpec, Variant};
use crate::quadrature::{adaptive, Estimate};
use crate::tridiag;

/// Left end of the truncated `t` grid, `ln(1e-6)`.
pub const T_MIN: f64 = -13.815_510_557_964_274;
const REL_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 30;

/// A radial profile in one of its available representations.
#[derive(Debug, Clone, Copy)]
pub enum ProfileSource<'a> {
    /// `Φ ≡ value`.
    Constant(f64),
    /// `Φ(r) = Ψ_n(τ + ln r)` or its south-pole mirror.
    Canonical { ct: &'a CanonicalTrajectory, tau: f64, pole: Pole },
    /// Exact `n = 2` solution.
    ClosedForm(ClosedFormN2),
}

impl ProfileSource<'_> {
    /// `(Ψ, Ψ')` in the variable `t = ln r`.
    pub fn state(&self, t: f64) -> Result<(f64, f64)> {
        match *self {
            ProfileSource::Constant(v) => Ok((v, 0.0)),
            ProfileSource::Canonical { ct, tau, pole } => {
                let s = ct.state(tau + t)?;
                Ok(match pole {
                    Pole::North => (s.psi, s.dpsi),
                    Pole::South => (std::f64::consts::PI - s.psi, -s.dpsi),
                })
            }
            ProfileSource::ClosedForm(cf) => {
                let r = t.exp();
                Ok((cf.phi(r), r * cf.dphi(r)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub error: f64,
    pub finite: bool,
}

fn check_energy_spec(spec: &ProblemSpec) -> Result<()> {
    spec.validate()?;
    if spec.variant == Variant::SphereDomain {
        return Err(Error::ParameterDomain("energy is defined for the ball variants".into()));
    }
    Ok(())
}

/// Normalized energy of a profile over `(-∞, 0]`.
pub fn energy_of(spec: &ProblemSpec, src: &ProfileSource<'_>) -> Result<EnergyReport> {
    check_energy_spec(spec)?;
    match *src {
        ProfileSource::Constant(v) => {
            let s = v.sin();
            let d = spec.damping();
            if s * s < 1e-300 {
                return Ok(EnergyReport { value: 0.0, error: 0.0, finite: true });
            }
            if d <= 0.0 {
                return Ok(EnergyReport { value: f64::INFINITY, error: 0.0, finite: false });
            }
            Ok(EnergyReport { value: 2.0 * spec.forcing() * s * s / d, error: 0.0, finite: true })
        }
        ProfileSource::ClosedForm(cf) => Ok(closed_form_energy(&cf)),
        ProfileSource::Canonical { .. } => energy_over(spec, src, f64::NEG_INFINITY, 0.0),
    }
}

/// `∫_0^1 (Φ'² + 2e_k sin²Φ / r²) r dr` for an `n = 2` closed form.
pub fn closed_form_energy(cf: &ClosedFormN2) -> EnergyReport {
    let density = 0.5 * f64::from(cf.k) * f64::from(cf.k);
    let f = |r: f64| {
        let s = cf.phi(r).sin();
        let d = cf.dphi(r);
        (d * d + 2.0 * density * s * s / (r * r)) * r
    };
    let est = adaptive(&f, 0.0, 1.0, 1e-13, 40);
    EnergyReport { value: est.value, error: est.error, finite: est.value.is_finite() }
}

fn integrand<'a>(spec: &ProblemSpec, src: &ProfileSource<'a>) -> impl Fn(f64) -> f64 + 'a {
    let d = spec.damping();
    let k = spec.forcing();
    let src = *src;
    move |t: f64| {
        let (psi, dpsi) = src.state(t).unwrap_or((f64::NAN, f64::NAN));
        let s = psi.sin();
        (dpsi * dpsi + 2.0 * k * s * s) * (d * t).exp()
    }
}

/// Energy restricted to `[a, b] ⊂ (-∞, 0]`; `a` may be `-∞`.
///
/// The part below the cut is integrated in closed form from the
/// exponential tail `Ψ ≈ Ψ(cut) e^{λ⁺ (t - cut)}`.
pub fn energy_over(spec: &ProblemSpec, src: &ProfileSource<'_>, a: f64, b: f64) -> Result<EnergyReport> {
    check_energy_spec(spec)?;
    if !(a < b) || b > 0.0 || b.is_nan() {
        return Err(Error::ParameterDomain(format!("energy interval [{a}, {b}] not inside (-∞, 0]")));
    }
    if let ProfileSource::Constant(v) = *src {
        let d = spec.damping();
        let s = v.sin();
        let c = 2.0 * spec.forcing() * s * s;
        let value = if c == 0.0 {
            0.0
        } else if d > 0.0 {
            c * ((d * b).exp() - (d * a).exp()) / d
        } else {
            c * (b - a)
        };
        return Ok(EnergyReport { value, error: 0.0, finite: value.is_finite() });
    }
    let f = integrand(spec, src);
    let mut breaks = Vec::new();
    let mut tail = Estimate::default();
    let lo = if a == f64::NEG_INFINITY {
        let cut = match *src {
            ProfileSource::Canonical { ct, tau, .. } => T_MIN.min(ct.t_start() - tau).min(b),
            _ => T_MIN.min(b),
        };
        let (psi, _) = src.state(cut)?;
        let small = psi.sin();
        let lam = match *src {
            ProfileSource::Canonical { ct, .. } => ct.lambda_plus,
            _ => f64::from(spec.k),
        };
        let d = spec.damping();
        let rate = 2.0 * lam + d;
        let value = (lam * lam + 2.0 * spec.forcing()) * small * small * (d * cut).exp() / rate;
        tail = Estimate { value, error: value * small * small };
        cut
    } else {
        a
    };
    breaks.push(lo);
    if let ProfileSource::Canonical { ct, tau, .. } = *src {
        breaks.extend(ct.traj.times().map(|s| s - tau).filter(|&t| t > lo && t < b));
    }
    breaks.push(b);

    let mut total = tail;
    let mut coarse = 0.0;
    for w in breaks.windows(2) {
        coarse += crate::quadrature::gk15(&f, w[0], w[1]).value.abs();
    }
    let abs_tol = (REL_TOL * coarse).max(1e-300) / breaks.len() as f64;
    for w in breaks.windows(2) {
        total = total + adaptive(&f, w[0], w[1], abs_tol, MAX_DEPTH);
    }
    let finite = total.value.is_finite();
    Ok(EnergyReport { value: total.value, error: total.error, finite })
}

/// Energy of the north-pole solution `Φ(r) = Ψ_n(τ + ln r)`.
pub fn canonical_energy(ct: &CanonicalTrajectory, tau: f64) -> Result<EnergyReport> {
    energy_of(&ct.spec, &ProfileSource::Canonical { ct, tau, pole: Pole::North })
}

/// Energies of both `n = 2` branches through `rho`.
pub fn closed_form_pair(k: u32, rho: f64) -> Result<(EnergyReport, EnergyReport)> {
    let inner = crate::dirichlet::closed_form_n2(k, rho, Branch::Inner)?;
    let outer = crate::dirichlet::closed_form_n2(k, rho, Branch::Outer)?;
    Ok((closed_form_energy(&inner), closed_form_energy(&outer)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPoint {
    pub t: f64,
    pub v: f64,
    /// `dV/dt` from differentiating the dense output.
    pub dv_observed: f64,
    /// `-2 D Ψ'²`.
    pub dv_expected: f64,
}

/// `V = Ψ'² - 2K sin²Ψ` and its derivative at every sample.
pub fn lyapunov_series(traj: &Trajectory, spec: &ProblemSpec) -> Result<Vec<LyapunovPoint>> {
    if !matches!(spec.variant, Variant::FlatBallLog | Variant::TwistedLog) {
        return Err(Error::ParameterDomain("Lyapunov function needs a log-variable variant".into()));
    }
    let k = spec.forcing();
    let d = spec.damping();
    traj.samples()
        .iter()
        .map(|s| {
            let y = s.state;
            let dy = traj.eval_derivative(s.t)?;
            Ok(LyapunovPoint {
                t: s.t,
                v: spec.lyapunov(y),
                dv_observed: 2.0 * dy.psi * dy.dpsi - 2.0 * k * sin2(y.psi) * dy.psi,
                dv_expected: -2.0 * d * y.dpsi * y.dpsi,
            })
        })
        .collect()
}

/// Uniform grid on `[t_min, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationGrid {
    pub t_min: f64,
    pub nodes: usize,
}

impl Default for VariationGrid {
    fn default() -> Self {
        Self { t_min: T_MIN, nodes: 512 }
    }
}

impl VariationGrid {
    pub fn new(t_min: f64, nodes: usize) -> Result<Self> {
        let g = Self { t_min, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 64 {
            return Err(Error::ParameterDomain(format!("{} grid nodes < 64", self.nodes)));
        }
        if !(self.t_min <= T_MIN) {
            return Err(Error::ParameterDomain(format!("grid must cover [ln 1e-6, 0], got t_min = {}", self.t_min)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        -self.t_min / (self.nodes - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            0.0
        } else {
            self.t_min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.point(i)).collect()
    }
}

/// `∫ (Ψ'² + 2K sin²Ψ) e^{Dt} dt` with free coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub damping: f64,
    pub forcing: f64,
}

impl Functional {
    pub fn new(damping: f64, forcing: f64) -> Self {
        Self { damping, forcing }
    }

    pub fn of(spec: &ProblemSpec) -> Self {
        Self { damping: spec.damping(), forcing: spec.forcing() }
    }

    fn weight(&self, t: f64) -> f64 {
        (self.damping * t).exp()
    }

    /// Trapezoid weight of the segment `[t_i, t_{i+1}]`.
    fn edge(&self, grid: &VariationGrid, i: usize) -> f64 {
        0.5 * (self.weight(grid.point(i)) + self.weight(grid.point(i + 1)))
    }

    /// Trapezoid rule on the grid, forward differences for `Ψ'`.
    pub fn discrete(&self, grid: &VariationGrid, psi: &[f64]) -> f64 {
        let h = grid.step();
        let n = psi.len();
        let mut sum = 0.0;
        for i in 0..n - 1 {
            let w = self.edge(grid, i);
            let dp = psi[i + 1] - psi[i];
            sum += w * dp * dp / h;
        }
        for (i, &p) in psi.iter().enumerate() {
            let c = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            let s = p.sin();
            sum += c * h * 2.0 * self.forcing * s * s * self.weight(grid.point(i));
        }
        sum
    }

    /// `∂I_h/∂Ψ_i` at the interior nodes.
    pub fn gradient(&self, grid: &VariationGrid, psi: &[f64]) -> Vec<f64> {
        let h = grid.step();
        (1..psi.len() - 1)
            .map(|i| {
                let t = grid.point(i);
                let wl = self.edge(grid, i - 1);
                let wr = self.edge(grid, i);
                let flux = (wr * (psi[i + 1] - psi[i]) - wl * (psi[i] - psi[i - 1])) / (h * h);
                -2.0 * h * (flux - self.forcing * sin2(psi[i]) * self.weight(t))
            })
            .collect()
    }

    /// Interior block of the Hessian of `I_h`, scaled by the node measures
    /// `h e^{D t_i}` on both sides. Returns `(diagonal, off-diagonal)`.
    pub fn hessian(&self, grid: &VariationGrid, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = grid.step();
        let m = psi.len() - 2;
        let mut diag = Vec::with_capacity(m);
        let mut off = Vec::with_capacity(m.saturating_sub(1));
        for i in 1..=m {
            let t = grid.point(i);
            let w = self.weight(t);
            let wl = self.edge(grid, i - 1);
            let wr = self.edge(grid, i);
            let cos2 = (2.0 * psi[i]).cos();
            let a = 2.0 * (wl + wr) / h + 4.0 * self.forcing * h * w * cos2;
            diag.push(a / (h * w));
            if i < m {
                let wn = self.weight(grid.point(i + 1));
                off.push(-2.0 * wr / h / (h * (w * wn).sqrt()));
            }
        }
        (diag, off)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    /// `max_i |∂I_h/∂Ψ_i| / h` over interior nodes.
    pub grad_norm: f64,
    pub hessian_min_eig: f64,
    pub grid: GridInfo,
    pub note: String,
}

fn sample(src: &ProfileSource<'_>, grid: &VariationGrid) -> Result<Vec<f64>> {
    grid.points().into_iter().map(|t| Ok(src.state(t)?.0)).collect()
}

fn report(func: &Functional, grid: &VariationGrid, psi: &[f64]) -> VariationReport {
    let h = grid.step();
    let grad_norm = func
        .gradient(grid, psi)
        .into_iter()
        .fold(0.0f64, |m, g| m.max(g.abs()))
        / h;
    let (diag, off) = func.hessian(grid, psi);
    VariationReport {
        grad_norm,
        hessian_min_eig: tridiag::smallest_eigenvalue(&diag, &off),
        grid: GridInfo { t_min: grid.t_min, t_max: 0.0, nodes: grid.nodes, h },
        note: "Dirichlet conditions at both ends of the truncated grid; \
               the sign is resolved on [t_min, 0] only"
            .into(),
    }
}

/// Discrete first variation of node values on `grid`.
pub fn variation_of_values(func: &Functional, grid: &VariationGrid, psi: &[f64]) -> Result<VariationReport> {
    grid.validate()?;
    if psi.len() != grid.nodes {
        return Err(Error::ParameterDomain(format!("{} values for {} nodes", psi.len(), grid.nodes)));
    }
    Ok(report(func, grid, psi))
}

/// Discrete stationarity of a profile with its endpoint values held fixed.
pub fn first_variation_check(spec: &ProblemSpec, src: &ProfileSource<'_>, grid: &VariationGrid) -> Result<VariationReport> {
    check_energy_spec(spec)?;
    grid.validate()?;
    let psi = sample(src, grid)?;
    Ok(report(&Functional::of(spec), grid, &psi))
}

/// Smallest eigenvalue of the measure-scaled discrete second variation.
pub fn second_variation_spectrum(spec: &ProblemSpec, src: &ProfileSource<'_>, grid: &VariationGrid) -> Result<VariationReport> {
    first_variation_check(spec, src, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{closed_form_n2, trace_canonical, TraceOptions};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn equator_energy() {
        let spec = ProblemSpec::flat(3, 1);
        let e = energy_of(&spec, &ProfileSource::Constant(FRAC_PI_2)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-15 && e.finite);
        let e = energy_of(&ProblemSpec::flat(5, 2), &ProfileSource::Constant(FRAC_PI_2)).unwrap();
        assert!((e.value - 10.0 / 3.0).abs() < 1e-14);
        let e = energy_of(&spec, &ProfileSource::Constant(0.0)).unwrap();
        assert_eq!(e.value, 0.0);
        let e = energy_of(&ProblemSpec::flat(2, 1), &ProfileSource::Constant(FRAC_PI_2)).unwrap();
        assert!(!e.finite);
    }

    #[test]
    fn closed_form_branches() {
        for k in 1..=3 {
            let (inner, outer) = closed_form_pair(k, FRAC_PI_2).unwrap();
            assert!(inner.finite && outer.finite);
            assert!((inner.value - outer.value).abs() < 1e-10);
            assert!((inner.value - 2.0 * f64::from(k)).abs() < 1e-10);
            let (inner, outer) = closed_form_pair(k, 1.0).unwrap();
            let s = 0.5f64.sin();
            let c = 0.5f64.cos();
            assert!((inner.value - 4.0 * f64::from(k) * s * s).abs() < 1e-10);
            assert!((outer.value - 4.0 * f64::from(k) * c * c).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_via_log_form() {
        let cf = closed_form_n2(2, 1.2, Branch::Inner).unwrap();
        let e = energy_over(&ProblemSpec::flat(2, 2), &ProfileSource::ClosedForm(cf), -40.0, 0.0).unwrap();
        assert!((e.value - closed_form_energy(&cf).value).abs() < 1e-9);
    }

    #[test]
    fn additivity() {
        let spec = ProblemSpec::flat(3, 1);
        let ct = trace_canonical(&spec, &TraceOptions::default()).unwrap();
        let src = ProfileSource::Canonical { ct: &ct, tau: 2.0, pole: Pole::North };
        let whole = energy_over(&spec, &src, -8.0, 0.0).unwrap();
        let left = energy_over(&spec, &src, -8.0, -3.3).unwrap();
        let right = energy_over(&spec, &src, -3.3, 0.0).unwrap();
        assert!((whole.value - left.value - right.value).abs() < 1e-10 * whole.value);
        let full = energy_of(&spec, &src).unwrap();
        assert!(full.value > whole.value && full.error < 1e-8 * full.value);
        let south = ProfileSource::Canonical { ct: &ct, tau: 2.0, pole: Pole::South };
        assert!((energy_of(&spec, &south).unwrap().value - full.value).abs() < 1e-14);
    }

    #[test]
    fn tail_matches_direct() {
        let spec = ProblemSpec::flat(4, 1);
        let ct = trace_canonical(&spec, &TraceOptions::default()).unwrap();
        let src = ProfileSource::Canonical { ct: &ct, tau: 1.0, pole: Pole::North };
        let full = energy_of(&spec, &src).unwrap().value;
        let direct = energy_over(&spec, &src, -60.0, 0.0).unwrap().value;
        assert!((full - direct).abs() < 1e-9 * full);
    }

    #[test]
    fn lyapunov_values() {
        let spec = ProblemSpec::flat(3, 1);
        let v = spec.lyapunov(crate::PhasePoint::new(FRAC_PI_2, 0.0));
        assert!((v + 2.0).abs() < 1e-15);
        assert_eq!(spec.lyapunov(crate::PhasePoint::new(0.0, 0.0)), 0.0);
        let ct = trace_canonical(&spec, &TraceOptions::default()).unwrap();
        let series = lyapunov_series(&ct.traj, &spec).unwrap();
        let worst = series
            .iter()
            .fold(0.0f64, |m, p| m.max((p.dv_observed - p.dv_expected).abs()));
        assert!(worst < 1e-7, "{worst:e}");
        for w in series.windows(2) {
            assert!(w[1].v <= w[0].v + 1e-9);
        }
    }

    #[test]
    fn equator_gradient_vanishes() {
        let spec = ProblemSpec::flat(3, 1);
        let r = first_variation_check(&spec, &ProfileSource::Constant(FRAC_PI_2), &VariationGrid::default()).unwrap();
        assert_eq!(r.grad_norm, 0.0);
    }

    #[test]
    fn hessian_signs() {
        let g = VariationGrid::default();
        let eq = ProfileSource::Constant(FRAC_PI_2);
        let unstable = second_variation_spectrum(&ProblemSpec::flat(3, 1), &eq, &g).unwrap();
        assert!(unstable.hessian_min_eig < 0.0);
        let stable = second_variation_spectrum(&ProblemSpec::flat(8, 1), &eq, &g).unwrap();
        assert!(stable.hessian_min_eig >= 0.0);
        let quad = Functional::new(0.0, 0.0);
        let psi = vec![0.0; g.nodes];
        let r = variation_of_values(&quad, &g, &psi).unwrap();
        assert!(r.hessian_min_eig > 0.0);
    }

    #[test]
    fn hessian_matches_continuum() {
        // Scaled operator -2(φ'' + Dφ') + 4K cos2Ψ φ on [t_min, 0].
        for (n, k) in [(3, 1), (8, 1), (5, 2)] {
            let spec = ProblemSpec::flat(n, k);
            let d = spec.damping();
            let l = -T_MIN;
            let expect = 2.0 * (d * d / 4.0 + PI * PI / (l * l) - 2.0 * spec.forcing());
            let err = |nodes: usize| {
                let g = VariationGrid::new(T_MIN, nodes).unwrap();
                let r = second_variation_spectrum(&spec, &ProfileSource::Constant(FRAC_PI_2), &g).unwrap();
                (r.hessian_min_eig - expect).abs()
            };
            let (coarse, fine) = (err(1024), err(2048));
            assert!(fine < 1e-2 * expect.abs().max(1.0), "{n} {k}: {fine}");
            assert!((3.5..4.5).contains(&(coarse / fine)), "{n} {k}: {}", coarse / fine);
        }
    }

    #[test]
    fn discrete_gradient_is_derivative() {
        let g = VariationGrid::new(T_MIN, 64).unwrap();
        let f = Functional::new(1.0, 1.0);
        let psi: Vec<f64> = g.points().iter().map(|t| 1.5 / (1.0 + (-t).exp())).collect();
        let grad = f.gradient(&g, &psi);
        let i = 20;
        let eps = 1e-6;
        let mut up = psi.clone();
        up[i] += eps;
        let mut dn = psi.clone();
        dn[i] -= eps;
        let fd = (f.discrete(&g, &up) - f.discrete(&g, &dn)) / (2.0 * eps);
        assert!((fd - grad[i - 1]).abs() < 1e-8);
    }

    #[test]
    fn rejects_small_grid() {
        assert!(VariationGrid::new(T_MIN, 32).is_err());
        assert!(VariationGrid::new(-5.0, 128).is_err());
    }
}
