//! Shooting solver for the Hopf and Join boundary-value problems on
//! `(0, π/2)`, both endpoints regular singular.
//!
//! Near `t = 0` the regular solutions are `r ≈ a t^γ (1 + β t²) + κ a³ t^{3γ}`.
//! The mirrored problem at `t = π/2` has the same form with the sphere
//! factors swapped, so the right end is handled by a second family
//! `u = target - r ≈ b s^γ' (...)`, `s = π/2 - t`. Both families are
//! integrated away from their singular point and matched at `t = π/4`:
//! for a given `a` the right coefficient `b` is chosen so that `r` agrees,
//! and the boundary error is the remaining jump in `r'`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrator::{integrate, System, Tolerances, Trajectory};
use crate::model::{Construction, HopfJoinSpec, PhasePoint};

/// Positive root of `γ(γ-1) + pγ - λ = 0`.
pub fn indicial_exponent(p: u32, lam: f64) -> Result<f64> {
    if p < 1 || !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::ParameterDomain(format!("indicial exponent needs p >= 1, lam > 0 (p = {p}, lam = {lam})")));
    }
    let b = f64::from(p) - 1.0;
    let disc = (b * b + 4.0 * lam).sqrt();
    Ok(2.0 * lam / (b + disc))
}

/// Second-order Frobenius expansion of the regular solutions at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub gamma: f64,
    /// Coefficient of `a t^{γ+2}`.
    pub beta: f64,
    /// Coefficient of `a³ t^{3γ}`.
    pub kappa: f64,
}

impl Expansion {
    pub fn new(spec: &HopfJoinSpec) -> Result<Self> {
        spec.validate()?;
        let gamma = indicial_exponent(spec.p1, spec.lam1)?;
        let p1 = f64::from(spec.p1);
        let p2 = f64::from(spec.p2);
        let indicial = |mu: f64| mu * (mu - 1.0) + p1 * mu - spec.lam1;
        let sign = match spec.kind {
            Construction::Hopf => 1.0,
            Construction::Join => -1.0,
        };
        let beta = ((p1 / 3.0 + p2) * gamma + spec.lam1 / 3.0 + sign * spec.lam2) / indicial(gamma + 2.0);
        let kappa = -(2.0 * spec.lam1 / 3.0) / indicial(3.0 * gamma);
        Ok(Self { gamma, beta, kappa })
    }

    pub fn value(&self, a: f64, t: f64) -> f64 {
        let g = self.gamma;
        a * t.powf(g) * (1.0 + self.beta * t * t) + self.kappa * a * a * a * t.powf(3.0 * g)
    }

    pub fn derivative(&self, a: f64, t: f64) -> f64 {
        let g = self.gamma;
        a * (g * t.powf(g - 1.0) + self.beta * (g + 2.0) * t.powf(g + 1.0))
            + self.kappa * a * a * a * 3.0 * g * t.powf(3.0 * g - 1.0)
    }

    pub fn state(&self, a: f64, t: f64) -> PhasePoint {
        PhasePoint::new(self.value(a, t), self.derivative(a, t))
    }
}

/// First shoot parameter tried before scanning.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum InitialGuess {
    /// Coefficient of the straight line `r = 2 target t / π`, i.e.
    /// `target (2/π)^γ`.
    #[default]
    Linear,
    Value(f64),
    /// Scan only.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpOptions {
    /// Distance from each singular endpoint where integration starts.
    pub eps: f64,
    pub tol: Tolerances,
    /// Log-spaced scan range for the shoot parameter (also used for `b`).
    pub a_range: (f64, f64),
    pub scan_points: usize,
    pub initial_guess: InitialGuess,
    pub boundary_tol: f64,
    pub residual_points: usize,
    pub exec: Execution,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            tol: Tolerances { rel: 1e-12, abs: 1e-14, ..Tolerances::default() },
            a_range: (1e-3, 1e3),
            scan_points: 61,
            initial_guess: InitialGuess::Linear,
            boundary_tol: 1e-8,
            residual_points: 1000,
            exec: Execution::default(),
        }
    }
}

impl BvpOptions {
    fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        if !(self.eps > 0.0 && self.eps < 0.1) {
            return Err(Error::ParameterDomain(format!("endpoint offset {} outside (0, 0.1)", self.eps)));
        }
        let (lo, hi) = self.a_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::ParameterDomain(format!("scan range [{lo}, {hi}] invalid")));
        }
        if self.scan_points < 2 || self.residual_points < 2 {
            return Err(Error::ParameterDomain("scan and residual grids need at least two points".into()));
        }
        if !(self.boundary_tol > 0.0) {
            return Err(Error::ParameterDomain("boundary tolerance must be positive".into()));
        }
        Ok(())
    }

    fn scan_grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.a_range.0.ln(), self.a_range.1.ln());
        let n = self.scan_points - 1;
        (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect()
    }
}

/// A converged Hopf or Join profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub spec: HopfJoinSpec,
    /// Leading coefficient at `t = 0`.
    pub a: f64,
    /// Leading coefficient of `target - r` at `t = π/2`.
    pub b: f64,
    pub left_expansion: Expansion,
    pub right_expansion: Expansion,
    pub eps: f64,
    pub t_match: f64,
    /// `t ∈ [eps, t_match]`.
    pub left: Trajectory,
    /// Mirrored variable `s = π/2 - t ∈ [eps, π/2 - t_match]`.
    pub right: Trajectory,
    pub residual: f64,
    pub boundary_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvpSummary {
    pub spec: HopfJoinSpec,
    pub a: f64,
    pub b: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub eps: f64,
    pub t_match: f64,
    pub residual: f64,
    pub boundary_error: f64,
    pub r_mid: f64,
}

impl BvpSolution {
    /// `(r, r')` anywhere in `[0, π/2]`.
    pub fn eval(&self, t: f64) -> Result<PhasePoint> {
        if !(0.0..=FRAC_PI_2).contains(&t) {
            return Err(Error::OutOfSpan { t, start: 0.0, end: FRAC_PI_2 });
        }
        let target = self.spec.target();
        if t < self.eps {
            return Ok(self.left_expansion.state(self.a, t));
        }
        if t <= self.t_match {
            return self.left.eval(t);
        }
        let s = FRAC_PI_2 - t;
        let u = if s < self.eps {
            self.right_expansion.state(self.b, s)
        } else {
            self.right.eval(s.min(self.right.t_end()))?
        };
        Ok(PhasePoint::new(target - u.psi, u.dpsi))
    }

    /// `r''` from the dense output, or from the expansions near the ends.
    fn second(&self, t: f64) -> Result<f64> {
        if t <= self.t_match {
            return Ok(self.left.eval_derivative(t)?.dpsi);
        }
        let s = (FRAC_PI_2 - t).min(self.right.t_end());
        Ok(-self.right.eval_derivative(s)?.dpsi)
    }

    /// Equation residual at `t ∈ [eps, π/2 - eps]`.
    pub fn residual_at(&self, t: f64) -> Result<f64> {
        let y = self.eval(t)?;
        Ok(self.second(t)? - self.spec.second_derivative(t, y.psi, y.dpsi))
    }

    pub fn interior_grid(&self, points: usize) -> Vec<f64> {
        let span = FRAC_PI_2 - 2.0 * self.eps;
        (0..points)
            .map(|i| self.eps + span * (i as f64 + 0.5) / points as f64)
            .collect()
    }

    pub fn summary(&self) -> BvpSummary {
        BvpSummary {
            spec: self.spec,
            a: self.a,
            b: self.b,
            gamma_left: self.left_expansion.gamma,
            gamma_right: self.right_expansion.gamma,
            eps: self.eps,
            t_match: self.t_match,
            residual: self.residual,
            boundary_error: self.boundary_error,
            r_mid: self.eval(0.5 * FRAC_PI_2).map(|y| y.psi).unwrap_or(f64::NAN),
        }
    }

    /// CSV with header `t,r,dr` on `points` uniform nodes of `[0, π/2]`.
    pub fn profile_csv(&self, points: usize, precision: usize) -> Result<String> {
        let mut out = String::from("t,r,dr\n");
        let n = points.max(2) - 1;
        for i in 0..=n {
            let t = if i == n { FRAC_PI_2 } else { FRAC_PI_2 * i as f64 / n as f64 };
            let y = self.eval(t)?;
            out.push_str(&format!("{:.p$e},{:.p$e},{:.p$e}\n", t, y.psi, y.dpsi, p = precision));
        }
        Ok(out)
    }
}

struct Match {
    b: f64,
    error: f64,
}

struct Shooter<'a> {
    spec: HopfJoinSpec,
    mirror: HopfJoinSpec,
    left_exp: Expansion,
    right_exp: Expansion,
    opts: &'a BvpOptions,
    t_match: f64,
    /// `(b, r at t_match)` over the scan grid.
    right_scan: Vec<(f64, f64)>,
}

fn shoot(spec: &HopfJoinSpec, exp: &Expansion, coef: f64, eps: f64, t_end: f64, tol: &Tolerances) -> Result<Trajectory> {
    let spec = *spec;
    integrate(
        System::HopfJoin(spec),
        move |t, y: PhasePoint| PhasePoint::new(y.dpsi, spec.second_derivative(t, y.psi, y.dpsi)),
        eps,
        exp.state(coef, eps),
        t_end,
        tol,
        &[],
    )
}

impl<'a> Shooter<'a> {
    fn new(spec: &HopfJoinSpec, opts: &'a BvpOptions) -> Result<Self> {
        let mirror = spec.mirrored();
        let mut s = Self {
            spec: *spec,
            mirror,
            left_exp: Expansion::new(spec)?,
            right_exp: Expansion::new(&mirror)?,
            opts,
            t_match: 0.5 * FRAC_PI_2,
            right_scan: Vec::new(),
        };
        let grid = opts.scan_grid();
        let rs = opts.exec.map(&grid, |&b| s.right_r(b).ok());
        s.right_scan = grid
            .into_iter()
            .zip(rs)
            .filter_map(|(b, r)| r.map(|r| (b, r)))
            .collect();
        Ok(s)
    }

    fn left(&self, a: f64) -> Result<Trajectory> {
        shoot(&self.spec, &self.left_exp, a, self.opts.eps, self.t_match, &self.opts.tol)
    }

    fn right(&self, b: f64) -> Result<Trajectory> {
        shoot(&self.mirror, &self.right_exp, b, self.opts.eps, FRAC_PI_2 - self.t_match, &self.opts.tol)
    }

    /// `(r, r')` of the right family at the matching point.
    fn right_state(&self, b: f64) -> Result<PhasePoint> {
        let u = self.right(b)?.last();
        Ok(PhasePoint::new(self.spec.target() - u.psi, u.dpsi))
    }

    fn right_r(&self, b: f64) -> Result<f64> {
        Ok(self.right_state(b)?.psi)
    }

    /// Match `r` with the right family, return the jump in `r'`.
    fn mismatch(&self, a: f64) -> Result<Match> {
        let l = self.left(a)?.last();
        let mut best: Option<Match> = None;
        let g = |b: f64| -> Result<f64> { Ok(self.right_r(b)? - l.psi) };
        let mut consider = |b: f64| -> Result<()> {
            let r = self.right_state(b)?;
            let error = l.dpsi - r.dpsi;
            if best.as_ref().is_none_or(|m| error.abs() < m.error.abs()) {
                best = Some(Match { b, error });
            }
            Ok(())
        };
        for w in self.right_scan.windows(2) {
            let ((b0, r0), (b1, r1)) = (w[0], w[1]);
            let (g0, g1) = (r0 - l.psi, r1 - l.psi);
            if g0 == 0.0 {
                consider(b0)?;
            } else if g0 * g1 < 0.0 {
                let b = illinois(&g, b0, b1, g0, g1, 1e-15)?;
                consider(b)?;
            }
        }
        if let Some(&(b, r)) = self.right_scan.last() {
            if r == l.psi {
                consider(b)?;
            }
        }
        best.ok_or(Error::NoBracket { lo: self.opts.a_range.0, hi: self.opts.a_range.1 })
    }

    fn in_range(&self, traj: &Trajectory) -> bool {
        let top = self.spec.target() + 1e-9;
        traj.samples().iter().all(|s| s.state.psi >= -1e-9 && s.state.psi <= top)
    }

    fn finish(&self, a: f64) -> Result<Option<BvpSolution>> {
        let m = self.mismatch(a)?;
        if !(m.error.abs() < self.opts.boundary_tol) {
            return Ok(None);
        }
        let left = self.left(a)?;
        let right = self.right(m.b)?;
        if !self.in_range(&left) || !self.in_range(&right) {
            return Ok(None);
        }
        let mut sol = BvpSolution {
            spec: self.spec,
            a,
            b: m.b,
            left_expansion: self.left_exp,
            right_expansion: self.right_exp,
            eps: self.opts.eps,
            t_match: self.t_match,
            left,
            right,
            residual: 0.0,
            boundary_error: m.error,
        };
        let grid = sol.interior_grid(self.opts.residual_points);
        let mut worst = 0.0f64;
        for t in grid {
            worst = worst.max(sol.residual_at(t)?.abs());
        }
        sol.residual = worst;
        Ok(Some(sol))
    }
}

/// Regula falsi with the Illinois modification on a sign-changing bracket.
fn illinois<F: Fn(f64) -> Result<f64>>(f: &F, mut x0: f64, mut x1: f64, mut f0: f64, mut f1: f64, rel: f64) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (x0 * f1 - x1 * f0) / (f1 - f0);
        let x = if x.is_finite() && x > x0.min(x1) && x < x0.max(x1) { x } else { 0.5 * (x0 + x1) };
        let fx = f(x)?;
        if fx == 0.0 || (x1 - x0).abs() <= rel * x.abs() {
            return Ok(x);
        }
        if fx * f1 < 0.0 {
            x0 = x1;
            f0 = f1;
            side = 0;
        } else {
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
        x1 = x;
        f1 = fx;
    }
    Ok(if f0.abs() < f1.abs() { x0 } else { x1 })
}

/// Solve the Hopf (`r(π/2) = π`) or Join (`r(π/2) = π/2`) problem.
pub fn solve_bvp(spec: &HopfJoinSpec, opts: &BvpOptions) -> Result<BvpSolution> {
    spec.validate()?;
    opts.validate()?;
    let shooter = Shooter::new(spec, opts)?;

    let guess = match opts.initial_guess {
        InitialGuess::Linear => Some(spec.target() * (2.0 / std::f64::consts::PI).powf(shooter.left_exp.gamma)),
        InitialGuess::Value(a) => Some(a),
        InitialGuess::Off => None,
    };
    if let Some(a0) = guess {
        if let Ok(Some(sol)) = shooter.finish(a0) {
            return Ok(sol);
        }
    }

    let grid = opts.scan_grid();
    let errors = opts
        .exec
        .map(&grid, |&a| shooter.mismatch(a).ok().map(|m| m.error).filter(|e| e.is_finite()));
    let f = |a: f64| -> Result<f64> { Ok(shooter.mismatch(a)?.error) };
    for i in 0..grid.len() - 1 {
        let (Some(e0), Some(e1)) = (errors[i], errors[i + 1]) else { continue };
        let a = if e0 == 0.0 {
            grid[i]
        } else if e0 * e1 < 0.0 {
            match illinois(&f, grid[i], grid[i + 1], e0, e1, 1e-15) {
                Ok(a) => a,
                Err(_) => continue,
            }
        } else {
            continue;
        };
        if let Ok(Some(sol)) = shooter.finish(a) {
            return Ok(sol);
        }
    }
    Err(Error::NoBracket { lo: opts.a_range.0, hi: opts.a_range.1 })
}

/// Boundary error for a fixed shoot parameter, without iterating.
pub fn boundary_error(spec: &HopfJoinSpec, a: f64, opts: &BvpOptions) -> Result<f64> {
    spec.validate()?;
    opts.validate()?;
    Ok(Shooter::new(spec, opts)?.mismatch(a)?.error)
}

/// Solve several independent problems.
pub fn solve_many(specs: &[HopfJoinSpec], opts: &BvpOptions) -> Vec<Result<BvpSolution>> {
    let inner = BvpOptions { exec: Execution::Sequential, ..opts.clone() };
    opts.exec.map(specs, |s| solve_bvp(s, &inner))
}
