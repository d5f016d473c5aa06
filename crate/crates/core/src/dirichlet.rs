//! Canonical heteroclinic trajectory, Dirichlet solution enumeration,
//! critical boundary values and radial profile reconstruction.
//!
//! For `n ≥ 3` every smooth solution with boundary angle `rho` is
//! `Φ(r) = Ψ_n(τ + ln r)` with `Ψ_n(τ) = rho` (north-pole family) or
//! `Φ(r) = π - Ψ_n(τ + ln r)` with `Ψ_n(τ) = π - rho` (south-pole family),
//! where `Ψ_n` is the canonical orbit from `(0, 0)` to `(π/2, 0)`
//! normalized by `e^{-λ⁺ t} Ψ_n(t) → 1` as `t → -∞`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize, Serializer};

use crate::asymptotics::{self, Classification};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrator::{integrate, Direction, EventKind, EventRequest, Extremum, System, Tolerances, Trajectory};
use crate::model::{sin2, PhasePoint, ProblemSpec, Variant};

/// Levels within this distance of an extremum value are tangencies.
pub const TANGENCY_TOL: f64 = 1e-9;
/// Maximum `|Ψ_n(τ) - level|` accepted for a localized crossing.
pub const CROSSING_TOL: f64 = 1e-8;
/// Boundary angles this close to `0` or `π` are treated as the pole itself.
pub const ENDPOINT_SNAP: f64 = 1e-12;
/// Half-width of the three-point stencil used to refine extrema.
const EXTREMUM_STENCIL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub tol: Tolerances,
    /// Launch offset on the unstable manifold of the pole.
    pub delta: f64,
    /// Capture radius around the equator in the `(q, p)` chart.
    pub capture_radius: f64,
    /// Maximum integration span after launch.
    pub t_budget: f64,
    /// Levels whose crossings are recorded during integration.
    pub levels: Vec<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            delta: 1e-8,
            capture_radius: 1e-9,
            t_budget: 1e4,
            levels: Vec::new(),
        }
    }
}

/// An extremum of `Ψ_n` refined by a three-point quadratic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedExtremum {
    pub t: f64,
    pub value: f64,
    pub kind: Extremum,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCrossings {
    pub level: f64,
    pub times: Vec<f64>,
}

/// The normalized orbit `Ψ_n` from the pole saddle to equator capture.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTrajectory {
    pub spec: ProblemSpec,
    pub traj: Trajectory,
    /// Unstable exponent at the pole.
    pub lambda_plus: f64,
    /// Enforced limit of `e^{-λ⁺ t} Ψ(t)` as `t → -∞`.
    pub normalization: f64,
    pub extrema: Vec<RefinedExtremum>,
    pub level_crossings: Vec<LevelCrossings>,
}

fn require_traceable(spec: &ProblemSpec) -> Result<()> {
    spec.validate()?;
    if !matches!(spec.variant, Variant::FlatBallLog | Variant::TwistedLog) {
        return Err(Error::ParameterDomain("canonical trace needs a log-variable variant".into()));
    }
    if spec.n < 3 {
        return Err(Error::ParameterDomain("canonical trace needs n >= 3".into()));
    }
    Ok(())
}

/// Launch on the pole's unstable manifold and integrate to equator capture.
pub fn trace_canonical(spec: &ProblemSpec, opts: &TraceOptions) -> Result<CanonicalTrajectory> {
    require_traceable(spec)?;
    let (t0, start) = asymptotics::manifold_start(spec, opts.delta)?;
    let (lambda_plus, _) = asymptotics::origin_exponents(spec)?;
    let center = PhasePoint::new(FRAC_PI_2, 0.0);
    let mut requests = vec![
        EventRequest::Extrema,
        EventRequest::Capture { center, radius: opts.capture_radius },
    ];
    requests.extend(
        opts.levels
            .iter()
            .map(|&level| EventRequest::Level { level, direction: Direction::Either }),
    );
    let mut tol = opts.tol;
    tol.abs = tol.abs.min(tol.rel * opts.delta);
    let traj = integrate(
        System::Problem(*spec),
        spec.vector_field(),
        t0,
        start,
        t0 + opts.t_budget,
        &tol,
        &requests,
    )?;
    if traj.captured().is_none() {
        return Err(Error::NoCapture { t_end: traj.t_end() });
    }

    let mut extrema = Vec::new();
    for e in traj.events() {
        if let EventKind::LocalExtremum { kind } = e.kind {
            extrema.push(refine_extremum(&traj, e.t, kind)?);
        }
    }
    let level_crossings = opts
        .levels
        .iter()
        .map(|&level| LevelCrossings {
            level,
            times: traj
                .events()
                .iter()
                .filter(|e| matches!(e.kind, EventKind::LevelCrossing { level: l, .. } if l == level))
                .map(|e| e.t)
                .collect(),
        })
        .collect();

    Ok(CanonicalTrajectory {
        spec: *spec,
        traj,
        lambda_plus,
        normalization: 1.0,
        extrema,
        level_crossings,
    })
}

fn refine_extremum(traj: &Trajectory, t: f64, kind: Extremum) -> Result<RefinedExtremum> {
    let h = EXTREMUM_STENCIL
        .min(t - traj.t_start())
        .min(traj.t_end() - t);
    let f0 = traj.eval(t)?.psi;
    if h <= 0.0 {
        return Ok(RefinedExtremum { t, value: f0, kind, bracket: (t, t) });
    }
    let fm = traj.eval(t - h)?.psi;
    let fp = traj.eval(t + h)?.psi;
    let curv = fm - 2.0 * f0 + fp;
    let (tv, value) = if curv != 0.0 {
        let off = 0.5 * h * (fm - fp) / curv;
        (t + off, f0 - (fm - fp) * (fm - fp) / (8.0 * curv))
    } else {
        (t, f0)
    };
    Ok(RefinedExtremum { t: tv, value, kind, bracket: (t - h, t + h) })
}

/// One root of `Ψ_n(τ) = level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub tau: f64,
    /// The level touches an extremum; counted once.
    pub tangent: bool,
}

impl CanonicalTrajectory {
    pub fn t_start(&self) -> f64 {
        self.traj.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.traj.t_end()
    }

    /// `(Ψ_n, Ψ_n')` at `t`, using the asymptotic tail `e^{λ⁺ t}` before
    /// the launch time.
    pub fn state(&self, t: f64) -> Result<PhasePoint> {
        if t < self.t_start() {
            let v = self.normalization * (self.lambda_plus * t).exp();
            return Ok(PhasePoint::new(v, self.lambda_plus * v));
        }
        self.traj.eval(t)
    }

    /// `(Ψ_n', Ψ_n'')` from differentiating the dense interpolant (or the tail).
    pub fn state_derivative(&self, t: f64) -> Result<PhasePoint> {
        if t < self.t_start() {
            let v = self.normalization * (self.lambda_plus * t).exp();
            let l = self.lambda_plus;
            return Ok(PhasePoint::new(l * v, l * l * v));
        }
        self.traj.eval_derivative(t)
    }

    /// Monotone pieces of `Ψ_n`: launch, every extremum, capture.
    fn breakpoints(&self) -> Vec<(f64, f64, bool)> {
        let mut pts = Vec::with_capacity(self.extrema.len() + 2);
        pts.push((self.t_start(), self.traj.first().psi, false));
        pts.extend(self.extrema.iter().map(|e| (e.t, e.value, true)));
        pts.push((self.t_end(), self.traj.last().psi, false));
        pts
    }

    /// All `τ` with `Ψ_n(τ) = level`, sorted, tangencies counted once.
    pub fn crossings(&self, level: f64) -> Result<Vec<Root>> {
        let mut roots = Vec::new();
        let pts = self.breakpoints();
        if level > 0.0 && level < pts[0].1 {
            roots.push(Root { tau: (level / self.normalization).ln() / self.lambda_plus, tangent: false });
        }
        let is_tangent = |p: &(f64, f64, bool)| p.2 && (p.1 - level).abs() < TANGENCY_TOL;
        for (i, w) in pts.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if i == 0 && is_tangent(&a) {
                roots.push(Root { tau: a.0, tangent: true });
            }
            if is_tangent(&b) {
                roots.push(Root { tau: b.0, tangent: true });
                continue;
            }
            if is_tangent(&a) {
                continue;
            }
            let (ga, gb) = (a.1 - level, b.1 - level);
            if ga * gb < 0.0 {
                let tau = self.bisect_level(level, a.0, b.0, ga)?;
                roots.push(Root { tau, tangent: false });
            } else if gb == 0.0 && !b.2 {
                roots.push(Root { tau: b.0, tangent: false });
            }
        }
        roots.sort_by(|x, y| x.tau.total_cmp(&y.tau));
        Ok(roots)
    }

    fn bisect_level(&self, level: f64, mut a: f64, mut b: f64, mut ga: f64) -> Result<f64> {
        let tol = self.traj_event_tol();
        while b - a > tol {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let gm = self.traj.eval(m)?.psi - level;
            if gm == 0.0 {
                return Ok(m);
            }
            if ga * gm < 0.0 {
                b = m;
            } else {
                a = m;
                ga = gm;
            }
        }
        let tau = 0.5 * (a + b);
        let residual = (self.traj.eval(tau)?.psi - level).abs();
        if residual > CROSSING_TOL {
            return Err(Error::TolExceeded { level, residual });
        }
        Ok(tau)
    }

    fn traj_event_tol(&self) -> f64 {
        1e-12
    }

    /// Maximum of `Ψ_n` over the trace.
    pub fn sup(&self) -> f64 {
        self.extrema
            .iter()
            .filter(|e| e.kind == Extremum::Max)
            .map(|e| e.value)
            .chain(self.traj.samples().iter().map(|s| s.state.psi))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    North,
    South,
}

/// One Dirichlet solution, identified by its shift `τ` and covered pole.
/// `τ = -∞` denotes the constant map onto that pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub tau: f64,
    pub pole: Pole,
    pub tangent: bool,
}

impl Solution {
    pub fn is_constant(&self) -> bool {
        self.tau == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionCount {
    Finite(usize),
    Infinite,
}

impl SolutionCount {
    pub fn is_zero(&self) -> bool {
        *self == SolutionCount::Finite(0)
    }

    fn plus(self, other: SolutionCount) -> SolutionCount {
        match (self, other) {
            (SolutionCount::Finite(a), SolutionCount::Finite(b)) => SolutionCount::Finite(a + b),
            _ => SolutionCount::Infinite,
        }
    }
}

impl std::fmt::Display for SolutionCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolutionCount::Finite(n) => write!(f, "{n}"),
            SolutionCount::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for SolutionCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SolutionCount::Finite(n) => s.serialize_u64(*n as u64),
            SolutionCount::Infinite => s.serialize_str("infinite"),
        }
    }
}

/// All solutions of the Dirichlet problem for one boundary angle.
///
/// `count` is the number of north-pole solutions: the intersections of the
/// vertical line `psi = rho` with the canonical orbit. The south-pole family
/// (`π - Ψ_n`) is reported separately in `south_count` and the joint number
/// in `joint_count`. The equator map is flagged, not counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletSolutionSet {
    pub spec: ProblemSpec,
    pub rho: f64,
    pub solutions: Vec<Solution>,
    pub includes_equator: bool,
    pub count: SolutionCount,
    pub south_count: SolutionCount,
    pub joint_count: SolutionCount,
}

impl DirichletSolutionSet {
    pub fn north(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.pole == Pole::North)
    }

    pub fn south(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.pole == Pole::South)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletOptions {
    pub trace: TraceOptions,
    /// Crossings materialized when the count is infinite.
    pub materialize: usize,
}

impl Default for DirichletOptions {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), materialize: 10 }
    }
}

/// Validated boundary angle, snapped to `0` or `π` within [`ENDPOINT_SNAP`].
fn boundary_angle(rho: f64) -> Result<f64> {
    if (rho - PI).abs() < ENDPOINT_SNAP {
        return Ok(PI);
    }
    if rho.abs() < ENDPOINT_SNAP {
        return Ok(0.0);
    }
    if !(0.0..=PI).contains(&rho) {
        return Err(Error::ParameterDomain(format!("boundary angle {rho} outside [0, π]")));
    }
    Ok(rho)
}

fn is_equator(rho: f64) -> bool {
    (rho - FRAC_PI_2).abs() < TANGENCY_TOL
}

/// Enumerate the Dirichlet solutions for boundary angle `rho`.
pub fn solve_dirichlet(spec: &ProblemSpec, rho: f64, opts: &DirichletOptions) -> Result<DirichletSolutionSet> {
    spec.validate()?;
    let rho = boundary_angle(rho)?;
    if spec.n == 2 {
        return Ok(solve_n2(spec, rho));
    }
    let ct = trace_canonical(spec, &opts.trace)?;
    solve_with(&ct, rho, opts.materialize)
}

/// Enumerate solutions against an existing trace.
pub fn solve_with(ct: &CanonicalTrajectory, rho: f64, materialize: usize) -> Result<DirichletSolutionSet> {
    let rho = boundary_angle(rho)?;
    let spec = ct.spec;
    let equator = is_equator(rho);
    let spiral = asymptotics::equator(&spec)?.classification == Classification::StableSpiral;
    let infinite = equator && spiral;

    let family = |level: f64, pole: Pole| -> Result<(Vec<Solution>, SolutionCount)> {
        if level == 0.0 {
            return Ok((vec![Solution { tau: f64::NEG_INFINITY, pole, tangent: false }], SolutionCount::Finite(1)));
        }
        if level >= PI {
            return Ok((Vec::new(), SolutionCount::Finite(0)));
        }
        let level = if equator { FRAC_PI_2 } else { level };
        let mut roots = ct.crossings(level)?;
        let count = if infinite {
            roots.truncate(materialize);
            SolutionCount::Infinite
        } else {
            SolutionCount::Finite(roots.len())
        };
        let sols = roots
            .into_iter()
            .map(|r| Solution { tau: r.tau, pole, tangent: r.tangent })
            .collect();
        Ok((sols, count))
    };

    let (mut solutions, count) = family(rho, Pole::North)?;
    let (south, south_count) = family(PI - rho, Pole::South)?;
    solutions.extend(south);
    Ok(DirichletSolutionSet {
        spec,
        rho,
        solutions,
        includes_equator: equator,
        count,
        south_count,
        joint_count: count.plus(south_count),
    })
}

/// Solve many boundary angles against one trace.
pub fn solve_many(ct: &CanonicalTrajectory, rhos: &[f64], materialize: usize, exec: Execution) -> Result<Vec<DirichletSolutionSet>> {
    exec.map(rhos, |&rho| solve_with(ct, rho, materialize))
        .into_iter()
        .collect()
}

/// Shift of the normalized `n = 2` orbit `Ψ_2(t) = 2 arctan(e^{kt}/2)`
/// reaching `level`.
fn tau_n2(k: u32, level: f64) -> f64 {
    (2.0 * (0.5 * level).tan()).ln() / f64::from(k)
}

fn solve_n2(spec: &ProblemSpec, rho: f64) -> DirichletSolutionSet {
    let mut solutions = Vec::new();
    let mut north = 0;
    let mut south = 0;
    if rho < PI {
        let tau = if rho == 0.0 { f64::NEG_INFINITY } else { tau_n2(spec.k, rho) };
        solutions.push(Solution { tau, pole: Pole::North, tangent: false });
        north = 1;
    }
    if rho > 0.0 {
        let tau = if rho == PI { f64::NEG_INFINITY } else { tau_n2(spec.k, PI - rho) };
        solutions.push(Solution { tau, pole: Pole::South, tangent: false });
        south = 1;
    }
    DirichletSolutionSet {
        spec: *spec,
        rho,
        solutions,
        includes_equator: false,
        count: SolutionCount::Finite(north),
        south_count: SolutionCount::Finite(south),
        joint_count: SolutionCount::Finite(north + south),
    }
}

/// `ρ_n`, the maximum of `Ψ_n`, and `σ_n`, its smallest local minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub n: u32,
    pub k: u32,
    pub rho_n: f64,
    pub sigma_n: f64,
    pub t_rho: f64,
    pub t_sigma: f64,
    pub brackets: Vec<(f64, f64)>,
    pub tol: f64,
}

/// Critical values from an existing trace.
pub fn critical_values_of(ct: &CanonicalTrajectory) -> Result<CriticalValues> {
    let spec = ct.spec;
    if asymptotics::equator(&spec)?.classification != Classification::StableSpiral {
        return Err(Error::NotSpiral { n: spec.n, k: spec.k });
    }
    let pick = |kind: Extremum, better: fn(f64, f64) -> bool| {
        ct.extrema
            .iter()
            .filter(|e| e.kind == kind)
            .fold(None::<&RefinedExtremum>, |acc, e| match acc {
                Some(a) if !better(e.value, a.value) => Some(a),
                _ => Some(e),
            })
    };
    let max = pick(Extremum::Max, |a, b| a > b).ok_or(Error::NotSpiral { n: spec.n, k: spec.k })?;
    let min = pick(Extremum::Min, |a, b| a < b).ok_or(Error::NotSpiral { n: spec.n, k: spec.k })?;
    Ok(CriticalValues {
        n: spec.n,
        k: spec.k,
        rho_n: max.value,
        sigma_n: min.value,
        t_rho: max.t,
        t_sigma: min.t,
        brackets: vec![max.bracket, min.bracket],
        tol: 1e-10,
    })
}

pub fn critical_values(spec: &ProblemSpec, opts: &TraceOptions) -> Result<CriticalValues> {
    require_traceable(spec)?;
    if asymptotics::equator(spec)?.classification != Classification::StableSpiral {
        return Err(Error::NotSpiral { n: spec.n, k: spec.k });
    }
    critical_values_of(&trace_canonical(spec, opts)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// `n` log-spaced radii in `[lo, 1]`.
pub fn log_grid(lo: f64, n: usize) -> Vec<f64> {
    let a = lo.ln();
    (0..n)
        .map(|i| if i + 1 == n { 1.0 } else { (a * (1.0 - i as f64 / (n - 1) as f64)).exp() })
        .collect()
}

/// Default radial grid: 1000 log-spaced points in `[1e-6, 1]`.
pub fn default_r_grid() -> Vec<f64> {
    log_grid(1e-6, 1000)
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::ParameterDomain(format!("radius {r} outside (0, 1]")));
    }
    Ok(())
}

/// Radial profile `Φ(r) = Ψ_n(τ + ln r)`, `Φ'(r) = Ψ_n'(τ + ln r)/r`.
pub fn profile(ct: &CanonicalTrajectory, tau: f64, r_grid: &[f64]) -> Result<Vec<ProfilePoint>> {
    r_grid
        .iter()
        .map(|&r| {
            check_r(r)?;
            let s = ct.state(tau + r.ln())?;
            Ok(ProfilePoint { r, phi: s.psi, dphi: s.dpsi / r })
        })
        .collect()
}

/// Residual of the radial equation, multiplied by `r²`, along a
/// reconstructed profile. `Φ''` comes from differentiating the dense output.
///
/// In `t = ln r` this is `Ψ'' + D Ψ' - K sin 2Ψ`, which for the flat ball is
/// `r² (Φ'' + (n-1)Φ'/r - e_k sin(2Φ)/r²)`.
pub fn profile_residuals(ct: &CanonicalTrajectory, tau: f64, r_grid: &[f64]) -> Result<Vec<f64>> {
    let d = ct.spec.damping();
    let k = ct.spec.forcing();
    r_grid
        .iter()
        .map(|&r| {
            check_r(r)?;
            let t = tau + r.ln();
            let s = ct.state(t)?;
            let ds = ct.state_derivative(t)?;
            Ok(ds.dpsi + d * s.dpsi - k * sin2(s.psi))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `2 arctan(r^k tan(ρ/2))`, covers the north pole.
    Inner,
    /// `2 arctan(r^{-k} tan(ρ/2))`, covers the south pole.
    Outer,
}

/// Exact `n = 2` solution through boundary angle `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormN2 {
    pub k: u32,
    pub rho: f64,
    pub branch: Branch,
}

pub fn closed_form_n2(k: u32, rho: f64, branch: Branch) -> Result<ClosedFormN2> {
    if k < 1 {
        return Err(Error::ParameterDomain(format!("k = {k} < 1")));
    }
    if !(0.0..PI).contains(&rho) {
        return Err(Error::ParameterDomain(format!(
            "boundary angle {rho} outside [0, π): no solution for n = 2"
        )));
    }
    Ok(ClosedFormN2 { k, rho, branch })
}

impl ClosedFormN2 {
    fn amplitude(&self) -> f64 {
        (0.5 * self.rho).tan()
    }

    fn exponent(&self) -> f64 {
        match self.branch {
            Branch::Inner => f64::from(self.k),
            Branch::Outer => -f64::from(self.k),
        }
    }

    /// `Φ(r)`; at `r = 0` the outer branch uses `arctan(∞) = π/2`.
    pub fn phi(&self, r: f64) -> f64 {
        if r == 1.0 {
            return self.rho;
        }
        let a = self.amplitude();
        if a == 0.0 {
            return 0.0;
        }
        if r == 0.0 {
            return match self.branch {
                Branch::Inner => 0.0,
                Branch::Outer => PI,
            };
        }
        let u = a * r.powf(self.exponent());
        if u > 1.0 {
            PI - 2.0 * (1.0 / u).atan()
        } else {
            2.0 * u.atan()
        }
    }

    pub fn dphi(&self, r: f64) -> f64 {
        let a = self.amplitude();
        let e = self.exponent();
        let u = a * r.powf(e);
        let du = e * u / r;
        2.0 * du / (1.0 + u * u)
    }

    pub fn ddphi(&self, r: f64) -> f64 {
        let a = self.amplitude();
        let e = self.exponent();
        let u = a * r.powf(e);
        let du = e * u / r;
        let ddu = e * (e - 1.0) * u / (r * r);
        let w = 1.0 + u * u;
        2.0 * (ddu * w - 2.0 * u * du * du) / (w * w)
    }

    /// `r²`-scaled residual of the `n = 2` radial equation at `r`.
    pub fn residual(&self, r: f64) -> f64 {
        let density = 0.5 * f64::from(self.k) * f64::from(self.k);
        crate::model::radial_residual(2, density, r, self.phi(r), self.dphi(r), self.ddphi(r))
    }
}

/// Solution regime of a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Closed,
    Spiral,
    Node,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub k: u32,
    pub rho: f64,
    pub regime: Regime,
    pub count: SolutionCount,
    pub south_count: SolutionCount,
    pub joint_count: SolutionCount,
    pub includes_equator: bool,
}

/// Solution counts over a grid of dimensions and boundary angles.
/// Rows are ordered by `(n, rho)` regardless of execution order.
pub fn sweep(k: u32, ns: &[u32], rhos: &[f64], opts: &DirichletOptions, exec: Execution) -> Result<Vec<SweepRow>> {
    let mut rhos = rhos.iter().map(|&rho| boundary_angle(rho)).collect::<Result<Vec<_>>>()?;
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    rhos.sort_by(f64::total_cmp);

    let per_n = exec.map(&ns, |&n| -> Result<Vec<SweepRow>> {
        let spec = ProblemSpec::flat(n, k);
        spec.validate()?;
        let (sets, regime) = if n == 2 {
            (rhos.iter().map(|&rho| solve_n2(&spec, rho)).collect(), Regime::Closed)
        } else {
            let ct = trace_canonical(&spec, &opts.trace)?;
            let regime = match asymptotics::equator(&spec)?.classification {
                Classification::StableSpiral => Regime::Spiral,
                _ => Regime::Node,
            };
            (solve_many(&ct, &rhos, opts.materialize, exec)?, regime)
        };
        Ok(sets
            .into_iter()
            .map(|s| SweepRow {
                n,
                k,
                rho: s.rho,
                regime,
                count: s.count,
                south_count: s.south_count,
                joint_count: s.joint_count,
                includes_equator: s.includes_equator,
            })
            .collect())
    });
    let mut rows = Vec::new();
    for r in per_n {
        rows.extend(r?);
    }
    Ok(rows)
}

/// CSV rendering of a sweep table.
pub fn sweep_csv(rows: &[SweepRow], precision: usize) -> String {
    let mut out = String::from("n,k,rho,regime,count,south_count,joint_count,includes_equator\n");
    for r in rows {
        let regime = match r.regime {
            Regime::Closed => "closed",
            Regime::Spiral => "spiral",
            Regime::Node => "node",
        };
        out.push_str(&format!(
            "{},{},{:.p$e},{},{},{},{},{}\n",
            r.n,
            r.k,
            r.rho,
            regime,
            r.count,
            r.south_count,
            r.joint_count,
            r.includes_equator,
            p = precision
        ));
    }
    out
}
