//! Dormand–Prince 5(4) integration of planar systems with dense output and
//! event location.
//!
//! The integrator is specialised to the two-dimensional state
//! [`PhasePoint`] used by every ODE family in this crate. Each accepted step
//! stores the coefficients of the fourth-order continuous extension so the
//! solution can be evaluated, and differentiated, anywhere in the covered span.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HopfJoinSpec, PhasePoint, ProblemSpec};

/// Step-size control parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    /// Width in `t` to which events are bracketed.
    pub event: f64,
    pub max_steps: usize,
    /// Upper bound on a single step.
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
            event: 1e-12,
            max_steps: 10_000_000,
            max_step: f64::INFINITY,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.abs > 0.0 && self.event > 0.0 && self.max_step > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "tolerances must be positive (rel = {}, abs = {}, event = {}, max_step = {})",
                self.rel, self.abs, self.event, self.max_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::ParameterDomain("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Crossing direction filter for level events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

/// Events the integrator should watch for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventRequest {
    /// `psi` crosses `level`.
    Level { level: f64, direction: Direction },
    /// `psi'` changes sign.
    Extrema,
    /// The state enters the `(q, p)`-chart ball of `radius` around `center`;
    /// integration stops there.
    Capture { center: PhasePoint, radius: f64 },
}

/// What happened at a recorded event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    /// `direction` is `+1` for a rising crossing, `-1` for a falling one.
    LevelCrossing { level: f64, direction: i8 },
    LocalExtremum { kind: Extremum },
    EquilibriumCapture { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state: PhasePoint,
}

/// The system a trajectory belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum System {
    Problem(ProblemSpec),
    HopfJoin(HopfJoinSpec),
    Custom { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhasePoint,
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseSegment {
    t0: f64,
    h: f64,
    coef: [[f64; 2]; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> [f64; 2] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coef;
        let mut y = [0.0; 2];
        for i in 0..2 {
            y[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        y
    }

    fn derivative(&self, t: f64) -> [f64; 2] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coef;
        let mut dy = [0.0; 2];
        for i in 0..2 {
            let g = c[3][i] + th1 * c[4][i];
            let dg = -c[4][i];
            let f = c[2][i] + th * g;
            let df = g + th * dg;
            let e = c[1][i] + th1 * f;
            let de = -f + th1 * df;
            dy[i] = (e + th * de) / self.h;
        }
        dy
    }
}

/// A solution curve with dense output and the events found along it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system: System,
    samples: Vec<Sample>,
    segments: Vec<DenseSegment>,
    events: Vec<Event>,
}

impl Trajectory {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn first(&self) -> PhasePoint {
        self.samples[0].state
    }

    pub fn last(&self) -> PhasePoint {
        self.samples[self.samples.len() - 1].state
    }

    pub fn captured(&self) -> Option<&Event> {
        self.events
            .iter()
            .find(|e| matches!(e.kind, EventKind::EquilibriumCapture { .. }))
    }

    /// Segment breakpoints, i.e. the sample times.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    fn segment(&self, t: f64) -> Result<&DenseSegment> {
        let (start, end) = (self.t_start(), self.t_end());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfSpan { t, start, end });
        }
        if self.segments.is_empty() {
            return Err(Error::OutOfSpan { t, start, end });
        }
        let idx = self.segments.partition_point(|s| s.t0 <= t);
        Ok(&self.segments[idx.saturating_sub(1)])
    }

    /// Dense evaluation at any `t` in the covered span.
    pub fn eval(&self, t: f64) -> Result<PhasePoint> {
        if self.segments.is_empty() && t == self.t_start() {
            return Ok(self.first());
        }
        let y = self.segment(t)?.eval(t);
        Ok(PhasePoint::new(y[0], y[1]))
    }

    /// Time derivative of the dense interpolant, `(psi', psi'')`.
    ///
    /// This differentiates the interpolating polynomial; it never calls the
    /// right-hand side, so it can serve as an independent residual check.
    pub fn eval_derivative(&self, t: f64) -> Result<PhasePoint> {
        let y = self.segment(t)?.derivative(t);
        Ok(PhasePoint::new(y[0], y[1]))
    }

    /// CSV with header `t,psi,dpsi,q,p,V`, where `V = psi'² - 2K sin² psi`.
    pub fn to_csv(&self, forcing: f64, precision: usize) -> String {
        let mut out = String::from("t,psi,dpsi,q,p,V\n");
        for s in &self.samples {
            let (q, p) = s.state.to_qp();
            let sn = s.state.psi.sin();
            let v = s.state.dpsi * s.state.dpsi - 2.0 * forcing * sn * sn;
            let _ = writeln!(
                out,
                "{:.p$e},{:.p$e},{:.p$e},{:.p$e},{:.p$e},{:.p$e}",
                s.t,
                s.state.psi,
                s.state.dpsi,
                q,
                p,
                v,
                p = precision
            );
        }
        out
    }

    /// JSON document with the system, the samples and an `events` array.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "system": self.system,
            "t_start": self.t_start(),
            "t_end": self.t_end(),
            "samples": self.samples.iter().map(|s| [s.t, s.state.psi, s.state.dpsi]).collect::<Vec<_>>(),
            "events": self.events,
        })
    }
}

/// Dense evaluation of `traj` at `t`.
pub fn eval_dense(traj: &Trajectory, t: f64) -> Result<PhasePoint> {
    traj.eval(t)
}

// Dormand–Prince 5(4) tableau with Hairer's dense-output coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type V2 = [f64; 2];

fn lin(y: V2, terms: &[(f64, &V2)], h: f64) -> V2 {
    let mut out = y;
    for (a, k) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

/// Sub-intervals per step scanned for sign changes of event functions.
const EVENT_SUBDIVISIONS: usize = 4;

/// Integrate `f` from `(t0, y0)` to `t_end`, recording the requested events.
///
/// Integration stops at `t_end` or at the first step end that satisfies a
/// [`EventRequest::Capture`].
pub fn integrate<F>(
    system: System,
    f: F,
    t0: f64,
    y0: PhasePoint,
    t_end: f64,
    tol: &Tolerances,
    requests: &[EventRequest],
) -> Result<Trajectory>
where
    F: Fn(f64, PhasePoint) -> PhasePoint,
{
    tol.validate()?;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::ParameterDomain(format!("need t_end > t0 (t0 = {t0}, t_end = {t_end})")));
    }
    if !y0.is_finite() {
        return Err(Error::ParameterDomain("initial state is not finite".into()));
    }
    for r in requests {
        match *r {
            EventRequest::Level { level, .. } if !level.is_finite() => {
                return Err(Error::ParameterDomain("event level must be finite".into()));
            }
            EventRequest::Capture { radius, .. } if !(radius > 0.0) => {
                return Err(Error::ParameterDomain("capture radius must be positive".into()));
            }
            _ => {}
        }
    }

    let fv = |t: f64, y: V2| -> V2 {
        let d = f(t, PhasePoint::new(y[0], y[1]));
        [d.psi, d.dpsi]
    };

    let mut traj = Trajectory {
        system,
        samples: vec![Sample { t: t0, state: y0 }],
        segments: Vec::new(),
        events: Vec::new(),
    };

    let mut t = t0;
    let mut y = [y0.psi, y0.dpsi];
    let mut k1 = fv(t, y);
    let span = t_end - t0;
    let mut h = initial_step(&fv, t, y, k1, tol).min(tol.max_step).min(span);
    let mut steps = 0usize;
    let mut rejected_last = false;

    if capture_hit(requests, y0).is_some() {
        let radius = capture_hit(requests, y0).unwrap();
        traj.events.push(Event { t: t0, kind: EventKind::EquilibriumCapture { radius }, state: y0 });
        return Ok(traj);
    }

    while t < t_end {
        if steps >= tol.max_steps {
            return Err(Error::MaxStepsExceeded { steps, t });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        let k2 = fv(t + C2 * h, lin(y, &[(A21, &k1)], h));
        let k3 = fv(t + C3 * h, lin(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = fv(t + C4 * h, lin(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = fv(t + C5 * h, lin(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = fv(
            t + h,
            lin(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        );
        let y_new = lin(y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let t_new = if last { t_end } else { t + h };
        let k7 = fv(t_new, y_new);

        let mut err = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / 2.0).sqrt();
        if !err.is_finite() || !y_new[0].is_finite() || !y_new[1].is_finite() {
            h *= 0.1;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            let mut coef = [[0.0; 2]; 5];
            for i in 0..2 {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coef[0][i] = y[i];
                coef[1][i] = ydiff;
                coef[2][i] = bspl;
                coef[3][i] = ydiff - h * k7[i] - bspl;
                coef[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = DenseSegment { t0: t, h: t_new - t, coef };
            locate_events(&seg, t, t_new, requests, tol.event, &mut traj.events);
            traj.segments.push(seg);
            let state = PhasePoint::new(y_new[0], y_new[1]);
            traj.samples.push(Sample { t: t_new, state });
            t = t_new;
            y = y_new;
            k1 = k7;

            if let Some(radius) = capture_hit(requests, state) {
                traj.events.push(Event { t, kind: EventKind::EquilibriumCapture { radius }, state });
                break;
            }

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, if rejected_last { 1.0 } else { 10.0 });
            h = (h * fac).min(tol.max_step);
            rejected_last = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok(traj)
}

fn capture_hit(requests: &[EventRequest], state: PhasePoint) -> Option<f64> {
    requests.iter().find_map(|r| match *r {
        EventRequest::Capture { center, radius } if state.chart_distance(center) < radius => Some(radius),
        _ => None,
    })
}

fn initial_step<F: Fn(f64, V2) -> V2>(f: &F, t: f64, y: V2, f0: V2, tol: &Tolerances) -> f64 {
    let sc = |i: usize| tol.abs + tol.rel * y[i].abs();
    let norm = |v: V2| ((0..2).map(|i| (v[i] / sc(i)).powi(2)).sum::<f64>() / 2.0).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = [y[0] + h0 * f0[0], y[1] + h0 * f0[1]];
    let f1 = f(t + h0, y1);
    let d2 = norm([f1[0] - f0[0], f1[1] - f0[1]]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

fn event_value(req: &EventRequest, y: V2) -> Option<f64> {
    match *req {
        EventRequest::Level { level, .. } => Some(y[0] - level),
        EventRequest::Extrema => Some(y[1]),
        EventRequest::Capture { .. } => None,
    }
}

fn locate_events(
    seg: &DenseSegment,
    t0: f64,
    t1: f64,
    requests: &[EventRequest],
    event_tol: f64,
    out: &mut Vec<Event>,
) {
    let mut found: Vec<Event> = Vec::new();
    for req in requests {
        let g = |t: f64| event_value(req, seg.eval(t)).unwrap_or(0.0);
        if event_value(req, [0.0, 0.0]).is_none() {
            continue;
        }
        let mut a = t0;
        let mut ga = g(a);
        for j in 1..=EVENT_SUBDIVISIONS {
            let b = if j == EVENT_SUBDIVISIONS {
                t1
            } else {
                t0 + (t1 - t0) * j as f64 / EVENT_SUBDIVISIONS as f64
            };
            let gb = g(b);
            // A zero exactly at the left end was reported with the previous
            // interval, so only strict sign changes or a zero at `b` count.
            if ga != 0.0 && (ga * gb < 0.0 || gb == 0.0) {
                let rising = gb > ga;
                let te = bisect(&g, a, b, ga, event_tol);
                let y = seg.eval(te);
                let state = PhasePoint::new(y[0], y[1]);
                let kind = match *req {
                    EventRequest::Level { level, direction } => {
                        let ok = match direction {
                            Direction::Rising => rising,
                            Direction::Falling => !rising,
                            Direction::Either => true,
                        };
                        ok.then_some(EventKind::LevelCrossing {
                            level,
                            direction: if rising { 1 } else { -1 },
                        })
                    }
                    EventRequest::Extrema => Some(EventKind::LocalExtremum {
                        kind: if rising { Extremum::Min } else { Extremum::Max },
                    }),
                    EventRequest::Capture { .. } => None,
                };
                if let Some(kind) = kind {
                    found.push(Event { t: te, kind, state });
                }
            }
            a = b;
            ga = gb;
        }
    }
    found.sort_by(|x, y| x.t.total_cmp(&y.t));
    out.extend(found);
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, mut ga: f64, tol: f64) -> f64 {
    if g(b) == 0.0 && (b - a) <= tol {
        return b;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if ga * gm < 0.0 {
            b = m;
        } else {
            a = m;
            ga = gm;
        }
    }
    0.5 * (a + b)
}

/// One polar-coordinate sample `(t, R, Θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    pub t: f64,
    pub radius: f64,
    pub angle: f64,
}

/// Polar coordinates of `(t, q, p)` points around `center`, with the angle
/// unwrapped so consecutive samples never jump by more than π.
pub fn polar_samples(points: &[(f64, f64, f64)], center: (f64, f64)) -> Result<Vec<PolarSample>> {
    let mut out: Vec<PolarSample> = Vec::with_capacity(points.len());
    for &(t, q, p) in points {
        let (dq, dp) = (q - center.0, p - center.1);
        let radius = dq.hypot(dp);
        if radius < 1e-15 {
            return Err(Error::CenterHit { t });
        }
        let raw = dp.atan2(dq);
        let angle = match out.last() {
            None => raw,
            Some(prev) => {
                let mut d = raw - prev.angle.rem_euclid(2.0 * PI);
                d = (d + PI).rem_euclid(2.0 * PI) - PI;
                prev.angle + d
            }
        };
        out.push(PolarSample { t, radius, angle });
    }
    Ok(out)
}

/// Polar view `(R, Θ)` of a trajectory in the `(q, p)` chart around `center`.
pub fn polar_view(traj: &Trajectory, center: PhasePoint) -> Result<Vec<PolarSample>> {
    let pts: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .map(|s| {
            let (q, p) = s.state.to_qp();
            (s.t, q, p)
        })
        .collect();
    polar_samples(&pts, center.to_qp())
}
