//! Built-in oracle checks with known exact answers.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rhm_core::asymptotics;
use rhm_core::dirichlet::{closed_form_n2, log_grid, Branch};
use rhm_core::hopfjoin::{solve_bvp, BvpOptions};
use rhm_core::integrator::{integrate, System, Tolerances};
use rhm_core::model::{rhs, TwistConvention};
use rhm_core::{HopfJoinSpec, PhasePoint, ProblemSpec};
use serde::Serialize;

use crate::commands::{emit, to_json, Failure};
use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed error; `null` when the computation itself failed.
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, tolerance: f64, value: rhm_core::Result<f64>) -> Check {
    let value = value.unwrap_or(f64::INFINITY);
    Check { name, value, tolerance, pass: value < tolerance }
}

fn closed_forms() -> rhm_core::Result<f64> {
    let grid = log_grid(1e-6, 1000);
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for rho in [0.3, 1.0, FRAC_PI_2] {
            for branch in [Branch::Inner, Branch::Outer] {
                let cf = closed_form_n2(k, rho, branch)?;
                if cf.phi(1.0) != rho {
                    return Ok(f64::INFINITY);
                }
                worst = grid.iter().fold(worst, |m, &r| m.max(cf.residual(r).abs()));
            }
        }
    }
    Ok(worst)
}

/// Max of `|r - slope·t|` on `[0, π/2]` and of the interior residual.
fn line_oracle(spec: HopfJoinSpec, slope: f64) -> rhm_core::Result<(f64, f64)> {
    let sol = solve_bvp(&spec, &BvpOptions::default())?;
    let mut worst = 0.0f64;
    for i in 0..=1000 {
        let t = FRAC_PI_2 * f64::from(i) / 1000.0;
        worst = worst.max((sol.eval(t)?.psi - slope * t).abs());
    }
    Ok((worst, sol.residual))
}

/// The identity `Φ(r) = r` of the round sphere, integrated from near the pole.
fn identity_map() -> rhm_core::Result<f64> {
    let tol = Tolerances { rel: 1e-12, abs: 1e-14, ..Tolerances::default() };
    let mut worst = 0.0f64;
    for n in [3, 4, 6] {
        let spec = ProblemSpec::sphere(n, 1);
        let f = |t: f64, y: PhasePoint| rhs(&spec, t, y).unwrap_or(PhasePoint::new(f64::NAN, f64::NAN));
        let (t0, t1) = (1e-3, PI - 0.25);
        let traj = integrate(System::Problem(spec), f, t0, PhasePoint::new(t0, 1.0), t1, &tol, &[])?;
        for i in 0..=500 {
            let t = t0 + (t1 - t0) * f64::from(i) / 500.0;
            let y = traj.eval(t)?;
            worst = worst.max((y.psi - t).abs()).max((y.dpsi - 1.0).abs());
        }
    }
    Ok(worst)
}

fn pair_error(got: [Complex64; 2], want: [Complex64; 2]) -> f64 {
    let direct = (got[0] - want[0]).norm().max((got[1] - want[1]).norm());
    let swapped = (got[0] - want[1]).norm().max((got[1] - want[0]).norm());
    direct.min(swapped)
}

fn eigenvalue_formulas(at_equator: bool) -> rhm_core::Result<f64> {
    let mut worst = 0.0f64;
    for (n, c) in [(3u32, 0.0f64), (3, 2.0), (5, 3.0)] {
        let spec = ProblemSpec::twisted(n, 1, c).with_twist(TwistConvention::PaperLiteral);
        spec.validate()?;
        let nf = f64::from(n);
        let (want, got) = if at_equator {
            let d = Complex64::new((nf - 2.0).powi(2) - 2.0 - c * c, 0.0).sqrt();
            ([-(nf - 1.0) + d, -(nf - 1.0) - d], asymptotics::linearize(&spec, FRAC_PI_2).eigenvalues)
        } else {
            let d = (nf * nf + c * c).sqrt();
            (
                [Complex64::new(1.0 - nf + d, 0.0), Complex64::new(1.0 - nf - d, 0.0)],
                asymptotics::linearize(&spec, 0.0).eigenvalues,
            )
        };
        worst = worst.max(pair_error(got, want));
    }
    Ok(worst)
}

fn winding() -> rhm_core::Result<f64> {
    let rate = asymptotics::winding_rate(&ProblemSpec::flat(3, 1))?.unwrap_or(f64::INFINITY);
    Ok((rate + 0.5 * 7f64.sqrt()).abs())
}

pub fn checks() -> Vec<Check> {
    let hopf = line_oracle(HopfJoinSpec::hopf(1, 1, 1.0, 1.0), 2.0);
    let join = line_oracle(HopfJoinSpec::join(2, 3, 2.0, 3.0), 1.0);
    vec![
        check("closed_form_n2_residual", 1e-12, closed_forms()),
        check("hopf_1111_is_2t", 1e-8, hopf.clone().map(|h| h.0)),
        check("hopf_1111_residual", 1e-6, hopf.map(|h| h.1)),
        check("join_2323_is_t", 1e-8, join.clone().map(|j| j.0)),
        check("join_2323_residual", 1e-6, join.map(|j| j.1)),
        check("sphere_identity_map", 1e-8, identity_map()),
        check("twisted_equator_eigenvalues", 1e-12, eigenvalue_formulas(true)),
        check("twisted_pole_eigenvalues", 1e-12, eigenvalue_formulas(false)),
        check("winding_rate_3_1", 1e-14, winding()),
        check(
            "k0_matches_spiral_range_k1",
            0.5,
            asymptotics::k0_audit(1).map(|a| if a.agrees { 0.0 } else { 1.0 }),
        ),
    ]
}

#[derive(Serialize)]
struct Summary<'a> {
    checks: &'a [Check],
    passed: usize,
    failed: usize,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let checks = checks();
    let failed = checks.iter().filter(|c| !c.pass).count();
    let text = match cfg.format {
        Format::Json => to_json(&Summary { checks: &checks, passed: checks.len() - failed, failed })?,
        Format::Csv => {
            let d = cfg.fraction_digits();
            let mut out = String::from("check,value,tolerance,pass\n");
            for c in &checks {
                out.push_str(&format!("{},{:.d$e},{:.d$e},{}\n", c.name, c.value, c.tolerance, c.pass));
            }
            out
        }
    };
    emit(cfg, &text)?;
    if failed > 0 {
        return Err(Failure::SelftestFailed { failed }.into());
    }
    Ok(())
}
