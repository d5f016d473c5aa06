use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rhm_core::asymptotics::{self, EquilibriumReport, K0Audit};
use rhm_core::dirichlet::{
    closed_form_n2, critical_values, log_grid, profile_residuals, solve_dirichlet, solve_with, sweep as sweep_rows,
    sweep_csv, Branch, CanonicalTrajectory, DirichletSolutionSet, Pole, Solution, SweepRow,
};
use rhm_core::energy::{energy_of, second_variation_spectrum, EnergyReport, ProfileSource, VariationGrid, VariationReport, T_MIN};
use rhm_core::exec::Execution;
use rhm_core::hopfjoin::{solve_bvp, BvpOptions};
use rhm_core::{HopfJoinSpec, ProblemSpec};
use serde::Serialize;

use crate::config::{usage, Format, RunConfig};
use crate::{BvpArgs, ProblemArgs};

/// Run-level failures that are not owned by a library module.
#[derive(Debug)]
pub enum Failure {
    NoSolution { rho: f64 },
    SelftestFailed { failed: usize },
}

impl Failure {
    pub fn name(&self) -> &'static str {
        match self {
            Failure::NoSolution { .. } => "NoSolution",
            Failure::SelftestFailed { .. } => "SelftestFailed",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::NoSolution { rho } => write!(f, "no solution covers the north pole for rho = {rho}"),
            Failure::SelftestFailed { failed } => write!(f, "{failed} oracle check(s) failed"),
        }
    }
}

impl std::error::Error for Failure {}

pub fn emit(cfg: &RunConfig, text: &str) -> anyhow::Result<()> {
    match &cfg.output {
        Some(path) => write_file(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn problem(cfg: &RunConfig, p: ProblemArgs) -> ProblemSpec {
    let spec = match p.c {
        Some(c) => ProblemSpec::twisted(p.n, p.k, c).with_twist(cfg.twist.into()),
        None => ProblemSpec::flat(p.n, p.k),
    };
    match p.m {
        Some(m) => spec.with_m(m),
        None => spec,
    }
}

#[derive(Serialize)]
struct Analysis {
    spec: ProblemSpec,
    equilibria: Vec<EquilibriumReport>,
    winding_rate: Option<f64>,
    origin_exponents: (f64, f64),
    k0_audit: K0Audit,
}

pub fn analyze(cfg: &RunConfig, p: ProblemArgs) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    spec.validate()?;
    let report = Analysis {
        spec,
        equilibria: asymptotics::classify_equilibria(&spec)?,
        winding_rate: asymptotics::winding_rate(&spec)?,
        origin_exponents: asymptotics::origin_exponents(&spec)?,
        k0_audit: asymptotics::k0_audit(spec.k)?,
    };
    emit(cfg, &to_json(&report)?)
}

pub fn trace(cfg: &RunConfig, p: ProblemArgs) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    let ct = rhm_core::dirichlet::trace_canonical(&spec, &cfg.trace_options())?;
    let text = match cfg.format {
        Format::Csv => ct.traj.to_csv(spec.forcing(), cfg.fraction_digits()),
        Format::Json => {
            let mut doc = ct.traj.to_json();
            if let Some(obj) = doc.as_object_mut() {
                obj.insert("spec".into(), serde_json::to_value(spec)?);
                obj.insert("lambda_plus".into(), ct.lambda_plus.into());
                obj.insert("normalization".into(), ct.normalization.into());
                obj.insert("extrema".into(), serde_json::to_value(&ct.extrema)?);
            }
            to_json(&doc)?
        }
    };
    emit(cfg, &text)
}

/// The solution set together with the trace it was read from (`n ≥ 3`).
fn solutions(cfg: &RunConfig, spec: &ProblemSpec, rho: f64) -> anyhow::Result<(Option<CanonicalTrajectory>, DirichletSolutionSet)> {
    spec.validate()?;
    if spec.n == 2 {
        return Ok((None, solve_dirichlet(spec, rho, &cfg.dirichlet_options())?));
    }
    let ct = rhm_core::dirichlet::trace_canonical(spec, &cfg.trace_options())?;
    let set = solve_with(&ct, rho, cfg.materialize)?;
    Ok((Some(ct), set))
}

fn source<'a>(ct: Option<&'a CanonicalTrajectory>, set: &DirichletSolutionSet, sol: &Solution) -> anyhow::Result<ProfileSource<'a>> {
    if sol.is_constant() {
        return Ok(ProfileSource::Constant(match sol.pole {
            Pole::North => 0.0,
            Pole::South => PI,
        }));
    }
    Ok(match ct {
        Some(ct) => ProfileSource::Canonical { ct, tau: sol.tau, pole: sol.pole },
        None => {
            let branch = match sol.pole {
                Pole::North => Branch::Inner,
                Pole::South => Branch::Outer,
            };
            ProfileSource::ClosedForm(closed_form_n2(set.spec.k, set.rho, branch)?)
        }
    })
}

fn max_residual(ct: Option<&CanonicalTrajectory>, set: &DirichletSolutionSet, sol: &Solution, grid: &[f64]) -> anyhow::Result<Option<f64>> {
    if sol.is_constant() {
        return Ok(None);
    }
    let worst = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(Some(match (ct, source(ct, set, sol)?) {
        (Some(ct), _) => worst(&mut profile_residuals(ct, sol.tau, grid)?.into_iter()),
        (None, ProfileSource::ClosedForm(cf)) => worst(&mut grid.iter().map(|&r| cf.residual(r))),
        _ => unreachable!("non-constant n = 2 solutions are closed forms"),
    }))
}

#[derive(Serialize)]
struct DirichletReport {
    #[serde(flatten)]
    set: DirichletSolutionSet,
    /// Largest `r²`-scaled equation residual per listed solution.
    max_residual: Vec<Option<f64>>,
}

pub fn dirichlet(cfg: &RunConfig, p: ProblemArgs, rho: f64) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    let (ct, set) = solutions(cfg, &spec, rho)?;
    let grid = log_grid(1e-6, cfg.r_points);
    let max_residual = set
        .solutions
        .iter()
        .map(|s| max_residual(ct.as_ref(), &set, s, &grid))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let zero = set.count.is_zero();
    let text = match cfg.format {
        Format::Json => to_json(&DirichletReport { set, max_residual })?,
        Format::Csv => {
            let d = cfg.fraction_digits();
            let mut out = String::from("index,pole,tau,tangent,max_residual\n");
            for (i, (s, r)) in set.solutions.iter().zip(&max_residual).enumerate() {
                let pole = match s.pole {
                    Pole::North => "north",
                    Pole::South => "south",
                };
                let tau = if s.is_constant() { "-inf".to_string() } else { format!("{:.d$e}", s.tau) };
                let r = r.map(|r| format!("{r:.d$e}")).unwrap_or_default();
                out.push_str(&format!("{i},{pole},{tau},{},{r}\n", s.tangent));
            }
            out
        }
    };
    emit(cfg, &text)?;
    if zero {
        return Err(Failure::NoSolution { rho }.into());
    }
    Ok(())
}

pub fn critical(cfg: &RunConfig, p: ProblemArgs) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    let cv = critical_values(&spec, &cfg.trace_options())?;
    emit(cfg, &to_json(&cv)?)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    k: u32,
    rows: &'a [SweepRow],
}

pub fn sweep(cfg: &RunConfig, k: u32) -> anyhow::Result<()> {
    let (lo, hi) = cfg.n_range;
    let ns: Vec<u32> = (lo..=hi).collect();
    let rows = sweep_rows(k, &ns, &cfg.rho_grid, &cfg.dirichlet_options(), Execution::Parallel)?;
    let text = match cfg.format {
        Format::Csv => sweep_csv(&rows, cfg.fraction_digits()),
        Format::Json => to_json(&SweepReport { k, rows: &rows })?,
    };
    emit(cfg, &text)
}

fn pick(set: &DirichletSolutionSet, index: usize) -> anyhow::Result<Solution> {
    set.solutions.get(index).copied().ok_or_else(|| {
        usage(format!(
            "solution index {index} out of range: {} solution(s) listed for rho = {}",
            set.solutions.len(),
            set.rho
        ))
    })
}

#[derive(Serialize)]
struct EnergyOutput {
    spec: ProblemSpec,
    rho: f64,
    solution_index: usize,
    solution: Solution,
    energy: EnergyReport,
}

pub fn energy(cfg: &RunConfig, p: ProblemArgs, rho: f64, index: usize) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    let (ct, set) = solutions(cfg, &spec, rho)?;
    let solution = pick(&set, index)?;
    let energy = energy_of(&spec, &source(ct.as_ref(), &set, &solution)?)?;
    emit(cfg, &to_json(&EnergyOutput { spec, rho, solution_index: index, solution, energy })?)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Tested {
    Equator,
    Solution { rho: f64, solution_index: usize, solution: Solution },
}

#[derive(Serialize)]
struct StabilityOutput {
    spec: ProblemSpec,
    profile: Tested,
    #[serde(flatten)]
    report: VariationReport,
}

pub fn stability(cfg: &RunConfig, p: ProblemArgs, target: Option<(f64, usize)>, nodes: usize) -> anyhow::Result<()> {
    let spec = problem(cfg, p);
    spec.validate()?;
    let grid = VariationGrid::new(T_MIN, nodes)?;
    let out = match target {
        None => StabilityOutput {
            spec,
            profile: Tested::Equator,
            report: second_variation_spectrum(&spec, &ProfileSource::Constant(FRAC_PI_2), &grid)?,
        },
        Some((rho, index)) => {
            let (ct, set) = solutions(cfg, &spec, rho)?;
            let solution = pick(&set, index)?;
            let report = second_variation_spectrum(&spec, &source(ct.as_ref(), &set, &solution)?, &grid)?;
            StabilityOutput { spec, profile: Tested::Solution { rho, solution_index: index, solution }, report }
        }
    };
    emit(cfg, &to_json(&out)?)
}

#[derive(Debug, Clone, Copy)]
pub enum Construction {
    Hopf,
    Join,
}

pub fn bvp(cfg: &RunConfig, which: Construction, a: BvpArgs, profile: Option<PathBuf>) -> anyhow::Result<()> {
    let spec = match which {
        Construction::Hopf => HopfJoinSpec::hopf(a.p1, a.p2, a.lam1, a.lam2),
        Construction::Join => HopfJoinSpec::join(a.p1, a.p2, a.lam1, a.lam2),
    };
    let defaults = BvpOptions::default();
    let opts = BvpOptions { eps: a.eps.unwrap_or(defaults.eps), ..defaults };
    let sol = solve_bvp(&spec, &opts)?;
    let csv = sol.profile_csv(cfg.r_points, cfg.fraction_digits())?;
    if let Some(path) = profile {
        write_file(&path, &csv)?;
    }
    let text = match cfg.format {
        Format::Csv => csv,
        Format::Json => to_json(&sol.summary())?,
    };
    emit(cfg, &text)
}
