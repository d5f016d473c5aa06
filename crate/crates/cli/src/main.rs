#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

mod commands;
mod config;
mod selftest;

use config::{parse_n_range, parse_real, parse_rho_grid, Format, Overrides, RunConfig, Twist, UsageError};

#[derive(Parser, Debug)]
#[command(name = "rhm", version, about = "Rotationally symmetric harmonic maps: traces, Dirichlet counts, energies, Hopf/Join profiles")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Flat `key = value` config file. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Significant digits in CSV output, 6 to 17.
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[arg(long, global = true, value_parser = parse_real)]
    rel_tol: Option<f64>,
    #[arg(long, global = true, value_parser = parse_real)]
    abs_tol: Option<f64>,
    #[arg(long, global = true, value_parser = parse_real)]
    event_tol: Option<f64>,
    #[arg(long, global = true, value_parser = parse_real)]
    capture_radius: Option<f64>,
    /// Radial grid size for residual checks and profile output.
    #[arg(long, global = true)]
    r_points: Option<usize>,
    /// Integration budget in `t = ln r` after launch.
    #[arg(long, global = true, value_parser = parse_real)]
    t_span: Option<f64>,
    /// Crossings listed when the solution count is infinite.
    #[arg(long, global = true)]
    materialize: Option<usize>,
    #[arg(long, global = true, value_enum)]
    twist: Option<Twist>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct ProblemArgs {
    /// Domain dimension.
    #[arg(long)]
    pub n: u32,
    /// Eigenmap degree.
    #[arg(long)]
    pub k: u32,
    /// Twist rate; selects the twisted family when given.
    #[arg(long, value_parser = parse_real)]
    pub c: Option<f64>,
    /// Target sphere dimension (echoed only).
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct BvpArgs {
    #[arg(long)]
    pub p1: u32,
    #[arg(long)]
    pub p2: u32,
    #[arg(long, value_parser = parse_real)]
    pub lam1: f64,
    #[arg(long, value_parser = parse_real)]
    pub lam2: f64,
    /// Distance from each singular endpoint where integration starts.
    #[arg(long, value_parser = parse_real)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone)]
struct RhoGrid(Vec<f64>);

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibria, winding rate, pole exponents and the k0 audit.
    Analyze {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Canonical trajectory from the pole to the equator.
    Trace {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Solutions of the Dirichlet problem for one boundary angle.
    Dirichlet {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_parser = parse_real)]
        rho: f64,
    },
    /// Maximum and smallest local minimum of the canonical trajectory.
    Critical {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Solution counts over dimensions and boundary angles.
    Sweep {
        #[arg(long)]
        k: u32,
        /// Dimensions, e.g. `3..10`.
        #[arg(long, value_parser = parse_n_range)]
        n_range: Option<(u32, u32)>,
        /// Boundary angles, `lo:hi:count` or a comma list.
        #[arg(long, value_parser = |s: &str| parse_rho_grid(s).map(RhoGrid))]
        rho_grid: Option<RhoGrid>,
    },
    /// Energy of one Dirichlet solution.
    Energy {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_parser = parse_real)]
        rho: f64,
        /// Position in the solution list (north family first).
        #[arg(long, default_value_t = 0)]
        solution_index: usize,
    },
    /// Discrete first and second variation of a solution or of the equator map.
    Stability {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Boundary angle of the solution to test; the equator map if absent.
        #[arg(long, value_parser = parse_real)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0, requires = "rho")]
        solution_index: usize,
        #[arg(long, default_value_t = 512)]
        nodes: usize,
    },
    /// Hopf construction profile.
    Hopf {
        #[command(flatten)]
        bvp: BvpArgs,
        /// Also write the `t,r,dr` profile CSV here.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Join construction profile.
    Join {
        #[command(flatten)]
        bvp: BvpArgs,
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn overrides(g: &GlobalArgs, cmd: &Command) -> Overrides {
    let (n_range, rho_grid) = match cmd {
        Command::Sweep { n_range, rho_grid, .. } => (*n_range, rho_grid.as_ref().map(|g| g.0.clone())),
        _ => (None, None),
    };
    Overrides {
        rel_tol: g.rel_tol,
        abs_tol: g.abs_tol,
        event_tol: g.event_tol,
        capture_radius: g.capture_radius,
        r_points: g.r_points,
        t_span: g.t_span,
        n_range,
        rho_grid,
        materialize: g.materialize,
        format: g.format,
        output: g.output.clone(),
        precision: g.precision,
        twist: g.twist,
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("RHM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config::usage(format!("RHM_THREADS must be a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let cfg = RunConfig::load(cli.global.config.as_deref(), &overrides(&cli.global, &cli.command))?;
    match cli.command {
        Command::Analyze { problem } => commands::analyze(&cfg, problem),
        Command::Trace { problem } => commands::trace(&cfg, problem),
        Command::Dirichlet { problem, rho } => commands::dirichlet(&cfg, problem, rho),
        Command::Critical { problem } => commands::critical(&cfg, problem),
        Command::Sweep { k, .. } => commands::sweep(&cfg, k),
        Command::Energy { problem, rho, solution_index } => commands::energy(&cfg, problem, rho, solution_index),
        Command::Stability { problem, rho, solution_index, nodes } => {
            commands::stability(&cfg, problem, rho.map(|r| (r, solution_index)), nodes)
        }
        Command::Hopf { bvp, profile } => commands::bvp(&cfg, commands::Construction::Hopf, bvp, profile),
        Command::Join { bvp, profile } => commands::bvp(&cfg, commands::Construction::Join, bvp, profile),
        Command::Selftest => selftest::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(u) = err.downcast_ref::<UsageError>() {
                eprintln!("error: {u}\n\n{}", Cli::command().render_usage());
                return ExitCode::from(2);
            }
            if let Some(e) = err.downcast_ref::<rhm_core::Error>() {
                eprintln!("error: {}: {e}", e.name());
            } else if let Some(f) = err.downcast_ref::<commands::Failure>() {
                eprintln!("error: {}: {f}", f.name());
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(1)
        }
    }
}
