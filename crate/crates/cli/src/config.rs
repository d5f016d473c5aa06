use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rhm_core::dirichlet::{DirichletOptions, TraceOptions};
use rhm_core::integrator::Tolerances;
use rhm_core::model::TwistConvention;

/// Bad flag value, config entry or request. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Twist {
    Energy,
    El3,
    PaperLiteral,
}

impl From<Twist> for TwistConvention {
    fn from(t: Twist) -> Self {
        match t {
            Twist::Energy => TwistConvention::Energy,
            Twist::El3 => TwistConvention::El3,
            Twist::PaperLiteral => TwistConvention::PaperLiteral,
        }
    }
}

/// Real number, or one of the tokens `pi`, `pi/2` (optionally negated).
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let v = match body {
        "pi" => PI,
        "pi/2" => FRAC_PI_2,
        _ => t.parse::<f64>().map_err(|_| format!("`{s}` is not a number, `pi` or `pi/2`"))?,
    };
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(if neg && matches!(body, "pi" | "pi/2") { -v } else { v })
}

/// Inclusive dimension range `lo..hi` (or a single `n`).
pub fn parse_n_range(s: &str) -> Result<(u32, u32), String> {
    let bad = || format!("`{s}` is not a dimension range like `3..10`");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Boundary angles: `lo:hi:count` (uniform, inclusive) or a comma list.
pub fn parse_rho_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo = parse_real(parts[0])?;
        let hi = parse_real(parts[1])?;
        let count: usize = parts[2].trim().parse().map_err(|_| format!("bad point count in `{s}`"))?;
        if count == 0 || (count == 1 && lo != hi) || lo > hi {
            return Err(format!("`{s}` is not a grid like `0.1:3.0:30`"));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let m = (count - 1) as f64;
        return Ok((0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / m })
            .collect());
    }
    if parts.len() != 1 {
        return Err(format!("`{s}` is not a grid like `0.1:3.0:30` or `0.5,pi/2,2`"));
    }
    s.split(',').map(parse_real).collect()
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::from_str(s.trim(), true).map_err(|_| format!("unknown format `{s}` (csv, json)"))
}

fn parse_twist(s: &str) -> Result<Twist, String> {
    Twist::from_str(s.trim(), true).map_err(|_| format!("unknown twist convention `{s}` (energy, el3, paper-literal)"))
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub event_tol: f64,
    pub capture_radius: f64,
    pub r_points: usize,
    pub t_span: f64,
    pub n_range: (u32, u32),
    pub rho_grid: Vec<f64>,
    pub materialize: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub precision: usize,
    pub twist: Twist,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        let trace = TraceOptions::default();
        Self {
            rel_tol: tol.rel,
            abs_tol: tol.abs,
            event_tol: tol.event,
            capture_radius: trace.capture_radius,
            r_points: 1000,
            t_span: trace.t_budget,
            n_range: (3, 10),
            rho_grid: parse_rho_grid("0.1:3.0:30").expect("default grid"),
            materialize: DirichletOptions::default().materialize,
            format: Format::Json,
            output: None,
            precision: 17,
            twist: Twist::Energy,
        }
    }
}

/// Values given on the command line. `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub event_tol: Option<f64>,
    pub capture_radius: Option<f64>,
    pub r_points: Option<usize>,
    pub t_span: Option<f64>,
    pub n_range: Option<(u32, u32)>,
    pub rho_grid: Option<Vec<f64>>,
    pub materialize: Option<usize>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub precision: Option<usize>,
    pub twist: Option<Twist>,
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn load(file: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
        cfg.apply(flags);
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let real = || parse_real(value);
        let count = || value.parse::<usize>().map_err(|_| format!("`{value}` is not a non-negative integer"));
        match key {
            "rel_tol" => self.rel_tol = real()?,
            "abs_tol" => self.abs_tol = real()?,
            "event_tol" => self.event_tol = real()?,
            "capture_radius" => self.capture_radius = real()?,
            "r_points" => self.r_points = count()?,
            "t_span" => self.t_span = real()?,
            "n_range" => self.n_range = parse_n_range(value)?,
            "rho_grid" => self.rho_grid = parse_rho_grid(value)?,
            "materialize" => self.materialize = count()?,
            "format" => self.format = parse_format(value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "precision" => self.precision = count()?,
            "twist" => self.twist = parse_twist(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { self.$f = v; } )* };
        }
        take!(rel_tol, abs_tol, event_tol, capture_radius, r_points, t_span, n_range, rho_grid, materialize, format, precision, twist);
        if o.output.is_some() {
            self.output = o.output.clone();
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("event_tol", self.event_tol),
            ("capture_radius", self.capture_radius),
            ("t_span", self.t_span),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(6..=17).contains(&self.precision) {
            return Err(format!("precision must be in [6, 17], got {}", self.precision));
        }
        if self.r_points < 2 {
            return Err(format!("r_points must be at least 2, got {}", self.r_points));
        }
        if self.rho_grid.is_empty() {
            return Err("rho_grid is empty".into());
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rel: self.rel_tol, abs: self.abs_tol, event: self.event_tol, ..Tolerances::default() }
    }

    pub fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            tol: self.tolerances(),
            capture_radius: self.capture_radius,
            t_budget: self.t_span,
            ..TraceOptions::default()
        }
    }

    pub fn dirichlet_options(&self) -> DirichletOptions {
        DirichletOptions { trace: self.trace_options(), materialize: self.materialize }
    }

    /// Digits after the point in `{:e}` formatting for `precision`
    /// significant digits.
    pub fn fraction_digits(&self) -> usize {
        self.precision - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_tokens() {
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_real("-pi/2").unwrap(), -FRAC_PI_2);
        assert_eq!(parse_real("1.5").unwrap(), 1.5);
        assert!(parse_real("2pi").is_err());
        assert!(parse_real("nan").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_n_range("3..6").unwrap(), (3, 6));
        assert_eq!(parse_n_range("4").unwrap(), (4, 4));
        assert!(parse_n_range("6..3").is_err());
        let g = parse_rho_grid("0:pi:5").unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], PI);
        assert_eq!(parse_rho_grid("0.5,pi/2").unwrap(), vec![0.5, FRAC_PI_2]);
    }

    #[test]
    fn precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("precision = 10\nrel_tol = 1e-8 # tighter elsewhere\n\nformat = csv").unwrap();
        cfg.apply(&Overrides { precision: Some(12), ..Overrides::default() });
        assert_eq!(cfg.precision, 12);
        assert_eq!(cfg.rel_tol, 1e-8);
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.abs_tol, RunConfig::default().abs_tol);
    }

    #[test]
    fn rejects() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("precision").is_err());
        cfg.precision = 5;
        assert!(cfg.validate().is_err());
        cfg.precision = 17;
        cfg.abs_tol = 0.0;
        assert!(cfg.validate().is_err());
    }
}
