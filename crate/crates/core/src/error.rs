use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("singular point reached at t = {t}")]
    SingularPoint { t: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({steps}) exceeded at t = {t}")]
    MaxStepsExceeded { steps: usize, t: f64 },
    #[error("t = {t} lies outside the covered span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("trajectory passes through the polar center at t = {t}")]
    CenterHit { t: f64 },
    #[error("integration budget exhausted at t = {t_end} before equilibrium capture")]
    NoCapture { t_end: f64 },
    #[error("crossing of level {level} could not be localized (residual {residual:e})")]
    TolExceeded { level: f64, residual: f64 },
    #[error("equator is not a spiral for n = {n}, k = {k}")]
    NotSpiral { n: u32, k: u32 },
    #[error("no sign change of the boundary mismatch over shoot parameters [{lo:e}, {hi:e}]")]
    NoBracket { lo: f64, hi: f64 },
}

impl Error {
    /// Stable short name, used by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ParameterDomain(_) => "ParameterDomain",
            Error::SingularPoint { .. } => "SingularPoint",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::MaxStepsExceeded { .. } => "MaxStepsExceeded",
            Error::OutOfSpan { .. } => "OutOfSpan",
            Error::CenterHit { .. } => "CenterHit",
            Error::NoCapture { .. } => "NoCapture",
            Error::TolExceeded { .. } => "TolExceeded",
            Error::NotSpiral { .. } => "NotSpiral",
            Error::NoBracket { .. } => "NoBracket",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
