use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants are grouped by the subsystem that raises them; [`Error::component`]
/// names that subsystem and [`Error::class`] maps it onto the command-line exit
/// code contract.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate risk: standard deviation must be positive (got {0})")]
    DegenerateRisk(f64),
    #[error("degenerate beta: beta must be non-zero")]
    DegenerateBeta,
    #[error("degenerate benchmark: benchmark variance is zero")]
    DegenerateBenchmark,
    #[error("degenerate downside: no observations below the threshold, ratio undefined")]
    DegenerateDownside,
    #[error("degenerate tracking: active returns have zero dispersion")]
    DegenerateTracking,
    #[error("invalid regime coefficient {0}: must lie strictly inside (0, 2)")]
    InvalidRegime(f64),

    #[error("singular covariance matrix (condition number {0:e})")]
    SingularMatrix(f64),
    #[error("no tangency portfolio: no asset has mean return above the risk-free rate")]
    NoTangency,
    #[error("covariance matrix is not positive definite")]
    InvalidCovariance,
    #[error("risk budgeting did not converge after {sweeps} sweeps (residual {residual:e})")]
    ConvergenceFailure { sweeps: usize, residual: f64 },
    #[error("degenerate portfolio: portfolio variance is zero")]
    DegeneratePortfolio,

    #[error("numerical failure at epoch {epoch}: {what}")]
    NumericalFailure { epoch: usize, what: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error at line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("no overlapping dates between the input tables")]
    NoOverlap,
    #[error("invalid calendar: {0}")]
    InvalidCalendar(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Coarse failure class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

impl Error {
    pub fn component(&self) -> &'static str {
        use Error::*;
        match self {
            InsufficientData(_) | InvalidInput(_) => "input",
            DegenerateRisk(_)
            | DegenerateBeta
            | DegenerateBenchmark
            | DegenerateDownside
            | DegenerateTracking
            | InvalidRegime(_) => "ratios",
            SingularMatrix(_)
            | NoTangency
            | InvalidCovariance
            | ConvergenceFailure { .. }
            | DegeneratePortfolio => "allocators",
            NumericalFailure { .. } => "rrl",
            Parse { .. } | Validation { .. } | NoOverlap | Io { .. } => "data",
            InvalidCalendar(_) => "backtest",
            Config(_) => "config",
        }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_) => ErrorClass::Config,
            InsufficientData(_)
            | InvalidInput(_)
            | Parse { .. }
            | Validation { .. }
            | NoOverlap
            | InvalidCalendar(_)
            | Io { .. } => ErrorClass::Data,
            _ => ErrorClass::Numerical,
        }
    }
}
