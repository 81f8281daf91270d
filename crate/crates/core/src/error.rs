use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("Fock truncation n_max must be at least 1")]
    ZeroTruncation,

    #[error("negative rate {0} for jump operator")]
    NegativeRate(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("state invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("steady state is not unique (two smallest singular values {smallest:e}, {second:e})")]
    DegenerateSteadyState { smallest: f64, second: f64 },

    #[error("singular linear system")]
    SingularSystem,

    #[error("correlation undefined: mean photon number {0:e} vanishes")]
    UndefinedCorrelation(f64),

    #[error("negative correlation time {0}")]
    NegativeTime(f64),

    #[error("time grid must be strictly increasing")]
    UnorderedGrid,

    #[error("model is time dependent; stationary correlators need a static generator")]
    TimeDependentModel,

    #[error("elimination inapplicable: {0}")]
    Inapplicable(String),

    #[error("parameters outside the validity region: {0}")]
    OutOfValidity(String),

    #[error("unsupported correlator order (M = {m}, N = {n}); at most two operators per side")]
    UnsupportedOrder { m: usize, n: usize },

    #[error("dark-state angle undefined: both drives vanish")]
    UndefinedAngle,

    #[error("Fock truncation leak {leak:e} exceeds {limit:e}")]
    TruncationLeak { leak: f64, limit: f64 },

    /// `line` is 1-based; 0 marks defaults, overrides and the environment.
    #[error("{}", config_message(*line, msg))]
    Config { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

fn config_message(line: usize, msg: &str) -> String {
    match line {
        0 => format!("config: {msg}"),
        _ => format!("config line {line}: {msg}"),
    }
}
