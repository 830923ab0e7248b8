use thiserror::Error;

/// Coarse failure classes, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent configuration input.
    Config,
    /// An argument violates a documented precondition.
    Domain,
    /// An iteration failed to converge or two routes disagreed.
    Numerical,
    /// A solver found no admissible solution.
    Infeasible,
}

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("symbol {symbol} out of range for alphabet of {alphabet_size} symbols")]
    SymbolOutOfRange { symbol: u8, alphabet_size: u8 },

    #[error("word of length {word_len} exceeds window length {window_len}")]
    WordTooLong { word_len: usize, window_len: usize },

    #[error("window of length {window_len} too short: need at least {required}")]
    WindowTooShort { window_len: usize, required: usize },

    #[error("table has {got} entries, expected {expected}")]
    TableSizeMismatch { got: usize, expected: usize },

    #[error("table contains a non-finite entry at index {index}")]
    NonFiniteEntry { index: usize },

    #[error("{context}: dimension mismatch ({got} vs {expected})")]
    DimensionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("potential is not normalized: max column-sum deviation {max_deviation:.3e}")]
    NotNormalized { max_deviation: f64 },

    #[error("kernel is not normalized: max stacked column-sum deviation {max_deviation:.3e}")]
    KernelNotNormalized { max_deviation: f64 },

    #[error("matrix is not column-stochastic: max column-sum deviation {max_deviation:.3e}")]
    NotStochastic { max_deviation: f64 },

    #[error("probabilities must lie in (0,1): got {value}")]
    ProbabilityOutOfRange { value: f64 },

    #[error("vector is not a probability distribution: {reason}")]
    NotAProbability { reason: String },

    #[error("matrix entries must be strictly positive (entry {index} = {value})")]
    NotPositive { index: usize, value: f64 },

    #[error("step count must be at least 1")]
    EmptyRun,

    #[error(
        "power iteration did not converge within {iterations} iterations \
         (final residual {residual:.3e})"
    )]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("stationary solve failed: {0}")]
    StationarySolve(String),

    #[error(
        "stationary cross-check disagreement: linear solve and power iteration \
         differ by {difference:.3e}"
    )]
    StationaryDisagreement { difference: f64 },

    #[error("Perron eigenvalue {lambda} of the plan matrix is not 1 (deviation {deviation:.3e})")]
    PerronNotUnit { lambda: f64, deviation: f64 },

    #[error("preimage enumeration needs {required} evaluations, cap is {cap}")]
    ResourceLimit { required: u64, cap: u64 },

    #[error("root finder failed: {0}")]
    RootFinding(String),

    #[error("dual problem infeasible: no conic intersection satisfies the admissibility conditions\n{report}")]
    Infeasible { report: String },

    #[error("ambiguous dual minimizer: two admissible candidates have objectives equal within {tie_tol:.1e}\n{report}")]
    AmbiguousMinimizer { tie_tol: f64, report: String },
}

impl Error {
    /// The failure class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_) => ErrorClass::Config,
            SymbolOutOfRange { .. }
            | WordTooLong { .. }
            | WindowTooShort { .. }
            | TableSizeMismatch { .. }
            | NonFiniteEntry { .. }
            | DimensionMismatch { .. }
            | NotNormalized { .. }
            | KernelNotNormalized { .. }
            | NotStochastic { .. }
            | ProbabilityOutOfRange { .. }
            | NotAProbability { .. }
            | NotPositive { .. }
            | ResourceLimit { .. }
            | EmptyRun => ErrorClass::Domain,
            EigenNoConvergence { .. }
            | StationarySolve(_)
            | StationaryDisagreement { .. }
            | PerronNotUnit { .. }
            | RootFinding(_)
            | AmbiguousMinimizer { .. } => ErrorClass::Numerical,
            Infeasible { .. } => ErrorClass::Infeasible,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
