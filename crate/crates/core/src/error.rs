use std::fmt;

use thiserror::Error;

/// A single semantic or schema problem found while validating a system spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// JSON-pointer-like location of the offending field, e.g. `sensors[0].quantizers[1].levels`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("rectangle probabilities need a diagonal covariance; use the Monte Carlo path")]
    NonDiagonalCovariance,

    #[error("point {0:?} lies in no quantization cell")]
    Unquantizable(Vec<f64>),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("outcome {outcome:?} is not in the alphabet of sensor {sensor}")]
    UnknownOutcome { sensor: usize, outcome: Vec<usize> },

    #[error("sensor index {0} out of range")]
    UnknownSensor(usize),

    #[error("sensor {sensor} needs the Monte Carlo path but no Monte Carlo budget is configured")]
    NoMonteCarloBudget { sensor: usize },

    #[error("theta is on the parameter-space boundary along coordinate {coord}; central differences need both sides")]
    BoundaryTheta { coord: usize },

    #[error("theta {0:?} is outside the parameter space")]
    OutsideParameterSpace(Vec<f64>),

    #[error("cell probability table for sensor {sensor} violates {what}: {value:e}")]
    TableInvariant {
        sensor: usize,
        what: &'static str,
        value: f64,
    },

    #[error("observed outcome at sensor {sensor} has zero probability; log-likelihood is -inf")]
    ZeroProbability { sensor: usize },

    #[error("Fisher information matrix is singular (rank {rank} < {dim})")]
    SingularFim { rank: usize, dim: usize },

    #[error("no sign change found for rho = {rho} within |alpha| <= {limit:e}")]
    NoBracket { rho: f64, limit: f64 },

    #[error("root finder stalled for rho = {rho} with residual {residual:e}")]
    RootNotConverged { rho: f64, residual: f64 },

    #[error("assumption {0} is not declared in the spec")]
    AssumptionNotDeclared(&'static str),

    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    #[error("global outcome alphabet has {0} entries, above the supported limit")]
    AlphabetTooLarge(u128),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spec validation failed:\n{}", format_violations(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("could not parse spec: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// True for errors caused by malformed input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonPositiveVariance(_)
                | Error::InvalidQuantizer(_)
                | Error::UnknownOutcome { .. }
                | Error::UnknownSensor(_)
                | Error::NoMonteCarloBudget { .. }
                | Error::OutsideParameterSpace(_)
                | Error::AssumptionNotDeclared(_)
                | Error::InvalidGrouping(_)
                | Error::InvalidArgument(_)
                | Error::InvalidSpec(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
