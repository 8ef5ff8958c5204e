use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("observable has an all-zero spectrum (or equal eigenvalues where a gap is required)")]
    DegenerateObservable,

    #[error("postselection probability {probability:e} is at or below the floor")]
    VanishingPostselection { probability: f64 },

    #[error("pre- and postselected states are orthogonal")]
    OrthogonalPps,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outside the small-coupling regime: gΔ = {g_delta} > {limit}")]
    OutOfRegime { g_delta: f64, limit: f64 },

    #[error("postselected pointer spread vanishes; ratio undefined")]
    DegenerateSpread,

    #[error("pointer shift does not respond to the coupling; Δg is infinite")]
    InsensitivePointer,

    #[error("grid too coarse: oscillation rate {rate} exceeds limit {limit}")]
    GridTooCoarse { rate: f64, limit: f64 },

    #[error("no convergence after {evaluations} evaluations (best value {best_value})")]
    NoConvergence {
        evaluations: usize,
        best_point: Vec<f64>,
        best_value: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable identifier used in scan tables and CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateObservable => "DegenerateObservable",
            Error::VanishingPostselection { .. } => "VanishingPostselection",
            Error::OrthogonalPps => "OrthogonalPPS",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::OutOfRegime { .. } => "OutOfRegime",
            Error::DegenerateSpread => "DegenerateSpread",
            Error::InsensitivePointer => "InsensitivePointer",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::NoConvergence { .. } => "NoConvergence",
        }
    }
}
