//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bath spectrum is degenerate within tolerance; use the degenerate-bath formulas")]
    DegenerateBathSpectrum,

    #[error("matrix is singular: {0}")]
    SingularMatrix(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureDiagnostic(String),

    #[error("extrapolation did not converge: {0}")]
    ExtrapolationDiagnostic(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("grid mismatch between inputs: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
