use thiserror::Error;

/// Errors raised by the numerical and modelling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("invalid block model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} iterations")]
    NonConvergence { index: usize, iterations: usize },

    #[error("requested dimension {requested} exceeds numerical rank: |lambda_{requested}| = {magnitude:e} below threshold {threshold:e}")]
    DegenerateDimension {
        requested: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("block mean matrix has zero rank")]
    ZeroRank,

    #[error("alignment is degenerate: {0}")]
    AlignmentDegenerate(String),

    #[error("latent positions are rank deficient: {0}")]
    SingularLatent(String),

    #[error("second-moment matrix is singular (minimal dimensionality violated): smallest eigenvalue {0:e}")]
    SingularSecondMoment(f64),

    #[error("covariance is not positive definite: {0}")]
    Covariance(String),

    #[error("Chernoff information undefined: {0}")]
    UndefinedChernoff(String),

    #[error("Chernoff ratio undefined: denominator {0:e}")]
    RatioUndefined(f64),

    #[error("edge transform domain violated at ({row}, {col}): weight {weight} ({reason})")]
    TransformDomain {
        row: usize,
        col: usize,
        weight: f64,
        reason: &'static str,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
