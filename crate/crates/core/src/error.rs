use thiserror::Error;

/// Failures raised by decompositions, perturbation formulas and tests.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is defective: eigenvalue {eigenvalue} has geometric multiplicity below its algebraic multiplicity")]
    Defective { eigenvalue: String },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("selected and unselected spectra are separated by {gap:e}, below the threshold {threshold:e}")]
    SpectralOverlap { gap: f64, threshold: f64 },

    #[error("root selection splits the conjugate pair containing {eigenvalue}")]
    ConjugationSplit { eigenvalue: String },

    #[error("invalid root selection: {0}")]
    Selection(String),

    #[error("Sylvester operator is singular: spectral gap {gap:e} is not above {threshold:e}")]
    SingularOperator { gap: f64, threshold: f64 },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("normalizing block is singular (condition number {condition:e}); reorder coordinates so the tested block is invertible")]
    SingularNormalization { condition: f64 },

    #[error("non-positive variance {variance:e} for coefficient ({row}, {col})")]
    NonPositiveVariance { row: usize, col: usize, variance: f64 },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("dominant root is not unique: {0}")]
    DominantTie(String),

    #[error("unknown vertex '{0}'")]
    UnknownVertex(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
