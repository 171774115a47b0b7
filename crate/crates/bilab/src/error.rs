use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: {nx}x{ny}, need at least 5 nodes per direction")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: String, node: usize },

    #[error("0 is (numerically) a Navier eigenvalue of the assembled operator")]
    NavierEigenvalue,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("{what} exceeds the contraction ball: measured {measured:.3e}, cap {cap:.3e}; shrink the input")]
    ContractionBall {
        what: String,
        measured: f64,
        cap: f64,
    },

    #[error(
        "{what} did not converge within {iterations} iterations (last update {last_update:.3e})"
    )]
    NoConvergence {
        what: String,
        iterations: usize,
        last_update: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("field is not clamped: {0}")]
    NotClamped(String),

    #[error("field is not in the range space Z: projection distance {distance:.3e} exceeds {tolerance:.3e}")]
    NotInRange { distance: f64, tolerance: f64 },

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed field file at line {line}: {message}")]
    FieldFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
