use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: size {size} exceeds cap {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("ball of radius {radius} around vertex {root} is not a tree")]
    NonTreeBall { root: usize, radius: usize },

    #[error("no coexistence below the critical coupling: J = {j} <= J_c = {j_c}")]
    NoCoexistence { j: f64, j_c: f64 },

    #[error("numerical routine failed to converge: {0}")]
    Convergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(
        "reference values were produced by version {found}, expected {expected}; \
         regenerate with `meanfield critical`"
    )]
    StaleReference { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
