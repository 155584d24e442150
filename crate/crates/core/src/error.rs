use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: zero volume")]
    DegenerateCell { cell: usize },

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("coefficient not positive definite on cell {cell}")]
    NotPositiveDefinite { cell: usize },

    #[error("bubble scale H = {value} is not positive on cell {cell}")]
    NonPositiveBubbleScale { cell: usize, value: f64 },

    #[error("constants for analytic coefficient `{0}` need user bounds or sampling")]
    MissingConstants(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotSpd { pivot: usize },

    #[error("invalid eigen request: {0}")]
    InvalidRequest(String),

    #[error("eigensolver did not converge after {iterations} iterations; residuals {residuals:?}")]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("invalid bound parameters: {0}")]
    InvalidParameters(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
