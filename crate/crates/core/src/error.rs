use thiserror::Error;

/// Errors produced by discretization, compression and factorization.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficient field violates its bounds at ({x}, {y}): {what} = {value}")]
    FieldBounds {
        what: &'static str,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("adaptive quadrature hit its depth cap: value {value}, error estimate {error_estimate}")]
    QuadratureDepth { value: f64, error_estimate: f64 },

    #[error(
        "matrix not positive definite: block {block}, local row {row}, pivot {pivot:e} \
         (try a tighter compression tolerance or check the assembly)"
    )]
    NotPositiveDefinite { block: usize, row: usize, pivot: f64 },

    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("dense size cap exceeded: N = {n} > {cap}")]
    DenseCap { n: usize, cap: usize },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
