use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular to tolerance (pivot {pivot:e} at step {step})")]
    Singular { pivot: f64, step: usize },

    #[error("disconnected design: test-versus-control contrasts are not estimable")]
    Disconnected,

    #[error("bound is inapplicable: {0}")]
    InapplicableBound(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("no construction available: {0}")]
    Existence(String),

    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error("constructed design failed verification: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
