use thiserror::Error;

/// Errors raised by the numerical kernel and the saddle-point pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: String,
        found: String,
    },

    #[error("{block} is not symmetric: defect {defect:.3e} exceeds {tol:.3e}")]
    Asymmetric { block: String, defect: f64, tol: f64 },

    #[error("{block} is not positive semidefinite: smallest eigenvalue {min_eig:.3e} below {tol:.3e}")]
    NotPositiveSemidefinite { block: String, min_eig: f64, tol: f64 },

    #[error("{what} is singular: {detail}")]
    Singular { what: String, detail: String },

    #[error("eigenvalue {value:.3e} lies in the ambiguous band ({zero_tol:.3e}, {upper:.3e}) and cannot be classified")]
    AmbiguousEigenvalue { value: f64, zero_tol: f64, upper: f64 },

    #[error("not a graph subspace over the positive block: condition number {condition:.3e} of the leading block exceeds {limit:.1e}")]
    NotGraphSubspace { condition: f64, limit: f64 },

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("kernel does not split along the block decomposition: {0}")]
    KernelSplit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("{routine} failed: {detail}")]
    Backend { routine: &'static str, detail: String },

    #[error("matrix market parse error at line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
