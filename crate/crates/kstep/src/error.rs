use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Belief matrix row does not sum to one within tolerance.
    #[error("belief matrix row {row} sums to {sum:.12}, expected 1 (tolerance 1e-9)")]
    RowSum { row: usize, sum: f64 },

    /// Nonzero entry above the superdiagonal.
    #[error("belief matrix entry ({row},{col}) = {value} must be zero (lower-triangular structure)")]
    Structure { row: usize, col: usize, value: f64 },

    /// Entry outside [0, 1].
    #[error("belief matrix entry ({row},{col}) = {value} outside [0,1]")]
    EntryRange { row: usize, col: usize, value: f64 },

    /// Wrong matrix shape for the requested k.
    #[error("belief matrix for k={k} must be {}x{k}, got {rows} rows of length {cols}", k - 1)]
    Shape { k: usize, rows: usize, cols: usize },

    /// Generic domain/precondition violation.
    #[error("{0}")]
    Domain(String),

    /// Input data failed validation.
    #[error("data error: {0}")]
    Data(String),

    /// Rank-deficient regression design.
    #[error("rank-deficient design: collinear columns {0:?}")]
    Collinear(Vec<String>),

    /// Sampler reached a non-finite state.
    #[error("sampler diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::RowSum { .. }
                | Error::Structure { .. }
                | Error::EntryRange { .. }
                | Error::Shape { .. }
                | Error::Domain(_)
                | Error::Data(_)
                | Error::Collinear(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
