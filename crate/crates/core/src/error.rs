use thiserror::Error;

use crate::problem::ContactState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("entry #{entry} at ({row}, {col}) is outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        entry: usize,
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("invalid block id {0} (expected 1..=6)")]
    InvalidBlock(usize),

    #[error("invalid block layout: {0}")]
    Layout(String),

    #[error("singular {what} cell block at cell {cell}{}", state.map(|s| format!(" (state {s})")).unwrap_or_default())]
    SingularCellBlock {
        what: &'static str,
        cell: usize,
        state: Option<ContactState>,
    },

    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },

    #[error("zero diagonal entry in {what} at row {row}")]
    ZeroDiagonal { what: &'static str, row: usize },

    #[error("matrix is singular to machine precision (pivot column {col})")]
    Singular { col: usize },

    #[error("non-finite value produced by {stage}")]
    NonFinite { stage: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("MatrixMarket format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
