use thiserror::Error;

use crate::dataset::Arm;

/// Everything that can go wrong between reading a CSV and producing a curve.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: time must be positive and finite")]
    NonPositiveTime { row: usize },

    #[error("row {row}: column `{column}` must be 0 or 1")]
    NonBinaryIndicator { row: usize, column: String },

    #[error("row {row}: column `{column}` is not a finite number")]
    NonFiniteCovariate { row: usize, column: String },

    #[error("covariate length {found} does not match dimension {expected}")]
    CovariateDimension { expected: usize, found: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("{0} has no observations")]
    EmptyArm(Arm),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("every observation is censored; censoring weights are all zero")]
    DegenerateCensoring,

    #[error("all points are identical; median heuristic bandwidth would be zero")]
    AllPointsIdentical,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("time range is degenerate (min = max = {0})")]
    DegenerateRange(f64),

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
    Usage,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularSystem | Error::AllPointsIdentical | Error::DegenerateRange(_) => {
                ErrorKind::Numerical
            }
            Error::InvalidParameter(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
