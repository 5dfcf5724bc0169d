use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("count overflow: product entry exceeds {}", u32::MAX)]
    Overflow,

    #[error("invalid threshold plan: {0}")]
    InvalidPlan(String),

    #[error("star query arity {0} out of range (2..=4)")]
    StarArity(usize),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("calibration table is empty; run `mmjoin calibrate` or set MMJOIN_CALIBRATION")]
    EmptyCalibration,

    #[error("calibration failed: {0}")]
    Calibration(String),
}
