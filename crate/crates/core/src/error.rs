use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Shape {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("degenerate input in {op}: row {row} of {operand} has zero norm")]
    Degenerate {
        op: &'static str,
        operand: &'static str,
        row: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient {what}: need {needed}, have {available}")]
    Capacity {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("gradient oracle failed: objective is not finite at {0}")]
    OracleFailure(String),

    #[error("training diverged at epoch {epoch} step {step}: last finite loss {last_finite_loss}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_finite_loss: f64,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }
}
