//! Dense `f64` kernels with explicit forward and backward passes.

mod gradcheck;
mod lstm;
mod ops;
mod optim;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, BlockReport, GradCheckReport};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_cell_backward, lstm_cell_forward, BiLstmTrace, LstmCache,
    LstmCellParams, LstmGradInputs,
};
pub use ops::{
    cross_entropy, dropout, dropout_mask, masked_softmax, masked_softmax_backward, sigmoid, softmax,
};
pub use optim::RmsProp;
pub use tensor::{Param, ParamSet, Tensor2};
pub(crate) use tensor::{axpy, dot};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnError {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dropout rate {0} outside [0, 1)")]
    BadRate(String),
}

pub(crate) fn expect_len(op: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::DimensionMismatch { op, expected, got })
    }
}
