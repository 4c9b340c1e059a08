//! Batching, class rebalancing, the RMSprop training loop and evaluation.

mod batch;
mod config;
mod trainer;

use thiserror::Error;

pub use batch::{
    class_counts, encode_all, lr_schedule, make_batches, pad_length, split_dev, upsample_conflict, upsample_target,
};
pub use config::{TrainConfig, Upsample};
pub use trainer::{evaluate, evaluate_encoded, majority_baseline, train, EpochReport, Evaluation, TrainOutcome};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("upsampling to {target} conflict instances requested but the training set has none")]
    NoConflictInstances { target: usize },
    #[error("upsample target {target} is below the current conflict count {current}")]
    TargetBelowCount { target: usize, current: usize },
    #[error("sentence {sentence_id} has {len} tokens, more than max_len {max}")]
    SentenceTooLong {
        sentence_id: String,
        len: usize,
        max: usize,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch}")]
    DivergenceDetected { epoch: usize, batch: usize, loss: f64 },
}
