//! Embeddings, bidirectional LSTM encoder, position-aware attention and the
//! four-way polarity classifier.

mod attention;
mod checkpoint;
mod embedding;
mod network;

use thiserror::Error;

pub use attention::{
    attention_backward, attention_scores, attention_weights, context_vector, AttentionCache, AttentionGrads,
    AttentionParams,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use embedding::{
    aspect_vector, load_pretrained, AspectPooling, EmbeddingTable, PositionTable, Pretrained, Vocab, PAD, PAD_TOKEN,
    UNK, UNK_TOKEN,
};
pub use network::{
    backward, forward, gradcheck_model, loss, predict, AtpParams, DropoutConfig, EncodedInstance, ForwardTrace,
    ModelDims, Prediction,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("aspect span selects no tokens")]
    EmptyAspect,
    #[error("embedding file line {line}: {reason}")]
    Embedding { line: usize, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid model dimensions: {0}")]
    BadDims(String),
}
