//! Aspect-term sentiment classification with dependency-path position attention.
//!
//! The pipeline is:
//!
//! 1. [`ingest`] reads SemEval-style review XML together with CoNLL-U parses
//!    and produces [`ReviewInstance`]s whose aspect spans are token ranges.
//! 2. [`position`] turns each instance into a [`PositionVector`]: the number
//!    of dependency edges between every token and the aspect span.
//! 3. [`model`] embeds words and distances, encodes the sentence with a
//!    bidirectional LSTM and pools the hidden states with an attention layer
//!    whose scores see the hidden state, the distance embedding and the aspect
//!    embedding. A linear classifier maps the context vector to four polarity
//!    logits.
//! 4. [`train`] runs RMSprop with a step-decay schedule, tracks dev accuracy
//!    and keeps the best parameters.
//!
//! All numerics are `f64` with hand-written forward and backward passes in
//! [`nn`], checked against central finite differences by [`nn::grad_check`].

pub mod error;
pub mod heatmap;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod position;
pub mod train;

pub use error::{Error, Result};
pub use ingest::{DepTree, PolarityLabel, ReviewInstance, Span, Token};
pub use position::PositionVector;
