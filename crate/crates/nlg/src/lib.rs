//! From-scratch attention sequence-to-sequence generator: a bidirectional
//! LSTM encoder over the linearized meaning representation and a single
//! forward LSTM decoder with bilinear attention, trained by mini-batch
//! gradient descent on hand-derived gradients.
//!
//! The decoder is unidirectional: it generates left to right, so there is no
//! right context to run a backward pass over. By default the output matrix is
//! applied to the attention context alone ([`LogitsFrom::Context`]); the
//! decoder state then shapes the output only through the attention scores.
//! [`LogitsFrom::StateContext`] is the conventional alternative.

pub mod embedding;
pub mod error;
pub mod generate;
pub mod io;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod train;
pub mod vocab;

pub use embedding::{EmbeddingProvider, EmbeddingTable, LearnedEmbeddings, PretrainedEmbeddings};
pub use error::{NlgError, Result};
pub use generate::{generate, DecodeStrategy, Generation};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use loss::{loss, loss_and_gradient, token_accuracy};
pub use lstm::{lstm_step, Gate, LstmParams, LstmState};
pub use model::{
    attend, build_vocabs, decode_step, encode, initial_state, EncodedPair, LogitsFrom, ModelConfig, NlgModel, Params,
};
pub use train::{train, train_with, LossTrace, TrainConfig};
pub use vocab::Vocab;
