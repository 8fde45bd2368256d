//! The learned compatibility matcher: embedding store, exact inner-product
//! index, margin-ranking adapter training with periodic hard-negative
//! refresh, and recall evaluation.
//!
//! The trainable retriever is a d×d linear adapter applied over frozen
//! provider embeddings, with both the query and thought-mode sides sharing
//! the same matrix. Training keeps the full protocol around it: margin
//! ranking loss over mined hard negatives, index refresh every R steps,
//! an 80/20 split by source id, and validation-selected checkpoints.

mod adapter;
mod index;
mod loss;
mod train;

pub use adapter::AdapterParameters;
pub use index::{IndexEntry, VectorIndex};
pub use loss::{loss_and_grad, margin_loss, PairSample};
pub use train::{
    evaluate_recall, mine_hard_negatives, train_adapter, EvalPair, MiningState, TrainConfig,
    TrainLogEntry, TrainOutput,
};

use thiserror::Error;

use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("bank holds no non-positive modes to mine")]
    BankTooSmall,
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("positive id `{0}` is not in the bank")]
    MissingPositive(String),
    #[error("no training pairs")]
    NoPairs,
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
