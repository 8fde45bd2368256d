//! Distribution-aligned compositional synthesis: cluster model over the
//! bank, reference/generated distribution tracking, scarcity-scored
//! candidate selection, temperature sampling, and the compatibility-gated
//! evolution loop.

mod engine;
mod kmeans;
mod prompts;
mod scoring;
mod tracker;

pub use engine::{
    apply_thought_mode, synthesize_chain, ApplyOutcome, ChainOutcome, ModeTuple, SelectorConfig,
    SynthesisContext,
};
pub use kmeans::{fit_kmeans, ClusterModel};
pub use prompts::{
    incompatible_schema, render_synthesis_prompt, synthesis_schema, SYNTHESIS_SYSTEM_PROMPT,
};
pub use scoring::{sample_candidate, scarcity_reward, score_candidate, softmax_probabilities};
pub use tracker::{coverage_report, ClusterCoverage, CoverageReport, DistributionTracker};

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::model::GenerationRecord;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("need at least {k} points for {k} clusters, got {points}")]
    TooFewPoints { k: usize, points: usize },
    #[error("no generations recorded yet")]
    NoGenerations,
    #[error("unknown mode id `{0}` returned by retrieval")]
    UnknownMode(String),
    #[error("tracker persistence: {0}")]
    TrackerIo(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    /// Provider died mid-chain; the partial record is preserved so the
    /// run can resume past this seed.
    #[error("synthesis interrupted: {reason}")]
    Interrupted {
        reason: String,
        partial: Box<GenerationRecord>,
    },
}
