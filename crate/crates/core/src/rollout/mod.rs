//! Multi-rollout inference over generated questions, judging, difficulty
//! labeling, provenance filtering, and SFT-record conversion.

mod filter;
mod prompts;
mod run;
mod sft;
mod stats;

pub use filter::{filter_provenance, FilterOutput, ProvenanceFilter, RemovalReport};
pub use prompts::{
    inference_schema, judge_schema, render_inference_user, render_judge_user,
    INFERENCE_SYSTEM_PROMPT, JUDGE_SYSTEM_PROMPT,
};
pub use run::{judge_rollout, label_difficulty, rollout_question, run_rollouts, JudgeOutcome, JudgeVerdict, RolloutConfig};
pub use sft::{convert_sft, export_hard_items, ConvertOutput};
pub use stats::{pipeline_stats, SourceShare, StageCounts, StagePaths, StageReport};

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("empty verdict list")]
    EmptyVerdicts,
    #[error("missing stage file: {0}")]
    MissingStageFile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("stage file error: {0}")]
    Jsonl(#[from] crate::model::JsonlError),
}
