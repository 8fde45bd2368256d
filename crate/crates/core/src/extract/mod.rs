//! Reverse engineering: decomposes a verified solution into a thought-mode
//! chain via tail-first window partitioning, seed generation, and iterative
//! dependency absorption.

mod bank;
mod chain;
mod prompts;
mod windows;

pub use bank::{build_bank, BankBuild, TrainingPair};
pub use chain::{absorb_step, detect_saturation, extract_chain, generate_seed, ChatOptions};
pub use prompts::{
    evolution_schema, render_evolution_prompt, render_seed_prompt, seed_schema,
    EVOLUTION_SYSTEM_PROMPT, SEED_SYSTEM_PROMPT,
};
pub use windows::partition_windows;

use thiserror::Error;

use crate::gateway::{GatewayError, Rejection};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("empty solution")]
    EmptySolution,
    #[error("window length must be at least 1")]
    BadWindowLength,
    #[error("skipped: {0}")]
    Skip(String),
    #[error("model output rejected: {0}")]
    Rejected(Rejection),
    #[error("invalid model content: {0}")]
    InvalidContent(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    /// Window length `w`: solution steps absorbed per evolution step.
    pub window_length: usize,
    /// Optional cap on chain length; the natural bound is one step per
    /// non-tail window.
    pub max_chain_steps: Option<usize>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            window_length: 2,
            max_chain_steps: None,
        }
    }
}
