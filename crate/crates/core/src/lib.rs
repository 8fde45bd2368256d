//! Reasoning-data synthesis pipeline.
//!
//! Decomposes verified solutions into reusable thought modes, trains a
//! compatibility retriever over them, composes new problems under
//! distribution-aligned sampling, and converts judged-correct rollouts
//! into supervised fine-tuning records.

pub mod config;
pub mod extract;
pub mod gateway;
pub mod hash;
pub mod model;
pub mod pipeline;
pub mod retrieval;
pub mod rollout;
pub mod synthesis;
