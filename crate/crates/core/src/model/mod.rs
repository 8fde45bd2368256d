//! Domain types shared across pipeline stages, their on-disk JSONL
//! encodings, and the canonical text serializations consumed by
//! embedding providers.

mod jsonl;
mod serialize;
mod types;

pub use jsonl::{append_jsonl, read_jsonl, read_jsonl_or_empty, write_jsonl, JsonlError};
pub use serialize::{serialize_logic_text, serialize_query_text, serialize_state_text, LIST_JOIN};
pub use types::{
    ChainRecord, DifficultyLabel, GenerationRecord, GenerationStep, ModelError, ProblemState,
    Rollout, RolloutBundle, SftRecord, SolutionWindow, ThoughtMode, Verdict, SFT_SYSTEM_TEXT,
};
