//! Configuration resolution: built-in defaults, then a JSON config file,
//! then environment variables, then flags — last writer wins. Unknown
//! keys are rejected, invalid values name their field.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::hash::fnv1a;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {message}")]
    InvalidValue { field: String, message: String },
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Environment variable prefix: `MODEFORGE_ALPHA` overrides `alpha`.
pub const ENV_PREFIX: &str = "MODEFORGE_";

pub const KNOWN_KEYS: &[&str] = &[
    // extraction
    "window_length",
    "max_chain_steps",
    // retrieval training
    "margin",
    "negatives_per_sample",
    "refresh_interval",
    "learning_rate",
    "max_steps",
    "epochs",
    "warmup_steps",
    "weight_decay",
    "val_fraction",
    "batch_size",
    "checkpoint_interval",
    // synthesis selector
    "alpha",
    "tau",
    "clusters",
    "top_m",
    "evolution_steps",
    "epsilon",
    "cluster_min_similarity",
    // rollout and conversion
    "rollout_count",
    "chat_temperature",
    "max_tokens",
    "provenance_filter",
    // gateway and orchestration
    "retry_budget",
    "retry_base_ms",
    "in_flight_limit",
    "workers",
    "mock",
    "mock_embedding_dim",
    "endpoint",
    "api_key",
    "chat_model",
    "judge_model",
    "retriever_embedding_model",
    "selector_embedding_model",
    // paths and seeding
    "data_dir",
    "sources",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_length: usize,
    pub max_chain_steps: Option<usize>,

    pub margin: f64,
    pub negatives_per_sample: usize,
    pub refresh_interval: u64,
    pub learning_rate: f64,
    pub max_steps: u64,
    pub epochs: u64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub batch_size: usize,
    pub checkpoint_interval: u64,

    pub alpha: f64,
    pub tau: f64,
    pub clusters: usize,
    pub top_m: usize,
    pub evolution_steps: usize,
    pub epsilon: f64,
    pub cluster_min_similarity: f64,

    pub rollout_count: usize,
    pub chat_temperature: f64,
    pub max_tokens: u32,
    pub provenance_filter: BTreeSet<String>,

    pub retry_budget: u32,
    pub retry_base_ms: u64,
    pub in_flight_limit: usize,
    pub workers: usize,
    pub mock: bool,
    pub mock_embedding_dim: usize,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub judge_model: String,
    pub retriever_embedding_model: String,
    pub selector_embedding_model: String,

    pub data_dir: PathBuf,
    pub sources: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window_length: 2,
            max_chain_steps: None,

            margin: 0.2,
            negatives_per_sample: 5,
            refresh_interval: 5,
            learning_rate: 2e-5,
            max_steps: 300,
            epochs: 10,
            warmup_steps: 100,
            weight_decay: 0.01,
            val_fraction: 0.2,
            batch_size: 2,
            checkpoint_interval: 10,

            alpha: 0.65,
            tau: 1.0,
            clusters: 12,
            top_m: 20,
            evolution_steps: 3,
            epsilon: 1e-3,
            cluster_min_similarity: 0.0,

            rollout_count: 3,
            chat_temperature: 0.7,
            max_tokens: 8096,
            provenance_filter: ["opencompass__AIME2025", "xw27__scibench", "cais__hle"]
                .into_iter()
                .map(String::from)
                .collect(),

            retry_budget: 3,
            retry_base_ms: 1000,
            in_flight_limit: 8,
            workers: 8,
            mock: false,
            mock_embedding_dim: 32,
            endpoint: None,
            api_key: None,
            chat_model: "deepseek-chat".into(),
            judge_model: "deepseek-chat".into(),
            retriever_embedding_model: "qwen3-embedding-0.6b".into(),
            selector_embedding_model: "qwen3-embedding-0.6b".into(),

            data_dir: PathBuf::from("data"),
            sources: None,
            seed: 0,
        }
    }
}

fn as_f64(field: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| invalid(field, "expected a number"))
}

fn as_u64(field: &str, v: &Value) -> Result<u64, ConfigError> {
    v.as_u64()
        .ok_or_else(|| invalid(field, "expected a non-negative integer"))
}

fn as_usize(field: &str, v: &Value) -> Result<usize, ConfigError> {
    Ok(as_u64(field, v)? as usize)
}

fn as_bool(field: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| invalid(field, "expected a boolean"))
}

fn as_string(field: &str, v: &Value) -> Result<String, ConfigError> {
    v.as_str()
        .map(String::from)
        .ok_or_else(|| invalid(field, "expected a string"))
}

fn as_string_set(field: &str, v: &Value) -> Result<BTreeSet<String>, ConfigError> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(|item| as_string(field, item))
            .collect::<Result<BTreeSet<String>, _>>(),
        Value::String(s) => Ok(s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(String::from)
            .collect()),
        _ => Err(invalid(field, "expected a list of strings")),
    }
}

impl PipelineConfig {
    /// Apply one key/value override. `null` resets optional fields.
    pub fn apply(&mut self, key: &str, value: &Value) -> Result<(), ConfigError> {
        match key {
            "window_length" => self.window_length = as_usize(key, value)?,
            "max_chain_steps" => {
                self.max_chain_steps = if value.is_null() {
                    None
                } else {
                    Some(as_usize(key, value)?)
                }
            }
            "margin" => self.margin = as_f64(key, value)?,
            "negatives_per_sample" => self.negatives_per_sample = as_usize(key, value)?,
            "refresh_interval" => self.refresh_interval = as_u64(key, value)?,
            "learning_rate" => self.learning_rate = as_f64(key, value)?,
            "max_steps" => self.max_steps = as_u64(key, value)?,
            "epochs" => self.epochs = as_u64(key, value)?,
            "warmup_steps" => self.warmup_steps = as_u64(key, value)?,
            "weight_decay" => self.weight_decay = as_f64(key, value)?,
            "val_fraction" => self.val_fraction = as_f64(key, value)?,
            "batch_size" => self.batch_size = as_usize(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = as_u64(key, value)?,
            "alpha" => self.alpha = as_f64(key, value)?,
            "tau" => self.tau = as_f64(key, value)?,
            "clusters" => self.clusters = as_usize(key, value)?,
            "top_m" => self.top_m = as_usize(key, value)?,
            "evolution_steps" => self.evolution_steps = as_usize(key, value)?,
            "epsilon" => self.epsilon = as_f64(key, value)?,
            "cluster_min_similarity" => self.cluster_min_similarity = as_f64(key, value)?,
            "rollout_count" => self.rollout_count = as_usize(key, value)?,
            "chat_temperature" => self.chat_temperature = as_f64(key, value)?,
            "max_tokens" => self.max_tokens = as_u64(key, value)? as u32,
            "provenance_filter" => self.provenance_filter = as_string_set(key, value)?,
            "retry_budget" => self.retry_budget = as_u64(key, value)? as u32,
            "retry_base_ms" => self.retry_base_ms = as_u64(key, value)?,
            "in_flight_limit" => self.in_flight_limit = as_usize(key, value)?,
            "workers" => self.workers = as_usize(key, value)?,
            "mock" => self.mock = as_bool(key, value)?,
            "mock_embedding_dim" => self.mock_embedding_dim = as_usize(key, value)?,
            "endpoint" => {
                self.endpoint = if value.is_null() {
                    None
                } else {
                    Some(as_string(key, value)?)
                }
            }
            "api_key" => {
                self.api_key = if value.is_null() {
                    None
                } else {
                    Some(as_string(key, value)?)
                }
            }
            "chat_model" => self.chat_model = as_string(key, value)?,
            "judge_model" => self.judge_model = as_string(key, value)?,
            "retriever_embedding_model" => {
                self.retriever_embedding_model = as_string(key, value)?
            }
            "selector_embedding_model" => self.selector_embedding_model = as_string(key, value)?,
            "data_dir" => self.data_dir = PathBuf::from(as_string(key, value)?),
            "sources" => {
                self.sources = if value.is_null() {
                    None
                } else {
                    Some(PathBuf::from(as_string(key, value)?))
                }
            }
            "seed" => self.seed = as_u64(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", "must be in [0, 1]"));
        }
        if self.tau <= 0.0 {
            return Err(invalid("tau", "must be > 0"));
        }
        if self.margin <= 0.0 {
            return Err(invalid("margin", "must be > 0"));
        }
        if self.epsilon <= 0.0 {
            return Err(invalid("epsilon", "must be > 0"));
        }
        if self.window_length < 1 {
            return Err(invalid("window_length", "must be >= 1"));
        }
        if self.negatives_per_sample < 1 {
            return Err(invalid("negatives_per_sample", "must be >= 1"));
        }
        if self.refresh_interval < 1 {
            return Err(invalid("refresh_interval", "must be >= 1"));
        }
        if self.top_m < 1 {
            return Err(invalid("top_m", "must be >= 1"));
        }
        if self.evolution_steps < 1 {
            return Err(invalid("evolution_steps", "must be >= 1"));
        }
        if self.clusters < 1 {
            return Err(invalid("clusters", "must be >= 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(invalid("val_fraction", "must be in (0, 1)"));
        }
        if self.batch_size < 1 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        if self.checkpoint_interval < 1 {
            return Err(invalid("checkpoint_interval", "must be >= 1"));
        }
        if self.rollout_count < 1 {
            return Err(invalid("rollout_count", "must be >= 1"));
        }
        if self.chat_temperature < 0.0 {
            return Err(invalid("chat_temperature", "must be >= 0"));
        }
        if self.learning_rate < 0.0 {
            return Err(invalid("learning_rate", "must be >= 0"));
        }
        if self.workers < 1 {
            return Err(invalid("workers", "must be >= 1"));
        }
        if self.mock_embedding_dim < 2 {
            return Err(invalid("mock_embedding_dim", "must be >= 2"));
        }
        Ok(())
    }

    /// Canonical JSON of the resolved config with the credential redacted;
    /// echoed into stage summaries for provenance.
    pub fn redacted_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        let mut put = |k: &str, v: Value| {
            map.insert(k.to_string(), v);
        };
        put("window_length", self.window_length.into());
        put(
            "max_chain_steps",
            self.max_chain_steps.map(Into::into).unwrap_or(Value::Null),
        );
        put("margin", self.margin.into());
        put("negatives_per_sample", self.negatives_per_sample.into());
        put("refresh_interval", self.refresh_interval.into());
        put("learning_rate", self.learning_rate.into());
        put("max_steps", self.max_steps.into());
        put("epochs", self.epochs.into());
        put("warmup_steps", self.warmup_steps.into());
        put("weight_decay", self.weight_decay.into());
        put("val_fraction", self.val_fraction.into());
        put("batch_size", self.batch_size.into());
        put("checkpoint_interval", self.checkpoint_interval.into());
        put("alpha", self.alpha.into());
        put("tau", self.tau.into());
        put("clusters", self.clusters.into());
        put("top_m", self.top_m.into());
        put("evolution_steps", self.evolution_steps.into());
        put("epsilon", self.epsilon.into());
        put("cluster_min_similarity", self.cluster_min_similarity.into());
        put("rollout_count", self.rollout_count.into());
        put("chat_temperature", self.chat_temperature.into());
        put("max_tokens", self.max_tokens.into());
        put(
            "provenance_filter",
            Value::Array(
                self.provenance_filter
                    .iter()
                    .map(|s| Value::String(s.clone()))
                    .collect(),
            ),
        );
        put("retry_budget", self.retry_budget.into());
        put("retry_base_ms", self.retry_base_ms.into());
        put("in_flight_limit", self.in_flight_limit.into());
        put("workers", self.workers.into());
        put("mock", self.mock.into());
        put("mock_embedding_dim", self.mock_embedding_dim.into());
        put(
            "endpoint",
            self.endpoint.clone().map(Value::String).unwrap_or(Value::Null),
        );
        put(
            "api_key",
            if self.api_key.is_some() {
                Value::String("<redacted>".into())
            } else {
                Value::Null
            },
        );
        put("chat_model", self.chat_model.clone().into());
        put("judge_model", self.judge_model.clone().into());
        put(
            "retriever_embedding_model",
            self.retriever_embedding_model.clone().into(),
        );
        put(
            "selector_embedding_model",
            self.selector_embedding_model.clone().into(),
        );
        put("data_dir", self.data_dir.display().to_string().into());
        put(
            "sources",
            self.sources
                .as_ref()
                .map(|p| Value::String(p.display().to_string()))
                .unwrap_or(Value::Null),
        );
        put("seed", self.seed.into());
        Value::Object(map)
    }

    /// Stable fingerprint of the resolved config (credential excluded).
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a(self.redacted_json().to_string().as_bytes()))
    }

    pub fn sources_path(&self) -> PathBuf {
        self.sources
            .clone()
            .unwrap_or_else(|| self.data_dir.join("sources.jsonl"))
    }
}

/// Parse an environment/flag value: JSON when it parses, raw string
/// otherwise (so `MODEFORGE_ALPHA=0.5` and `MODEFORGE_CHAT_MODEL=gpt-x`
/// both work without quoting).
pub fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Merge order: defaults < file < environment < overrides (flags).
pub fn resolve_config(
    file: Option<&Path>,
    env: &dyn Fn(&str) -> Option<String>,
    overrides: &[(String, Value)],
) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();

    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let object = value.as_object().ok_or_else(|| ConfigError::File {
            path: path.display().to_string(),
            message: "config file must be a JSON object".into(),
        })?;
        for (key, val) in object {
            cfg.apply(key, val)?;
        }
    }

    for key in KNOWN_KEYS {
        let var = format!("{ENV_PREFIX}{}", key.to_uppercase());
        if let Some(raw) = env(&var) {
            cfg.apply(key, &parse_override_value(&raw))?;
        }
    }

    for (key, value) in overrides {
        cfg.apply(key, value)?;
    }

    cfg.validate()?;
    Ok(cfg)
}
