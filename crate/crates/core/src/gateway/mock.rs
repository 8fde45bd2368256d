//! Deterministic offline providers.
//!
//! `MockChatProvider` resolves exchanges in three layers: scripted FIFO
//! responses (consumed in order), canned responses (stable lookup keyed
//! by the (system, user) pair), and an optional synthetic responder that
//! fabricates a schema-valid reply for any pipeline prompt. The synthetic
//! layer folds a per-key call counter into its output so repeated sampled
//! completions differ, the way a temperature > 0 model's would, while the
//! whole sequence stays reproducible across processes.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CallError, ChatExchange, ChatProvider, ChatResponse, EmbeddingProvider, GatewayError};
use crate::hash::fnv1a_parts;

pub struct MockChatProvider {
    canned: Mutex<HashMap<u64, String>>,
    scripts: Mutex<HashMap<u64, VecDeque<String>>>,
    counters: Mutex<HashMap<u64, u64>>,
    fail_transient: Mutex<u32>,
    synthetic_fallback: bool,
    tag: String,
}

impl MockChatProvider {
    /// Lookup-only mock: exchanges without a registered response fail.
    pub fn new(tag: impl Into<String>) -> Self {
        MockChatProvider {
            canned: Mutex::new(HashMap::new()),
            scripts: Mutex::new(HashMap::new()),
            counters: Mutex::new(HashMap::new()),
            fail_transient: Mutex::new(0),
            synthetic_fallback: false,
            tag: tag.into(),
        }
    }

    /// Mock that falls back to a fabricated schema-valid response for
    /// any unregistered exchange. This is what `--mock` pipeline runs use.
    pub fn with_synthetic(tag: impl Into<String>) -> Self {
        let mut provider = Self::new(tag);
        provider.synthetic_fallback = true;
        provider
    }

    fn key(system: &str, user: &str) -> u64 {
        fnv1a_parts(&[system, user])
    }

    /// Pre-register a canned response: every lookup of this exchange
    /// returns the same text.
    pub fn register(&self, system: &str, user: &str, response: impl Into<String>) {
        self.canned
            .lock()
            .unwrap()
            .insert(Self::key(system, user), response.into());
    }

    /// Queue responses consumed in order for repeated identical exchanges.
    pub fn script(&self, system: &str, user: &str, responses: Vec<String>) {
        self.scripts
            .lock()
            .unwrap()
            .entry(Self::key(system, user))
            .or_default()
            .extend(responses);
    }

    /// Make the next `n` calls fail with a transient transport error.
    pub fn fail_next(&self, n: u32) {
        *self.fail_transient.lock().unwrap() = n;
    }
}

impl ChatProvider for MockChatProvider {
    fn call_once(&self, exchange: &ChatExchange) -> Result<ChatResponse, CallError> {
        {
            let mut failures = self.fail_transient.lock().unwrap();
            if *failures > 0 {
                *failures -= 1;
                return Err(CallError::Transient("scripted transport failure".into()));
            }
        }
        let key = Self::key(&exchange.system_text, &exchange.user_text);
        if let Some(queue) = self.scripts.lock().unwrap().get_mut(&key) {
            if let Some(response) = queue.pop_front() {
                return Ok(ChatResponse {
                    response_text: response,
                    provider_tag: self.tag.clone(),
                });
            }
        }
        if let Some(response) = self.canned.lock().unwrap().get(&key) {
            return Ok(ChatResponse {
                response_text: response.clone(),
                provider_tag: self.tag.clone(),
            });
        }
        if self.synthetic_fallback {
            let call_index = {
                let mut counters = self.counters.lock().unwrap();
                let counter = counters.entry(key).or_insert(0);
                let current = *counter;
                *counter += 1;
                current
            };
            return Ok(ChatResponse {
                response_text: synthetic_response_n(
                    &exchange.system_text,
                    &exchange.user_text,
                    call_index,
                ),
                provider_tag: self.tag.clone(),
            });
        }
        Err(CallError::Fatal(GatewayError::ProviderUnavailable {
            attempts: 1,
            last_error: "no canned response for exchange".into(),
        }))
    }

    fn provider_tag(&self) -> String {
        self.tag.clone()
    }
}

/// Fabricate a deterministic, schema-valid response for any of the
/// pipeline's prompt families (first sampled completion).
pub fn synthetic_response(system: &str, user: &str) -> String {
    synthetic_response_n(system, user, 0)
}

fn hex(h: u64, chars: usize) -> String {
    format!("{:016x}", h)[..chars].to_string()
}

fn synthetic_response_n(system: &str, user: &str, call_index: u64) -> String {
    let h = fnv1a_parts(&[system, user, &call_index.to_string()]);
    let tag = hex(h, 8);
    if system.contains("\"is_correct\"") {
        let verdict = !h.is_multiple_of(3);
        return format!("{{\"is_correct\": {verdict}}}");
    }
    if system.contains("\"is_compatible\"") {
        let compatible = h % 10 < 8;
        if !compatible {
            return "{\"is_compatible\": false}".to_string();
        }
        return serde_json::json!({
            "is_compatible": true,
            "question": format!("Composed question {tag}: determine the target quantity after absorbing the selected transformation."),
            "answer": format!("v{}", hex(h.rotate_left(8), 6)),
            "solution_steps": [
                format!("Set up the derivation required by transformation {tag}."),
                "Carry the intermediate result through the original reasoning.".to_string(),
                "Combine both parts into the final value.".to_string(),
            ],
            "S_sum": format!("Requires deriving quantity {tag} before the original reasoning applies."),
            "S_det": "Removed the explicit intermediate value; the solver must now derive it from the stated conditions.",
            "K_gen": [format!("principle-{}", hex(h.rotate_left(16), 4))],
            "K_spec": [format!("parameter-{}", hex(h.rotate_left(24), 4))],
        })
        .to_string();
    }
    if system.contains("\"Q_next\"") {
        return serde_json::json!({
            "Q_next": format!("Evolved question {tag}: compute the result without the previously given intermediate value."),
            "answer": format!("v{}", hex(h.rotate_left(8), 6)),
            "solution_steps": [
                format!("Derive the value that window {tag} used to provide."),
                "Finish with the remaining original steps.".to_string(),
            ],
            "S_sum": format!("Absorb the derivation of intermediate quantity {tag}."),
            "S_det": "Replace the explicit given with the conditions needed to derive it.",
            "K_gen": [format!("principle-{}", hex(h.rotate_left(16), 4))],
            "K_spec": [format!("parameter-{}", hex(h.rotate_left(24), 4))],
        })
        .to_string();
    }
    if system.contains("\"seed_question\"") {
        return serde_json::json!({
            "seed_question": format!("Seed question {tag}: given the stated intermediate results, compute the final quantity."),
            "answer": format!("v{}", hex(h.rotate_left(8), 6)),
            "solution_steps": [
                "Substitute the provided intermediate values.".to_string(),
                "Evaluate the final expression.".to_string(),
            ],
        })
        .to_string();
    }
    if system.contains("\"final_answer\"") {
        return serde_json::json!({
            "steps": [
                "Restate the quantities the problem provides.".to_string(),
                format!("Work the derivation {tag} through to a value."),
            ],
            "final_answer": format!("v{}", hex(h.rotate_left(8), 6)),
        })
        .to_string();
    }
    format!("{{\"response\": \"{tag}\"}}")
}

/// Hash-seeded embeddings: one stable vector per (model tag, text) pair,
/// identical across processes. Vectors are not normalized.
pub struct MockEmbeddingProvider {
    dim: usize,
    tag: String,
}

impl MockEmbeddingProvider {
    pub fn new(dim: usize, tag: impl Into<String>) -> Self {
        MockEmbeddingProvider {
            dim,
            tag: tag.into(),
        }
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyBatch);
        }
        Ok(texts
            .iter()
            .map(|text| {
                let seed = fnv1a_parts(&[&self.tag, text]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
            })
            .collect())
    }

    fn provider_tag(&self) -> String {
        format!("mock-embed:{}:{}", self.tag, self.dim)
    }
}

/// Embeddings pinned per text, for tests that need exact control over
/// the vector geometry.
#[derive(Default)]
pub struct FixedEmbeddingProvider {
    map: HashMap<String, Vec<f64>>,
}

impl FixedEmbeddingProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        self.map.insert(text.into(), vector);
    }
}

impl EmbeddingProvider for FixedEmbeddingProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyBatch);
        }
        texts
            .iter()
            .map(|text| {
                self.map.get(text).cloned().ok_or_else(|| {
                    GatewayError::ProviderUnavailable {
                        attempts: 1,
                        last_error: format!("no fixed embedding for text: {text:?}"),
                    }
                })
            })
            .collect()
    }

    fn provider_tag(&self) -> String {
        "fixed-embed".into()
    }
}
