//! Uniform access to chat-completion and embedding providers over an
//! OpenAI-compatible wire format, plus strict structured-output parsing
//! and deterministic mock providers for offline runs.

mod cache;
mod http;
mod mock;
mod schema;

pub use cache::EmbeddingCache;
pub use http::{HttpChatProvider, HttpEmbeddingProvider, ProviderEndpoint};
pub use mock::{
    synthetic_response, FixedEmbeddingProvider, MockChatProvider, MockEmbeddingProvider,
};
pub use schema::{
    doc_bool, doc_string, doc_string_list, parse_structured_output, FieldKind, Rejection,
    SchemaField, SchemaSpec,
};

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider unavailable after {attempts} attempt(s): {last_error}")]
    ProviderUnavailable { attempts: u32, last_error: String },
    #[error("missing credential: {0}")]
    CredentialMissing(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("empty input batch")]
    EmptyBatch,
}

/// A single transport attempt can fail in a retryable or terminal way.
/// Schema rejections never appear here: a rejection is data, not failure.
#[derive(Debug)]
pub enum CallError {
    /// Network trouble or HTTP 429/5xx; worth retrying.
    Transient(String),
    /// Anything else; retrying would not help.
    Fatal(GatewayError),
}

/// One chat request: prompt pair plus sampling settings.
#[derive(Debug, Clone)]
pub struct ChatExchange {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatExchange {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        ChatExchange {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: 0.7,
            max_tokens: 8096,
        }
    }

    pub fn with_sampling(mut self, temperature: f64, max_tokens: u32) -> Self {
        self.temperature = temperature;
        self.max_tokens = max_tokens;
        self
    }
}

/// A completed exchange: the provider's message text and a tag recorded
/// for provenance.
#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub response_text: String,
    pub provider_tag: String,
}

pub trait ChatProvider: Send + Sync {
    /// One transport attempt, no retries.
    fn call_once(&self, exchange: &ChatExchange) -> Result<ChatResponse, CallError>;

    fn provider_tag(&self) -> String;
}

pub trait EmbeddingProvider: Send + Sync {
    /// One fixed-dimension vector per input, order-preserving.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;

    fn provider_tag(&self) -> String;
}

/// Retry schedule for transient transport failures: `retry_budget`
/// retries after the initial attempt, sleeping `base * 2^i` before
/// retry `i`. Schema rejections are never retried.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub retry_budget: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retry_budget: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn no_wait(retry_budget: u32) -> Self {
        RetryPolicy {
            retry_budget,
            base_delay: Duration::ZERO,
        }
    }
}

/// Complete a chat exchange, retrying transient failures per the policy.
pub fn complete_chat(
    provider: &dyn ChatProvider,
    exchange: &ChatExchange,
    policy: RetryPolicy,
) -> Result<ChatResponse, GatewayError> {
    let mut last_error = String::new();
    let attempts = policy.retry_budget + 1;
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = policy.base_delay * 2u32.pow(attempt - 1);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
        }
        match provider.call_once(exchange) {
            Ok(response) => return Ok(response),
            Err(CallError::Fatal(err)) => return Err(err),
            Err(CallError::Transient(msg)) => last_error = msg,
        }
    }
    Err(GatewayError::ProviderUnavailable {
        attempts,
        last_error,
    })
}

/// Validate that every returned vector shares one dimension.
pub fn check_dimensions(vectors: &[Vec<f64>]) -> Result<(), GatewayError> {
    if let Some(first) = vectors.first() {
        let expected = first.len();
        for v in vectors {
            if v.len() != expected {
                return Err(GatewayError::DimensionMismatch {
                    expected,
                    got: v.len(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct FlakyProvider {
        failures_left: Mutex<u32>,
    }

    impl ChatProvider for FlakyProvider {
        fn call_once(&self, _exchange: &ChatExchange) -> Result<ChatResponse, CallError> {
            let mut left = self.failures_left.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(CallError::Transient("connection reset".into()));
            }
            Ok(ChatResponse {
                response_text: "ok".into(),
                provider_tag: "flaky".into(),
            })
        }

        fn provider_tag(&self) -> String {
            "flaky".into()
        }
    }

    #[test]
    fn retries_transient_failures_within_budget() {
        let provider = FlakyProvider {
            failures_left: Mutex::new(2),
        };
        let exchange = ChatExchange::new("s", "u");
        let out = complete_chat(&provider, &exchange, RetryPolicy::no_wait(3)).unwrap();
        assert_eq!(out.response_text, "ok");
    }

    #[test]
    fn zero_budget_fails_on_first_error() {
        let provider = FlakyProvider {
            failures_left: Mutex::new(1),
        };
        let exchange = ChatExchange::new("s", "u");
        let err = complete_chat(&provider, &exchange, RetryPolicy::no_wait(0)).unwrap_err();
        assert!(matches!(
            err,
            GatewayError::ProviderUnavailable { attempts: 1, .. }
        ));
    }

    #[test]
    fn budget_exhaustion_reports_attempts() {
        let provider = FlakyProvider {
            failures_left: Mutex::new(10),
        };
        let exchange = ChatExchange::new("s", "u");
        let err = complete_chat(&provider, &exchange, RetryPolicy::no_wait(2)).unwrap_err();
        assert!(matches!(
            err,
            GatewayError::ProviderUnavailable { attempts: 3, .. }
        ));
    }
}
