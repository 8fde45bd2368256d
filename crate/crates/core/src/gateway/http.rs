//! Live providers speaking the OpenAI-compatible wire format.
//!
//! Live mode is opt-in; the mock providers are the default everywhere in
//! tests. A bounded in-flight limit throttles concurrent calls against
//! the endpoint.

use std::sync::{Arc, Condvar, Mutex};

use serde_json::{json, Value};

use super::{
    check_dimensions, CallError, ChatExchange, ChatProvider, ChatResponse, EmbeddingProvider,
    GatewayError,
};

/// Endpoint base URL, credential, and shared in-flight limiter.
#[derive(Clone)]
pub struct ProviderEndpoint {
    pub base_url: String,
    pub api_key: String,
    limiter: Arc<InFlightLimit>,
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, in_flight: usize) -> Self {
        ProviderEndpoint {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            limiter: Arc::new(InFlightLimit::new(in_flight.max(1))),
        }
    }
}

struct InFlightLimit {
    permits: Mutex<usize>,
    released: Condvar,
}

impl InFlightLimit {
    fn new(permits: usize) -> Self {
        InFlightLimit {
            permits: Mutex::new(permits),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.released.wait(permits).unwrap();
        }
        *permits -= 1;
        InFlightGuard { limit: self }
    }
}

struct InFlightGuard<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.limit.permits.lock().unwrap() += 1;
        self.limit.released.notify_one();
    }
}

fn classify(err: ureq::Error) -> CallError {
    match err {
        ureq::Error::Status(429, _) => CallError::Transient("HTTP 429".into()),
        ureq::Error::Status(code, _) if code >= 500 => {
            CallError::Transient(format!("HTTP {code}"))
        }
        ureq::Error::Status(401, _) | ureq::Error::Status(403, _) => {
            CallError::Fatal(GatewayError::CredentialMissing(
                "endpoint rejected the API key".into(),
            ))
        }
        ureq::Error::Status(code, response) => {
            let body = response.into_string().unwrap_or_default();
            CallError::Fatal(GatewayError::ProviderUnavailable {
                attempts: 1,
                last_error: format!("HTTP {code}: {body}"),
            })
        }
        ureq::Error::Transport(t) => CallError::Transient(t.to_string()),
    }
}

fn post(endpoint: &ProviderEndpoint, path: &str, body: Value) -> Result<Value, CallError> {
    let _guard = endpoint.limiter.acquire();
    let response = ureq::post(&format!("{}{}", endpoint.base_url, path))
        .set("Authorization", &format!("Bearer {}", endpoint.api_key))
        .set("Content-Type", "application/json")
        .send_json(body)
        .map_err(classify)?;
    response
        .into_json::<Value>()
        .map_err(|e| CallError::Transient(format!("bad response body: {e}")))
}

pub struct HttpChatProvider {
    endpoint: ProviderEndpoint,
    model: String,
}

impl HttpChatProvider {
    pub fn new(endpoint: ProviderEndpoint, model: impl Into<String>) -> Self {
        HttpChatProvider {
            endpoint,
            model: model.into(),
        }
    }
}

impl ChatProvider for HttpChatProvider {
    fn call_once(&self, exchange: &ChatExchange) -> Result<ChatResponse, CallError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": exchange.system_text},
                {"role": "user", "content": exchange.user_text},
            ],
            "temperature": exchange.temperature,
            "max_tokens": exchange.max_tokens,
        });
        let value = post(&self.endpoint, "/chat/completions", body)?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| CallError::Transient("response missing message content".into()))?
            .to_string();
        Ok(ChatResponse {
            response_text: text,
            provider_tag: self.provider_tag(),
        })
    }

    fn provider_tag(&self) -> String {
        format!("openai-compat:{}", self.model)
    }
}

pub struct HttpEmbeddingProvider {
    endpoint: ProviderEndpoint,
    model: String,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: ProviderEndpoint, model: impl Into<String>) -> Self {
        HttpEmbeddingProvider {
            endpoint,
            model: model.into(),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyBatch);
        }
        let body = json!({"model": self.model, "input": texts});
        let value = post(&self.endpoint, "/embeddings", body).map_err(|e| match e {
            CallError::Fatal(err) => err,
            CallError::Transient(msg) => GatewayError::ProviderUnavailable {
                attempts: 1,
                last_error: msg,
            },
        })?;
        let data = value["data"]
            .as_array()
            .cloned()
            .ok_or_else(|| GatewayError::ProviderUnavailable {
                attempts: 1,
                last_error: "embeddings response missing data".into(),
            })?;
        let mut indexed: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (fallback_index, entry) in data.iter().enumerate() {
            let index = entry["index"].as_u64().map(|i| i as usize).unwrap_or(fallback_index);
            let vector = entry["embedding"]
                .as_array()
                .map(|xs| xs.iter().filter_map(Value::as_f64).collect::<Vec<f64>>())
                .unwrap_or_default();
            indexed.push((index, vector));
        }
        indexed.sort_by_key(|(i, _)| *i);
        let vectors: Vec<Vec<f64>> = indexed.into_iter().map(|(_, v)| v).collect();
        if vectors.len() != texts.len() {
            return Err(GatewayError::CountMismatch {
                expected: texts.len(),
                got: vectors.len(),
            });
        }
        check_dimensions(&vectors)?;
        Ok(vectors)
    }

    fn provider_tag(&self) -> String {
        format!("openai-compat-embed:{}", self.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_trims_trailing_slash() {
        let endpoint = ProviderEndpoint::new("http://localhost:9/v1/", "k", 8);
        assert_eq!(endpoint.base_url, "http://localhost:9/v1");
    }

    #[test]
    fn in_flight_limit_round_trips_permits() {
        let limit = InFlightLimit::new(2);
        let a = limit.acquire();
        let b = limit.acquire();
        drop(a);
        let c = limit.acquire();
        drop(b);
        drop(c);
        assert_eq!(*limit.permits.lock().unwrap(), 2);
    }
}
