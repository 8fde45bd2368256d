//! On-disk embedding cache keyed by content hash.
//!
//! Base embeddings are computed once per distinct text; refreshes during
//! adapter training re-apply only the adapter. The cache is an append-only
//! JSONL log per provider tag, so interrupted runs lose at most the final
//! partially-written line.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, GatewayError};
use crate::hash::fnv1a_parts;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    k: String,
    v: Vec<f64>,
}

pub struct EmbeddingCache<'a> {
    inner: &'a dyn EmbeddingProvider,
    path: PathBuf,
    entries: Mutex<HashMap<String, Vec<f64>>>,
}

impl<'a> EmbeddingCache<'a> {
    pub fn open(dir: &Path, inner: &'a dyn EmbeddingProvider) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let file_stem: String = inner
            .provider_tag()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let path = dir.join(format!("{file_stem}.jsonl"));
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            for line in text.lines() {
                // A torn final line from a crash is simply recomputed.
                if let Ok(parsed) = serde_json::from_str::<CacheLine>(line) {
                    entries.insert(parsed.k, parsed.v);
                }
            }
        }
        Ok(EmbeddingCache {
            inner,
            path,
            entries: Mutex::new(entries),
        })
    }

    fn key(text: &str) -> String {
        format!("{:016x}-{}", fnv1a_parts(&[text]), text.len())
    }
}

impl EmbeddingProvider for EmbeddingCache<'_> {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyBatch);
        }
        let keys: Vec<String> = texts.iter().map(|t| Self::key(t)).collect();
        let mut misses: Vec<usize> = Vec::new();
        {
            let entries = self.entries.lock().unwrap();
            for (i, key) in keys.iter().enumerate() {
                if !entries.contains_key(key) {
                    misses.push(i);
                }
            }
        }
        if !misses.is_empty() {
            // Deduplicate repeated texts within one batch before fanning out.
            let mut unique: Vec<String> = Vec::new();
            for &i in &misses {
                if !unique.contains(&texts[i]) {
                    unique.push(texts[i].clone());
                }
            }
            let fresh = self.inner.embed_texts(&unique)?;
            let mut entries = self.entries.lock().unwrap();
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| GatewayError::ProviderUnavailable {
                    attempts: 1,
                    last_error: format!("embedding cache write: {e}"),
                })?;
            for (text, vector) in unique.iter().zip(fresh) {
                let key = Self::key(text);
                let line = serde_json::to_string(&CacheLine {
                    k: key.clone(),
                    v: vector.clone(),
                })
                .expect("cache line serializes");
                writeln!(file, "{line}").map_err(|e| GatewayError::ProviderUnavailable {
                    attempts: 1,
                    last_error: format!("embedding cache write: {e}"),
                })?;
                entries.insert(key, vector);
            }
        }
        let entries = self.entries.lock().unwrap();
        Ok(keys
            .iter()
            .map(|key| entries.get(key).cloned().expect("filled above"))
            .collect())
    }

    fn provider_tag(&self) -> String {
        self.inner.provider_tag()
    }
}
