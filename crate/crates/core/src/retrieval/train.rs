//! Adapter training: AdamW on the margin ranking loss with hard negatives
//! re-mined from a frozen index every `refresh_interval` steps.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adapter::AdapterParameters;
use super::index::{IndexEntry, VectorIndex};
use super::loss::{loss_and_grad, PairSample};
use super::RetrievalError;
use crate::extract::TrainingPair;
use crate::gateway::{check_dimensions, EmbeddingProvider, GatewayError};
use crate::model::{serialize_logic_text, ThoughtMode};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub margin: f64,
    pub negatives_per_sample: usize,
    /// Rebuild the mining index every this many optimizer steps.
    pub refresh_interval: u64,
    pub learning_rate: f64,
    pub max_steps: u64,
    pub epochs: u64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub batch_size: usize,
    pub checkpoint_interval: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
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
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: u64,
    pub loss: f64,
    pub val_recall_at1: f64,
    pub val_recall_at5: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub params: AdapterParameters,
    pub selected_step: u64,
    pub selected_val_recall_at5: f64,
    pub log: Vec<TrainLogEntry>,
}

/// Nearest non-positive mode ids under the current index, padded with
/// uniformly random non-positive ids only when the retrieved pool is too
/// small. Never returns duplicates or the positive itself.
pub fn mine_hard_negatives(
    query_vector: &[f64],
    positive_id: &str,
    index: &VectorIndex,
    k_neg: usize,
    rng: &mut impl Rng,
) -> Result<Vec<String>, RetrievalError> {
    let non_positive = index
        .entries
        .iter()
        .filter(|e| e.mode_id != positive_id)
        .count();
    if non_positive == 0 {
        return Err(RetrievalError::BankTooSmall);
    }
    let retrieved = index.search_top_m(query_vector, k_neg, Some(positive_id))?;
    let mut negatives: Vec<String> = retrieved.into_iter().map(|(id, _)| id).collect();
    if negatives.len() < k_neg {
        let selected: HashSet<&str> = negatives.iter().map(String::as_str).collect();
        let mut pool: Vec<&str> = index
            .entries
            .iter()
            .map(|e| e.mode_id.as_str())
            .filter(|id| *id != positive_id && !selected.contains(id))
            .collect();
        pool.shuffle(rng);
        for id in pool.into_iter().take(k_neg - negatives.len()) {
            negatives.push(id.to_string());
        }
    }
    Ok(negatives)
}

/// Frozen mining snapshot: the adapter and index as of the last refresh.
/// Between refreshes, identical pairs mine identical negative sets.
pub struct MiningState {
    matrix: AdapterParameters,
    index: VectorIndex,
}

impl MiningState {
    pub fn refresh(params: &AdapterParameters, modes: &[(String, Vec<f64>)]) -> Self {
        let entries = modes
            .iter()
            .map(|(id, base)| IndexEntry {
                mode_id: id.clone(),
                vector: params.apply(base),
            })
            .collect();
        MiningState {
            matrix: params.clone(),
            index: VectorIndex::new(entries),
        }
    }

    pub fn mine(
        &self,
        query_base: &[f64],
        positive_id: &str,
        k_neg: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<String>, RetrievalError> {
        let query = self.matrix.apply(query_base);
        mine_hard_negatives(&query, positive_id, &self.index, k_neg, rng)
    }
}

/// An evaluation pair in base-embedding space.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub query_base: Vec<f64>,
    pub positive_id: String,
}

fn recall_at_ks(
    params: &AdapterParameters,
    pairs: &[EvalPair],
    modes: &[(String, Vec<f64>)],
    ks: &[usize],
) -> Vec<f64> {
    if pairs.is_empty() {
        return vec![0.0; ks.len()];
    }
    let index = VectorIndex::new(
        modes
            .iter()
            .map(|(id, base)| IndexEntry {
                mode_id: id.clone(),
                vector: params.apply(base),
            })
            .collect(),
    );
    let max_k = ks.iter().copied().max().unwrap_or(1);
    let mut hits = vec![0usize; ks.len()];
    for pair in pairs {
        let query = params.apply(&pair.query_base);
        let top = index
            .search_top_m(&query, max_k, None)
            .unwrap_or_default();
        for (ki, &k) in ks.iter().enumerate() {
            if top.iter().take(k).any(|(id, _)| *id == pair.positive_id) {
                hits[ki] += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / pairs.len() as f64).collect()
}

/// Fraction of pairs whose positive appears in the top-k results under
/// the given adapter.
pub fn evaluate_recall(
    params: &AdapterParameters,
    pairs: &[EvalPair],
    modes: &[(String, Vec<f64>)],
    k: usize,
) -> f64 {
    recall_at_ks(params, pairs, modes, &[k])[0]
}

/// Split pair indices 80/20 by source id (deterministic in the seed).
fn split_by_source(
    pairs: &[TrainingPair],
    val_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<&str> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for pair in pairs {
        if seen.insert(&pair.source_problem_id) {
            ids.push(&pair.source_problem_id);
        }
    }
    if ids.len() < 2 {
        let all: Vec<usize> = (0..pairs.len()).collect();
        return (all.clone(), all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f3759df);
    ids.shuffle(&mut rng);
    let val_count = ((ids.len() as f64 * val_fraction).round() as usize).clamp(1, ids.len() - 1);
    let val_ids: HashSet<&str> = ids[..val_count].iter().copied().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        if val_ids.contains(pair.source_problem_id.as_str()) {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    (train, val)
}

/// Train the adapter on (query, positive-mode) pairs against the bank.
///
/// Checkpoints are taken every `checkpoint_interval` steps plus at the
/// final step; the returned adapter is the checkpoint with the best
/// validation recall@5, ties resolved to the earliest step.
pub fn train_adapter(
    pairs: &[TrainingPair],
    bank: &[ThoughtMode],
    embedder: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
) -> Result<TrainOutput, RetrievalError> {
    if pairs.is_empty() {
        return Err(RetrievalError::NoPairs);
    }
    let mode_ids: HashSet<&str> = bank.iter().map(|m| m.id.as_str()).collect();
    for pair in pairs {
        if !mode_ids.contains(pair.positive_id.as_str()) {
            return Err(RetrievalError::MissingPositive(pair.positive_id.clone()));
        }
    }

    // Base embeddings, computed once per distinct text.
    let mode_texts: Vec<String> = bank.iter().map(serialize_logic_text).collect();
    let mode_vectors = embedder.embed_texts(&mode_texts)?;
    check_dimensions(&mode_vectors)?;
    let modes: Vec<(String, Vec<f64>)> = bank
        .iter()
        .map(|m| m.id.clone())
        .zip(mode_vectors)
        .collect();

    let mut distinct_queries: Vec<String> = Vec::new();
    let mut query_slot: HashMap<&str, usize> = HashMap::new();
    for pair in pairs {
        if !query_slot.contains_key(pair.query_text.as_str()) {
            query_slot.insert(&pair.query_text, distinct_queries.len());
            distinct_queries.push(pair.query_text.clone());
        }
    }
    let query_vectors = embedder.embed_texts(&distinct_queries)?;
    check_dimensions(&query_vectors)?;
    let dim = modes
        .first()
        .map(|(_, v)| v.len())
        .ok_or(RetrievalError::BankTooSmall)?;
    if let Some(v) = query_vectors.first() {
        if v.len() != dim {
            return Err(RetrievalError::Gateway(GatewayError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            }));
        }
    }
    let query_base =
        |pair: &TrainingPair| -> &Vec<f64> { &query_vectors[query_slot[pair.query_text.as_str()]] };

    let (train_idx, val_idx) = split_by_source(pairs, cfg.val_fraction, cfg.seed);
    let val_pairs: Vec<EvalPair> = val_idx
        .iter()
        .map(|&i| EvalPair {
            query_base: query_base(&pairs[i]).clone(),
            positive_id: pairs[i].positive_id.clone(),
        })
        .collect();

    let mut params = AdapterParameters::identity(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mining = MiningState::refresh(&params, &modes);
    let mut log: Vec<TrainLogEntry> = Vec::new();
    let mut checkpoints: Vec<(u64, Vec<f64>, f64)> = Vec::new();

    let (beta1, beta2, adam_eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step: u64 = 0;

    'epochs: for _ in 0..cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            if step >= cfg.max_steps {
                break 'epochs;
            }
            if step > 0 && step.is_multiple_of(cfg.refresh_interval) && params.step != mining.matrix.step {
                mining = MiningState::refresh(&params, &modes);
            }

            let mut owned: Vec<(usize, Vec<String>)> = Vec::with_capacity(chunk.len());
            for &pi in chunk {
                let negatives = mining.mine(
                    query_base(&pairs[pi]),
                    &pairs[pi].positive_id,
                    cfg.negatives_per_sample,
                    &mut rng,
                )?;
                owned.push((pi, negatives));
            }
            let mode_lookup: HashMap<&str, &Vec<f64>> =
                modes.iter().map(|(id, v)| (id.as_str(), v)).collect();
            let batch: Vec<PairSample<'_>> = owned
                .iter()
                .map(|(pi, negatives)| PairSample {
                    query: query_base(&pairs[*pi]),
                    positive: mode_lookup[pairs[*pi].positive_id.as_str()],
                    negatives: negatives
                        .iter()
                        .map(|id| mode_lookup[id.as_str()].as_slice())
                        .collect(),
                })
                .collect();

            let (loss, grad) = loss_and_grad(&params.matrix, dim, &batch, cfg.margin);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(RetrievalError::NonFiniteLoss { step });
            }

            let t = step + 1;
            let warm = if cfg.warmup_steps > 0 {
                (t as f64 / cfg.warmup_steps as f64).min(1.0)
            } else {
                1.0
            };
            let lr = cfg.learning_rate * warm;
            let bc1 = 1.0 - beta1.powi(t as i32);
            let bc2 = 1.0 - beta2.powi(t as i32);
            for ((g, m1), (m2, w)) in grad
                .iter()
                .zip(params.moment1.iter_mut())
                .zip(params.moment2.iter_mut().zip(params.matrix.iter_mut()))
            {
                *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                let m_hat = *m1 / bc1;
                let v_hat = *m2 / bc2;
                *w -= lr * (m_hat / (v_hat.sqrt() + adam_eps));
                *w -= lr * cfg.weight_decay * *w;
            }
            step = t;
            params.step = step;
            if !params.is_finite() {
                return Err(RetrievalError::NonFiniteLoss { step });
            }

            let recalls = recall_at_ks(&params, &val_pairs, &modes, &[1, 5]);
            log.push(TrainLogEntry {
                step,
                loss,
                val_recall_at1: recalls[0],
                val_recall_at5: recalls[1],
            });
            if step.is_multiple_of(cfg.checkpoint_interval) {
                checkpoints.push((step, params.matrix.clone(), recalls[1]));
            }
        }
    }

    if checkpoints.last().map(|(s, _, _)| *s) != Some(step) {
        let recalls = recall_at_ks(&params, &val_pairs, &modes, &[5]);
        checkpoints.push((step, params.matrix.clone(), recalls[0]));
    }

    let mut best = 0usize;
    for (i, candidate) in checkpoints.iter().enumerate() {
        if candidate.2 > checkpoints[best].2 {
            best = i;
        }
    }
    let (selected_step, matrix, selected_val) = checkpoints.swap_remove(best);
    let selected = AdapterParameters {
        dim,
        matrix,
        moment1: vec![0.0; dim * dim],
        moment2: vec![0.0; dim * dim],
        step: selected_step,
    };
    Ok(TrainOutput {
        params: selected,
        selected_step,
        selected_val_recall_at5: selected_val,
        log,
    })
}
