//! Stage orchestration: resume-safe execution of each pipeline stage,
//! stage summaries, and parameter sweeps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::extract::{
    build_bank, extract_chain, ChatOptions, ExtractError, ExtractionConfig, TrainingPair,
};
use crate::gateway::{
    ChatProvider, EmbeddingCache, EmbeddingProvider, GatewayError, HttpChatProvider,
    HttpEmbeddingProvider, MockChatProvider, MockEmbeddingProvider, ProviderEndpoint, RetryPolicy,
};
use crate::hash::derive_seed;
use crate::model::{
    append_jsonl, read_jsonl, read_jsonl_or_empty, serialize_logic_text, write_jsonl, ChainRecord,
    GenerationRecord, JsonlError, RolloutBundle, ThoughtMode,
};
use crate::retrieval::{
    train_adapter, AdapterParameters, IndexEntry, RetrievalError, TrainConfig, VectorIndex,
};
use crate::rollout::{
    convert_sft, export_hard_items, filter_provenance, pipeline_stats, rollout_question,
    ProvenanceFilter, RolloutConfig, RolloutError, StagePaths,
};
use crate::synthesis::{
    coverage_report, fit_kmeans, synthesize_chain, ClusterModel, DistributionTracker,
    SelectorConfig, SynthesisContext, SynthesisError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    TrainRetriever,
    Synthesize,
    Rollout,
    Convert,
    Report,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::TrainRetriever => "train-retriever",
            Stage::Synthesize => "synthesize",
            Stage::Rollout => "rollout",
            Stage::Convert => "convert",
            Stage::Report => "report",
        }
    }
}

/// Locations of every artifact under the data directory.
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub sources: PathBuf,
    pub chains: PathBuf,
    pub bank: PathBuf,
    pub pairs: PathBuf,
    pub adapter: PathBuf,
    pub train_log: PathBuf,
    pub clusters: PathBuf,
    pub tracker: PathBuf,
    pub generated: PathBuf,
    pub rollouts: PathBuf,
    pub filtered: PathBuf,
    pub sft: PathBuf,
    pub hard: PathBuf,
    pub removal_report: PathBuf,
    pub report_text: PathBuf,
    pub report_json: PathBuf,
    pub coverage_text: PathBuf,
    pub coverage_json: PathBuf,
    pub summaries: PathBuf,
    pub cache_dir: PathBuf,
}

impl ArtifactPaths {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let d = &cfg.data_dir;
        ArtifactPaths {
            sources: cfg.sources_path(),
            chains: d.join("chains.jsonl"),
            bank: d.join("bank.jsonl"),
            pairs: d.join("pairs.jsonl"),
            adapter: d.join("adapter.json"),
            train_log: d.join("train_log.jsonl"),
            clusters: d.join("clusters.json"),
            tracker: d.join("tracker.json"),
            generated: d.join("generated.jsonl"),
            rollouts: d.join("rollouts.jsonl"),
            filtered: d.join("filtered.jsonl"),
            sft: d.join("sft.jsonl"),
            hard: d.join("hard.jsonl"),
            removal_report: d.join("removal_report.txt"),
            report_text: d.join("report.txt"),
            report_json: d.join("report.json"),
            coverage_text: d.join("coverage.txt"),
            coverage_json: d.join("coverage.json"),
            summaries: d.join("summaries"),
            cache_dir: d.join("embedding_cache"),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub timestamp_unix: u64,
    pub config_hash: String,
    pub counts: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    pub resolved_config: Value,
}

impl StageSummary {
    fn new(stage: Stage, cfg: &PipelineConfig) -> Self {
        StageSummary {
            stage: stage.name().to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config_hash: cfg.config_hash(),
            counts: BTreeMap::new(),
            notes: Vec::new(),
            resolved_config: cfg.redacted_json(),
        }
    }

    fn count(&mut self, key: &str, value: impl Into<Value>) {
        self.counts.insert(key.to_string(), value.into());
    }

    pub fn one_line(&self) -> String {
        let mut parts: Vec<String> = vec![format!("{}:", self.stage)];
        for (key, value) in &self.counts {
            parts.push(format!("{key}={value}"));
        }
        parts.join(" ")
    }

    fn write(&self, paths: &ArtifactPaths) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&paths.summaries).map_err(|e| PipelineError::Io(e.to_string()))?;
        let body = serde_json::to_string_pretty(self).map_err(|e| PipelineError::Io(e.to_string()))?;
        let file = paths.summaries.join(format!("{}.summary.json", self.stage));
        std::fs::write(file, body).map_err(|e| PipelineError::Io(e.to_string()))
    }
}

/// Providers for one run: chat, judge, and the two embedding models.
pub struct Providers {
    pub chat: Arc<dyn ChatProvider>,
    pub judge: Arc<dyn ChatProvider>,
    pub retriever_base: Arc<dyn EmbeddingProvider>,
    pub selector: Arc<dyn EmbeddingProvider>,
}

pub fn build_providers(cfg: &PipelineConfig) -> Result<Providers, PipelineError> {
    if cfg.mock {
        return Ok(Providers {
            chat: Arc::new(MockChatProvider::with_synthetic(format!(
                "mock:{}",
                cfg.chat_model
            ))),
            judge: Arc::new(MockChatProvider::with_synthetic(format!(
                "mock-judge:{}",
                cfg.judge_model
            ))),
            retriever_base: Arc::new(MockEmbeddingProvider::new(
                cfg.mock_embedding_dim,
                format!("retriever-base:{}", cfg.retriever_embedding_model),
            )),
            selector: Arc::new(MockEmbeddingProvider::new(
                cfg.mock_embedding_dim,
                format!("selector:{}", cfg.selector_embedding_model),
            )),
        });
    }
    let endpoint_url = cfg.endpoint.clone().ok_or_else(|| {
        PipelineError::Gateway(GatewayError::CredentialMissing(
            "endpoint not configured (set `endpoint` or use --mock)".into(),
        ))
    })?;
    let api_key = cfg.api_key.clone().ok_or_else(|| {
        PipelineError::Gateway(GatewayError::CredentialMissing(
            "api_key not configured (set `api_key` or use --mock)".into(),
        ))
    })?;
    let endpoint = ProviderEndpoint::new(endpoint_url, api_key, cfg.in_flight_limit);
    Ok(Providers {
        chat: Arc::new(HttpChatProvider::new(endpoint.clone(), cfg.chat_model.clone())),
        judge: Arc::new(HttpChatProvider::new(endpoint.clone(), cfg.judge_model.clone())),
        retriever_base: Arc::new(HttpEmbeddingProvider::new(
            endpoint.clone(),
            cfg.retriever_embedding_model.clone(),
        )),
        selector: Arc::new(HttpEmbeddingProvider::new(
            endpoint,
            cfg.selector_embedding_model.clone(),
        )),
    })
}

fn chat_options(cfg: &PipelineConfig) -> ChatOptions {
    ChatOptions {
        temperature: cfg.chat_temperature,
        max_tokens: cfg.max_tokens,
        retry: RetryPolicy {
            retry_budget: cfg.retry_budget,
            base_delay: Duration::from_millis(cfg.retry_base_ms),
        },
    }
}

/// Map items across a bounded worker pool, preserving input order in the
/// result. Results are independent, so any interleaving is fine.
fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageSummary, PipelineError> {
    let paths = ArtifactPaths::new(cfg);
    std::fs::create_dir_all(&cfg.data_dir).map_err(|e| PipelineError::Io(e.to_string()))?;
    let summary = match stage {
        Stage::Extract => extract_stage(cfg, &paths)?,
        Stage::TrainRetriever => train_stage(cfg, &paths)?,
        Stage::Synthesize => synthesize_stage(cfg, &paths)?,
        Stage::Rollout => rollout_stage(cfg, &paths)?,
        Stage::Convert => convert_stage(cfg, &paths)?,
        Stage::Report => report_stage(cfg, &paths)?,
    };
    summary.write(&paths)?;
    Ok(summary)
}

fn require(path: &Path, what: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput(format!(
            "{what} ({})",
            path.display()
        )))
    }
}

fn extract_stage(
    cfg: &PipelineConfig,
    paths: &ArtifactPaths,
) -> Result<StageSummary, PipelineError> {
    require(&paths.sources, "source bundles")?;
    let sources: Vec<RolloutBundle> = read_jsonl(&paths.sources)?;
    let existing: Vec<ChainRecord> = read_jsonl_or_empty(&paths.chains)?;
    let existing_keys: HashSet<String> =
        existing.iter().map(|c| c.source_problem_id.clone()).collect();

    let providers = build_providers(cfg)?;
    let opts = chat_options(cfg);
    let extraction = ExtractionConfig {
        window_length: cfg.window_length,
        max_chain_steps: cfg.max_chain_steps,
    };

    let todo: Vec<&RolloutBundle> = sources
        .iter()
        .filter(|s| !existing_keys.contains(&s.question_id))
        .collect();
    let skipped_resume = sources.len() - todo.len();

    let chat = providers.chat.clone();
    let results: Vec<Result<ChainRecord, ExtractError>> =
        parallel_map(&todo, cfg.workers, |source| {
            extract_chain(chat.as_ref(), &opts, source, &extraction)
        });

    // Persist the clean prefix before surfacing any provider failure so
    // a resumed run continues where this one stopped.
    let fatal_at = results.iter().position(|r| {
        matches!(r, Err(ExtractError::Gateway(_)))
    });
    let keep = fatal_at.unwrap_or(results.len());
    let mut new_chains: Vec<ChainRecord> = Vec::new();
    let mut skip_reasons: BTreeMap<String, u64> = BTreeMap::new();
    for result in results.into_iter().take(keep) {
        match result {
            Ok(chain) => new_chains.push(chain),
            Err(ExtractError::Skip(reason)) => {
                let key = reason.split(':').next().unwrap_or("other").to_string();
                *skip_reasons.entry(key).or_insert(0) += 1;
            }
            Err(other) => {
                *skip_reasons.entry(format!("error: {other}")).or_insert(0) += 1;
            }
        }
    }
    append_jsonl(&paths.chains, &new_chains)?;

    // The bank and pairs are full rewrites over all chains, so reruns
    // stay byte-identical.
    let all_chains: Vec<ChainRecord> = read_jsonl(&paths.chains)?;
    let build = build_bank(&all_chains);
    write_jsonl(&paths.bank, &build.bank)?;
    write_jsonl(&paths.pairs, &build.pairs)?;

    let mut summary = StageSummary::new(Stage::Extract, cfg);
    summary.count("sources", sources.len());
    summary.count("new_chains", new_chains.len());
    summary.count("skipped", skipped_resume);
    summary.count("bank_modes", build.bank.len());
    summary.count("training_pairs", build.pairs.len());
    summary.count("mean_chain_len", build.mean_chain_len);
    for (reason, count) in skip_reasons {
        summary.count(&format!("skip[{reason}]"), count);
    }

    if let Some(at) = fatal_at {
        summary.notes.push(format!(
            "provider failure at source index {at}; run `extract` again to resume"
        ));
        summary.write(paths)?;
        return Err(PipelineError::Gateway(GatewayError::ProviderUnavailable {
            attempts: cfg.retry_budget + 1,
            last_error: "extraction interrupted by provider failure".into(),
        }));
    }
    Ok(summary)
}

fn train_stage(cfg: &PipelineConfig, paths: &ArtifactPaths) -> Result<StageSummary, PipelineError> {
    let mut summary = StageSummary::new(Stage::TrainRetriever, cfg);
    if paths.adapter.exists() {
        summary.count("skipped", 1u64);
        summary
            .notes
            .push("adapter checkpoint already present; delete it to retrain".into());
        return Ok(summary);
    }
    require(&paths.bank, "thought-mode bank")?;
    require(&paths.pairs, "training pairs")?;
    let bank: Vec<ThoughtMode> = read_jsonl(&paths.bank)?;
    let pairs: Vec<TrainingPair> = read_jsonl(&paths.pairs)?;

    let providers = build_providers(cfg)?;
    let cache = EmbeddingCache::open(&paths.cache_dir, providers.retriever_base.as_ref())
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let train_cfg = TrainConfig {
        margin: cfg.margin,
        negatives_per_sample: cfg.negatives_per_sample,
        refresh_interval: cfg.refresh_interval,
        learning_rate: cfg.learning_rate,
        max_steps: cfg.max_steps,
        epochs: cfg.epochs,
        warmup_steps: cfg.warmup_steps,
        weight_decay: cfg.weight_decay,
        val_fraction: cfg.val_fraction,
        batch_size: cfg.batch_size,
        checkpoint_interval: cfg.checkpoint_interval,
        seed: cfg.seed,
    };
    let out = train_adapter(&pairs, &bank, &cache, &train_cfg)?;
    out.params.save(&paths.adapter)?;
    write_jsonl(&paths.train_log, &out.log)?;

    summary.count("pairs", pairs.len());
    summary.count("bank_modes", bank.len());
    summary.count("steps", out.log.len());
    summary.count("selected_step", out.selected_step);
    summary.count("selected_val_recall_at5", out.selected_val_recall_at5);
    if let Some(last) = out.log.last() {
        summary.count("final_val_recall_at1", last.val_recall_at1);
    }
    Ok(summary)
}

fn synthesize_stage(
    cfg: &PipelineConfig,
    paths: &ArtifactPaths,
) -> Result<StageSummary, PipelineError> {
    require(&paths.bank, "thought-mode bank")?;
    require(&paths.chains, "chains (seed source)")?;
    require(&paths.adapter, "adapter checkpoint")?;
    let bank: Vec<ThoughtMode> = read_jsonl(&paths.bank)?;
    if bank.is_empty() {
        return Err(PipelineError::MissingInput("bank is empty".into()));
    }
    let chains: Vec<ChainRecord> = read_jsonl(&paths.chains)?;
    let adapter = AdapterParameters::load(&paths.adapter)?;

    let providers = build_providers(cfg)?;
    let base_cache = EmbeddingCache::open(&paths.cache_dir, providers.retriever_base.as_ref())
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let selector_cache = EmbeddingCache::open(&paths.cache_dir, providers.selector.as_ref())
        .map_err(|e| PipelineError::Io(e.to_string()))?;

    let logic_texts: Vec<String> = bank.iter().map(serialize_logic_text).collect();

    // Cluster model over selector embeddings of the bank. K is clamped
    // to the bank size so tiny runs still cluster.
    let effective_k = cfg.clusters.min(bank.len());
    let clusters = if paths.clusters.exists() {
        let model = ClusterModel::load(&paths.clusters)?;
        if model.k != effective_k || model.assignment.len() != bank.len() {
            return Err(PipelineError::MissingInput(format!(
                "clusters.json does not match the bank (k={} modes={}); delete it to refit",
                model.k,
                model.assignment.len()
            )));
        }
        model
    } else {
        let vectors = selector_cache.embed_texts(&logic_texts)?;
        let items: Vec<(String, Vec<f64>)> = bank
            .iter()
            .map(|m| m.id.clone())
            .zip(vectors)
            .collect();
        let model = fit_kmeans(&items, effective_k, cfg.seed)?;
        model.save(&paths.clusters)?;
        model
    };

    let mut tracker = DistributionTracker::load_or_new(
        &paths.tracker,
        clusters.reference_counts(),
        cfg.epsilon,
    )?;

    // Retriever index: adapter-encoded base embeddings of the bank.
    let base_vectors = base_cache.embed_texts(&logic_texts)?;
    let index = VectorIndex::new(
        bank.iter()
            .zip(&base_vectors)
            .map(|(m, v)| IndexEntry {
                mode_id: m.id.clone(),
                vector: adapter.apply(v),
            })
            .collect(),
    );

    let bank_map: HashMap<String, ThoughtMode> =
        bank.iter().map(|m| (m.id.clone(), m.clone())).collect();
    let selector_cfg = SelectorConfig {
        alpha: cfg.alpha,
        tau: cfg.tau,
        top_m: cfg.top_m,
        evolution_steps: cfg.evolution_steps,
        cluster_min_similarity: cfg.cluster_min_similarity,
    };
    let opts = chat_options(cfg);
    let ctx = SynthesisContext {
        bank: &bank_map,
        clusters: &clusters,
        retriever_index: &index,
        adapter: &adapter,
        base_embedder: &base_cache,
        selector_embedder: &selector_cache,
        chat: providers.chat.as_ref(),
        chat_opts: &opts,
        cfg: &selector_cfg,
        tracker_path: Some(&paths.tracker),
    };

    let existing: Vec<GenerationRecord> = read_jsonl_or_empty(&paths.generated)?;
    let existing_keys: HashSet<String> =
        existing.iter().map(|r| r.seed_problem_id.clone()).collect();

    let mut summary = StageSummary::new(Stage::Synthesize, cfg);
    let mut new_records = 0u64;
    let mut skipped = 0u64;
    let mut steps_total = 0u64;
    let mut steps_compatible = 0u64;
    let mut fallbacks = 0u64;
    let mut terminations = 0u64;
    let mut parse_rejections = 0u64;
    let mut duplicate_seeds: HashSet<String> = HashSet::new();

    // Seeds are processed sequentially: the tracker is shared state and
    // every selection must see the counts left by the one before it.
    for chain in &chains {
        if !duplicate_seeds.insert(chain.source_problem_id.clone()) {
            continue;
        }
        if existing_keys.contains(&chain.source_problem_id) {
            skipped += 1;
            continue;
        }
        let rng_seed = derive_seed(cfg.seed, &chain.source_problem_id);
        match synthesize_chain(
            &ctx,
            &mut tracker,
            &chain.source_problem_id,
            &chain.source_dataset_id,
            &chain.seed,
            rng_seed,
        ) {
            Ok(outcome) => {
                steps_total += outcome.record.steps.len() as u64;
                steps_compatible +=
                    outcome.record.steps.iter().filter(|s| s.is_compatible).count() as u64;
                if outcome.record.fallback_used {
                    fallbacks += 1;
                } else if outcome.record.steps.iter().any(|s| !s.is_compatible) {
                    terminations += 1;
                }
                parse_rejections += outcome.parse_rejections as u64;
                append_jsonl(&paths.generated, &[outcome.record])?;
                new_records += 1;
            }
            Err(SynthesisError::Interrupted { reason, partial }) => {
                append_jsonl(&paths.generated, &[*partial])?;
                summary.notes.push(format!(
                    "interrupted at seed {}: {reason}; partial record persisted",
                    chain.source_problem_id
                ));
                summary.count("new_records", new_records + 1);
                summary.write(paths)?;
                return Err(PipelineError::Gateway(GatewayError::ProviderUnavailable {
                    attempts: cfg.retry_budget + 1,
                    last_error: reason,
                }));
            }
            Err(other) => {
                summary
                    .notes
                    .push(format!("failed at seed {}", chain.source_problem_id));
                summary.write(paths)?;
                return Err(other.into());
            }
        }
    }

    summary.count("seeds", chains.len());
    summary.count("new_records", new_records);
    summary.count("skipped", skipped);
    summary.count("steps_total", steps_total);
    summary.count("steps_compatible", steps_compatible);
    summary.count(
        "compatibility_rate",
        if steps_total == 0 {
            0.0
        } else {
            steps_compatible as f64 / steps_total as f64
        },
    );
    summary.count("fallbacks", fallbacks);
    summary.count("terminations", terminations);
    summary.count("parse_rejections", parse_rejections);
    summary.count("tracker_total", tracker.total_generated());
    Ok(summary)
}

fn rollout_stage(cfg: &PipelineConfig, paths: &ArtifactPaths) -> Result<StageSummary, PipelineError> {
    require(&paths.generated, "generated records")?;
    let generated: Vec<GenerationRecord> = read_jsonl(&paths.generated)?;
    let existing: Vec<RolloutBundle> = read_jsonl_or_empty(&paths.rollouts)?;
    let existing_keys: HashSet<String> =
        existing.iter().map(|b| b.question_id.clone()).collect();

    let providers = build_providers(cfg)?;
    let rollout_cfg = RolloutConfig {
        count: cfg.rollout_count,
        chat: chat_options(cfg),
    };

    let todo: Vec<&GenerationRecord> = generated
        .iter()
        .filter(|r| !existing_keys.contains(&r.seed_problem_id) && !r.steps.is_empty())
        .collect();
    let skipped = generated.len() - todo.len();

    let solver = providers.chat.clone();
    let judge = providers.judge.clone();
    let results: Vec<Result<(RolloutBundle, u32), RolloutError>> =
        parallel_map(&todo, cfg.workers, |record| {
            let state = record.final_state().expect("todo filtered empty records");
            rollout_question(
                solver.as_ref(),
                judge.as_ref(),
                &rollout_cfg,
                &record.seed_problem_id,
                state,
                &record.source_dataset_id,
            )
        });

    let fatal_at = results
        .iter()
        .position(|r| matches!(r, Err(RolloutError::Gateway(_))));
    let keep = fatal_at.unwrap_or(results.len());
    let mut bundles: Vec<RolloutBundle> = Vec::new();
    let mut judge_rejections = 0u64;
    let mut label_counts: BTreeMap<String, u64> = BTreeMap::new();
    for result in results.into_iter().take(keep) {
        let (bundle, rejections) = result?;
        judge_rejections += rejections as u64;
        let label = format!("{:?}", bundle.label);
        *label_counts.entry(label).or_insert(0) += 1;
        bundles.push(bundle);
    }
    append_jsonl(&paths.rollouts, &bundles)?;

    let mut summary = StageSummary::new(Stage::Rollout, cfg);
    summary.count("generated", generated.len());
    summary.count("new_bundles", bundles.len());
    summary.count("skipped", skipped);
    summary.count("judge_parse_failures", judge_rejections);
    for (label, count) in label_counts {
        summary.count(&format!("label[{label}]"), count);
    }
    if let Some(at) = fatal_at {
        summary.notes.push(format!(
            "provider failure at generated index {at}; run `rollout` again to resume"
        ));
        summary.write(paths)?;
        return Err(PipelineError::Gateway(GatewayError::ProviderUnavailable {
            attempts: cfg.retry_budget + 1,
            last_error: "rollout interrupted by provider failure".into(),
        }));
    }
    Ok(summary)
}

fn convert_stage(cfg: &PipelineConfig, paths: &ArtifactPaths) -> Result<StageSummary, PipelineError> {
    require(&paths.rollouts, "rollout bundles")?;
    let bundles: Vec<RolloutBundle> = read_jsonl(&paths.rollouts)?;
    let filter = ProvenanceFilter {
        filtered_source_ids: cfg.provenance_filter.clone(),
    };
    let filtered = filter_provenance(bundles, &filter);
    write_jsonl(&paths.filtered, &filtered.retained)?;
    std::fs::write(&paths.removal_report, filtered.report.to_text())
        .map_err(|e| PipelineError::Io(e.to_string()))?;

    let converted = convert_sft(&filtered.retained);
    write_jsonl(&paths.sft, &converted.records)?;
    let hard = export_hard_items(&filtered.retained);
    write_jsonl(&paths.hard, &hard)?;

    let mut summary = StageSummary::new(Stage::Convert, cfg);
    summary.count("input_bundles", filtered.report.input_count);
    summary.count("retained", filtered.report.retained_count);
    summary.count("removed", filtered.report.removed_count());
    summary.count("retention_rate", filtered.report.retention_rate);
    summary.count("sft_records", converted.records.len());
    summary.count("ineligible", converted.ineligible);
    summary.count("hard_items", hard.len());
    Ok(summary)
}

fn report_stage(cfg: &PipelineConfig, paths: &ArtifactPaths) -> Result<StageSummary, PipelineError> {
    let stats = pipeline_stats(&StagePaths {
        sources: paths.sources.clone(),
        chains: paths.chains.clone(),
        generated: paths.generated.clone(),
        rollouts: paths.rollouts.clone(),
        filtered: paths.filtered.clone(),
        sft: paths.sft.clone(),
        hard: paths.hard.clone(),
    })?;
    std::fs::write(&paths.report_text, stats.to_text())
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let json = serde_json::to_string_pretty(&stats).map_err(|e| PipelineError::Io(e.to_string()))?;
    std::fs::write(&paths.report_json, json).map_err(|e| PipelineError::Io(e.to_string()))?;

    let mut summary = StageSummary::new(Stage::Report, cfg);
    summary.count("sources", stats.counts.sources);
    summary.count("chains", stats.counts.chains);
    summary.count("generated", stats.counts.generated);
    summary.count("rollouts", stats.counts.rollouts);
    summary.count("filtered", stats.counts.filtered);
    summary.count("sft", stats.counts.sft);
    summary.count("hard", stats.counts.hard);

    // Coverage needs the tracker and cluster model from synthesis.
    if paths.tracker.exists() && paths.clusters.exists() {
        let clusters = ClusterModel::load(&paths.clusters)?;
        let tracker = DistributionTracker::load_or_new(
            &paths.tracker,
            clusters.reference_counts(),
            cfg.epsilon,
        )?;
        match coverage_report(&tracker) {
            Ok(report) => {
                std::fs::write(&paths.coverage_text, report.to_text())
                    .map_err(|e| PipelineError::Io(e.to_string()))?;
                let body = serde_json::to_string_pretty(&report)
                    .map_err(|e| PipelineError::Io(e.to_string()))?;
                std::fs::write(&paths.coverage_json, body)
                    .map_err(|e| PipelineError::Io(e.to_string()))?;
                summary.count("coverage_l1", report.l1_distance);
            }
            Err(SynthesisError::NoGenerations) => {
                summary.notes.push("no generations recorded; coverage skipped".into());
            }
            Err(other) => return Err(other.into()),
        }
    } else {
        summary
            .notes
            .push("tracker or cluster model missing; coverage skipped".into());
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    WindowW,
}

impl SweepParam {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "alpha" => Some(SweepParam::Alpha),
            "window_w" | "window-w" | "w" => Some(SweepParam::WindowW),
            _ => None,
        }
    }

    fn key(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::WindowW => "window_length",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub coverage_l1: Option<f64>,
    pub compatibility_rate: Option<f64>,
    pub mean_chain_len: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub param: String,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn to_text(&self) -> String {
        let mut out = format!("sweep over {}\n", self.param);
        out.push_str("value      coverage_l1  compat_rate  mean_chain_len\n");
        for row in &self.rows {
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:<12.4}"),
                None => format!("{:<12}", "-"),
            };
            out.push_str(&format!(
                "{:<10} {} {} {}\n",
                row.value,
                fmt(row.coverage_l1),
                fmt(row.compatibility_rate),
                fmt(row.mean_chain_len)
            ));
        }
        out
    }
}

fn copy_if_exists(from: &Path, to: &Path) -> Result<(), PipelineError> {
    if from.exists() {
        if let Some(parent) = to.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::Io(e.to_string()))?;
        }
        std::fs::copy(from, to).map_err(|e| PipelineError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Run a per-value sweep. An alpha sweep reuses the main run's bank,
/// adapter, and cluster model against a fresh tracker per value; a
/// window-length sweep re-extracts and retrains per value, since the
/// window size shapes the bank itself.
pub fn sweep(
    param: SweepParam,
    values: &[f64],
    cfg: &PipelineConfig,
) -> Result<SweepSummary, PipelineError> {
    let main_paths = ArtifactPaths::new(cfg);
    let mut rows = Vec::new();
    for &value in values {
        let mut sub = cfg.clone();
        let slug = format!("{}", value).replace('.', "_");
        sub.data_dir = cfg.data_dir.join(format!("sweep-{}-{slug}", param.key()));
        sub.sources = Some(cfg.sources_path());
        match param {
            SweepParam::Alpha => sub.alpha = value,
            SweepParam::WindowW => {
                sub.window_length = value.round() as usize;
                if sub.window_length < 1 {
                    return Err(PipelineError::Config(ConfigError::InvalidValue {
                        field: "window_length".into(),
                        message: "sweep values must round to >= 1".into(),
                    }));
                }
            }
        }
        sub.validate()?;
        std::fs::create_dir_all(&sub.data_dir).map_err(|e| PipelineError::Io(e.to_string()))?;
        let sub_paths = ArtifactPaths::new(&sub);

        let mut mean_chain_len = None;
        match param {
            SweepParam::Alpha => {
                for (from, to) in [
                    (&main_paths.chains, &sub_paths.chains),
                    (&main_paths.bank, &sub_paths.bank),
                    (&main_paths.pairs, &sub_paths.pairs),
                    (&main_paths.adapter, &sub_paths.adapter),
                    (&main_paths.clusters, &sub_paths.clusters),
                ] {
                    copy_if_exists(from, to)?;
                }
                require(&sub_paths.bank, "bank (run `extract` first)")?;
                require(&sub_paths.adapter, "adapter (run `train-retriever` first)")?;
            }
            SweepParam::WindowW => {
                let extract_summary = run_stage(Stage::Extract, &sub)?;
                mean_chain_len = extract_summary
                    .counts
                    .get("mean_chain_len")
                    .and_then(Value::as_f64);
                run_stage(Stage::TrainRetriever, &sub)?;
            }
        }

        let synth_summary = run_stage(Stage::Synthesize, &sub)?;
        let compatibility_rate = synth_summary
            .counts
            .get("compatibility_rate")
            .and_then(Value::as_f64);

        let clusters = ClusterModel::load(&sub_paths.clusters)?;
        let tracker = DistributionTracker::load_or_new(
            &sub_paths.tracker,
            clusters.reference_counts(),
            sub.epsilon,
        )?;
        let coverage_l1 = coverage_report(&tracker).ok().map(|r| r.l1_distance);

        rows.push(SweepRow {
            value,
            coverage_l1,
            compatibility_rate,
            mean_chain_len,
        });
    }
    let summary = SweepSummary {
        param: param.key().to_string(),
        rows,
    };
    let text_path = cfg.data_dir.join(format!("sweep_{}.txt", param.key()));
    let json_path = cfg.data_dir.join(format!("sweep_{}.json", param.key()));
    std::fs::write(&text_path, summary.to_text()).map_err(|e| PipelineError::Io(e.to_string()))?;
    let body = serde_json::to_string_pretty(&summary).map_err(|e| PipelineError::Io(e.to_string()))?;
    std::fs::write(&json_path, body).map_err(|e| PipelineError::Io(e.to_string()))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let doubled = parallel_map(&items, 8, |x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn stage_names_round_trip() {
        for stage in [
            Stage::Extract,
            Stage::TrainRetriever,
            Stage::Synthesize,
            Stage::Rollout,
            Stage::Convert,
            Stage::Report,
        ] {
            assert!(!stage.name().is_empty());
        }
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!(SweepParam::parse("alpha"), Some(SweepParam::Alpha));
        assert_eq!(SweepParam::parse("window_w"), Some(SweepParam::WindowW));
        assert_eq!(SweepParam::parse("w"), Some(SweepParam::WindowW));
        assert_eq!(SweepParam::parse("nope"), None);
    }
}
