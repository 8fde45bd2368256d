//! The synthesis loop: retrieve candidates with the fine-tuned adapter,
//! re-score with the general-purpose selector embedding plus the scarcity
//! reward, sample, apply via the chat model, and track cluster usage.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::ClusterModel;
use super::prompts::{
    incompatible_schema, render_synthesis_prompt, synthesis_schema, SYNTHESIS_SYSTEM_PROMPT,
};
use super::scoring::{sample_candidate, score_candidate};
use super::tracker::DistributionTracker;
use super::SynthesisError;
use crate::extract::ChatOptions;
use crate::gateway::{
    complete_chat, doc_bool, doc_string, doc_string_list, parse_structured_output, ChatProvider,
    EmbeddingProvider, GatewayError, Rejection,
};
use crate::model::{
    serialize_logic_text, serialize_query_text, serialize_state_text, GenerationRecord,
    GenerationStep, ProblemState, ThoughtMode,
};
use crate::retrieval::{AdapterParameters, VectorIndex};

#[derive(Debug, Clone)]
pub struct SelectorConfig {
    pub alpha: f64,
    pub tau: f64,
    pub top_m: usize,
    pub evolution_steps: usize,
    pub cluster_min_similarity: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            alpha: 0.65,
            tau: 1.0,
            top_m: 20,
            evolution_steps: 3,
            cluster_min_similarity: 0.0,
        }
    }
}

/// The tuple extracted alongside a compatible application.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTuple {
    pub s_sum: String,
    pub s_det: String,
    pub k_gen: Vec<String>,
    pub k_spec: Vec<String>,
}

#[derive(Debug)]
pub enum ApplyOutcome {
    Compatible {
        state: ProblemState,
        tuple: ModeTuple,
    },
    Incompatible,
    /// Unusable model output. Treated as incompatible for control flow,
    /// counted separately so compatibility statistics stay honest.
    RejectedParse(Rejection),
}

/// Fuse a thought mode into a problem state via the chat model.
pub fn apply_thought_mode(
    chat: &dyn ChatProvider,
    opts: &ChatOptions,
    state: &ProblemState,
    mode: &ThoughtMode,
) -> Result<ApplyOutcome, GatewayError> {
    let user = render_synthesis_prompt(state, mode);
    let response = complete_chat(
        chat,
        &opts.exchange(SYNTHESIS_SYSTEM_PROMPT, &user),
        opts.retry,
    )?;
    let text = &response.response_text;
    match parse_structured_output(text, &synthesis_schema()) {
        Ok(doc) => {
            if !doc_bool(&doc, "is_compatible") {
                return Ok(ApplyOutcome::Incompatible);
            }
            let question = doc_string(&doc, "question");
            let answer = doc_string(&doc, "answer");
            let steps = doc_string_list(&doc, "solution_steps");
            if question.trim().is_empty() || answer.trim().is_empty() || steps.is_empty() {
                return Ok(ApplyOutcome::RejectedParse(Rejection::WrongKind(
                    "question".into(),
                )));
            }
            Ok(ApplyOutcome::Compatible {
                state: ProblemState {
                    question,
                    answer,
                    solution_steps: steps,
                    step_index: state.step_index + 1,
                },
                tuple: ModeTuple {
                    s_sum: doc_string(&doc, "S_sum"),
                    s_det: doc_string(&doc, "S_det"),
                    k_gen: doc_string_list(&doc, "K_gen"),
                    k_spec: doc_string_list(&doc, "K_spec"),
                },
            })
        }
        Err(rejection) => {
            // A bare incompatible flag is a valid refusal even when the
            // state fields are missing.
            if let Ok(doc) = parse_structured_output(text, &incompatible_schema()) {
                if !doc_bool(&doc, "is_compatible") {
                    return Ok(ApplyOutcome::Incompatible);
                }
            }
            Ok(ApplyOutcome::RejectedParse(rejection))
        }
    }
}

/// Everything a synthesis run needs besides the tracker and the seed.
pub struct SynthesisContext<'a> {
    pub bank: &'a HashMap<String, ThoughtMode>,
    pub clusters: &'a ClusterModel,
    pub retriever_index: &'a VectorIndex,
    pub adapter: &'a AdapterParameters,
    pub base_embedder: &'a dyn EmbeddingProvider,
    pub selector_embedder: &'a dyn EmbeddingProvider,
    pub chat: &'a dyn ChatProvider,
    pub chat_opts: &'a ChatOptions,
    pub cfg: &'a SelectorConfig,
    /// When set, the tracker is persisted after every selection.
    pub tracker_path: Option<&'a Path>,
}

#[derive(Debug)]
pub struct ChainOutcome {
    pub record: GenerationRecord,
    pub parse_rejections: u32,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn build_record(
    seed_problem_id: &str,
    source_dataset_id: &str,
    steps: Vec<GenerationStep>,
    provenance: String,
    fallback_used: bool,
    rng_seed: u64,
) -> GenerationRecord {
    GenerationRecord {
        seed_problem_id: seed_problem_id.to_string(),
        source_dataset_id: source_dataset_id.to_string(),
        steps,
        model_provenance: provenance,
        fallback_used,
        rng_seed,
    }
}

/// Run up to `evolution_steps` retrieve → score → sample → apply rounds
/// for one seed. An incompatible first step records a seed fallback; an
/// incompatible later step terminates the chain. The tracker counts every
/// selection, compatible or not, and is persisted after each step.
pub fn synthesize_chain(
    ctx: &SynthesisContext<'_>,
    tracker: &mut DistributionTracker,
    seed_problem_id: &str,
    source_dataset_id: &str,
    seed: &ProblemState,
    rng_seed: u64,
) -> Result<ChainOutcome, SynthesisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut steps: Vec<GenerationStep> = Vec::new();
    let mut parse_rejections = 0u32;
    let mut fallback_used = false;
    let provenance = ctx.chat.provider_tag();
    let mut current = seed.clone();

    let interrupted = |steps: Vec<GenerationStep>, err: GatewayError| -> SynthesisError {
        if steps.is_empty() {
            SynthesisError::Gateway(err)
        } else {
            SynthesisError::Interrupted {
                reason: err.to_string(),
                partial: Box::new(build_record(
                    seed_problem_id,
                    source_dataset_id,
                    steps,
                    format!("{provenance} (interrupted)"),
                    false,
                    rng_seed,
                )),
            }
        }
    };

    for i in 0..ctx.cfg.evolution_steps {
        // Sub-step 1: retrieve candidates with the fine-tuned adapter.
        let query_text = serialize_query_text(&current);
        let query_base = match ctx.base_embedder.embed_texts(&[query_text]) {
            Ok(mut v) => v.remove(0),
            Err(e) => return Err(interrupted(steps, e)),
        };
        let query_vec = ctx.adapter.apply(&query_base);
        let candidates = ctx
            .retriever_index
            .search_top_m(&query_vec, ctx.cfg.top_m, None)?;

        // Sub-step 2: re-score with selector cosine plus scarcity reward.
        let state_text = serialize_state_text(&current);
        let mut texts = vec![state_text];
        let mut modes: Vec<&ThoughtMode> = Vec::with_capacity(candidates.len());
        for (mode_id, _) in &candidates {
            let mode = ctx
                .bank
                .get(mode_id)
                .ok_or_else(|| SynthesisError::UnknownMode(mode_id.clone()))?;
            modes.push(mode);
            texts.push(serialize_logic_text(mode));
        }
        let vectors = match ctx.selector_embedder.embed_texts(&texts) {
            Ok(v) => v,
            Err(e) => return Err(interrupted(steps, e)),
        };
        let state_vec = &vectors[0];
        let mut scored: Vec<(&ThoughtMode, usize, f64)> = Vec::with_capacity(modes.len());
        for (j, mode) in modes.iter().enumerate() {
            let sim = cosine(state_vec, &vectors[j + 1]);
            let cluster = ctx
                .clusters
                .cluster_of(&mode.id)
                .ok_or_else(|| SynthesisError::UnknownMode(mode.id.clone()))?;
            scored.push((mode, cluster, sim));
        }
        let filtered: Vec<&(&ThoughtMode, usize, f64)> = scored
            .iter()
            .filter(|(_, _, sim)| *sim >= ctx.cfg.cluster_min_similarity)
            .collect();
        // If the similarity floor empties the pool, fall back to the
        // unfiltered candidates rather than stalling the seed.
        let pool: Vec<&(&ThoughtMode, usize, f64)> = if filtered.is_empty() {
            scored.iter().collect()
        } else {
            filtered
        };
        let scores: Vec<f64> = pool
            .iter()
            .map(|(_, cluster, sim)| {
                score_candidate(*sim, tracker.scarcity_reward(*cluster), ctx.cfg.alpha)
            })
            .collect();
        let chosen = sample_candidate(&scores, ctx.cfg.tau, &mut rng);
        let (mode, cluster, _) = *pool[chosen];

        // Sub-step 3: apply the thought mode via the chat model.
        let outcome = match apply_thought_mode(ctx.chat, ctx.chat_opts, &current, mode) {
            Ok(outcome) => outcome,
            Err(e) => return Err(interrupted(steps, e)),
        };
        let (is_compatible, next_state) = match outcome {
            ApplyOutcome::Compatible { state, .. } => (true, Some(state)),
            ApplyOutcome::Incompatible => (false, None),
            ApplyOutcome::RejectedParse(_) => {
                parse_rejections += 1;
                (false, None)
            }
        };

        let recorded_state = match &next_state {
            Some(state) => state.clone(),
            // Fallback bookkeeping state: the seed for a first-step
            // failure, the last valid state otherwise.
            None if i == 0 => seed.clone(),
            None => current.clone(),
        };
        steps.push(GenerationStep {
            mode_id: mode.id.clone(),
            is_compatible,
            state: recorded_state,
            cluster,
        });
        tracker.record_selection(cluster);
        if let Some(path) = ctx.tracker_path {
            tracker.persist(path)?;
        }

        match next_state {
            Some(state) => current = state,
            None => {
                if i == 0 {
                    fallback_used = true;
                }
                break;
            }
        }
    }

    let record = build_record(
        seed_problem_id,
        source_dataset_id,
        steps,
        provenance,
        fallback_used,
        rng_seed,
    );
    record
        .validate()
        .expect("synthesis loop preserves record invariants");
    Ok(ChainOutcome {
        record,
        parse_rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FixedEmbeddingProvider, MockChatProvider, RetryPolicy};
    use crate::retrieval::IndexEntry;
    use std::collections::BTreeMap;

    fn unit(dim: usize, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    fn mode(id: &str) -> ThoughtMode {
        ThoughtMode {
            id: id.into(),
            s_sum: format!("summary {id}"),
            s_det: "detail".into(),
            k_gen: vec!["principle".into()],
            k_spec: vec!["parameter".into()],
            source_problem_id: "src".into(),
            cluster: None,
        }
    }

    fn state(question: &str, index: usize) -> ProblemState {
        ProblemState {
            question: question.into(),
            answer: "answer".into(),
            solution_steps: vec!["step".into()],
            step_index: index,
        }
    }

    fn compatible_json(question: &str) -> String {
        serde_json::json!({
            "is_compatible": true,
            "question": question,
            "answer": "answer",
            "solution_steps": ["step"],
            "S_sum": "sum",
            "S_det": "det",
            "K_gen": ["g"],
            "K_spec": ["s"],
        })
        .to_string()
    }

    /// Fixture: three modes A/B/C in distinct clusters; base-embedding
    /// geometry steers retrieval so step i surfaces exactly one mode.
    struct Fixture {
        bank: HashMap<String, ThoughtMode>,
        clusters: ClusterModel,
        index: VectorIndex,
        adapter: AdapterParameters,
        base: FixedEmbeddingProvider,
        selector: FixedEmbeddingProvider,
        chat: MockChatProvider,
        opts: ChatOptions,
        cfg: SelectorConfig,
    }

    impl Fixture {
        fn context<'a>(&'a self) -> SynthesisContext<'a> {
            SynthesisContext {
                bank: &self.bank,
                clusters: &self.clusters,
                retriever_index: &self.index,
                adapter: &self.adapter,
                base_embedder: &self.base,
                selector_embedder: &self.selector,
                chat: &self.chat,
                chat_opts: &self.opts,
                cfg: &self.cfg,
                tracker_path: None,
            }
        }
    }

    fn fixture() -> Fixture {
        let modes = [mode("A"), mode("B"), mode("C")];
        let bank: HashMap<String, ThoughtMode> =
            modes.iter().map(|m| (m.id.clone(), m.clone())).collect();
        let clusters = ClusterModel {
            k: 3,
            centroids: vec![vec![0.0]; 3],
            assignment: BTreeMap::from([
                ("A".to_string(), 0),
                ("B".to_string(), 1),
                ("C".to_string(), 2),
            ]),
        };
        let index = VectorIndex::new(vec![
            IndexEntry {
                mode_id: "A".into(),
                vector: unit(3, 0),
            },
            IndexEntry {
                mode_id: "B".into(),
                vector: unit(3, 1),
            },
            IndexEntry {
                mode_id: "C".into(),
                vector: unit(3, 2),
            },
        ]);

        let q0 = state("seed question", 0);
        let q1 = state("question one", 1);
        let q2 = state("question two", 2);

        let mut base = FixedEmbeddingProvider::new();
        base.insert(serialize_query_text(&q0), unit(3, 0));
        base.insert(serialize_query_text(&q1), unit(3, 1));
        base.insert(serialize_query_text(&q2), unit(3, 2));

        let mut selector = FixedEmbeddingProvider::new();
        for s in [&q0, &q1, &q2] {
            selector.insert(serialize_state_text(s), vec![1.0, 0.0]);
        }
        for m in &modes {
            selector.insert(serialize_logic_text(m), vec![1.0, 0.0]);
        }

        let chat = MockChatProvider::new("mock-chat");
        Fixture {
            bank,
            clusters,
            index,
            adapter: AdapterParameters::identity(3),
            base,
            selector,
            chat,
            opts: ChatOptions {
                retry: RetryPolicy::no_wait(0),
                ..ChatOptions::default()
            },
            cfg: SelectorConfig {
                top_m: 1,
                ..SelectorConfig::default()
            },
        }
    }

    fn tracker() -> DistributionTracker {
        DistributionTracker::new(vec![1, 1, 1], 1e-3)
    }

    #[test]
    fn three_compatible_steps_yield_length_three() {
        let fx = fixture();
        let q0 = state("seed question", 0);
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &fx.bank["A"]),
            compatible_json("question one"),
        );
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&state("question one", 1), &fx.bank["B"]),
            compatible_json("question two"),
        );
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&state("question two", 2), &fx.bank["C"]),
            compatible_json("question three"),
        );

        let mut tracker = tracker();
        let out =
            synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7).unwrap();
        assert_eq!(out.record.steps.len(), 3);
        assert!(out.record.steps.iter().all(|s| s.is_compatible));
        assert!(!out.record.fallback_used);
        let clusters: Vec<usize> = out.record.steps.iter().map(|s| s.cluster).collect();
        assert_eq!(clusters, vec![0, 1, 2]);
        assert_eq!(tracker.total_generated(), 3);
        assert_eq!(out.record.rng_seed, 7);
        out.record.validate().unwrap();
    }

    #[test]
    fn first_step_incompatibility_records_seed_fallback() {
        let fx = fixture();
        let q0 = state("seed question", 0);
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &fx.bank["A"]),
            "{\"is_compatible\": false}",
        );
        let mut tracker = tracker();
        let out =
            synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7).unwrap();
        assert_eq!(out.record.steps.len(), 1);
        assert!(!out.record.steps[0].is_compatible);
        assert!(out.record.fallback_used);
        assert_eq!(out.record.steps[0].state, q0);
        assert_eq!(tracker.total_generated(), 1);
        out.record.validate().unwrap();
    }

    #[test]
    fn later_step_incompatibility_terminates_the_chain() {
        let fx = fixture();
        let q0 = state("seed question", 0);
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &fx.bank["A"]),
            compatible_json("question one"),
        );
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&state("question one", 1), &fx.bank["B"]),
            "{\"is_compatible\": false}",
        );
        let mut tracker = tracker();
        let out =
            synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7).unwrap();
        assert_eq!(out.record.steps.len(), 2);
        assert!(out.record.steps[0].is_compatible);
        assert!(!out.record.steps[1].is_compatible);
        assert!(!out.record.fallback_used);
        // The terminating entry keeps the last valid state.
        assert_eq!(out.record.steps[1].state.question, "question one");
        assert_eq!(tracker.total_generated(), 2);
        out.record.validate().unwrap();
    }

    #[test]
    fn parse_rejection_is_incompatible_but_counted_separately() {
        let fx = fixture();
        let q0 = state("seed question", 0);
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &fx.bank["A"]),
            "utter nonsense",
        );
        let mut tracker = tracker();
        let out =
            synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7).unwrap();
        assert_eq!(out.parse_rejections, 1);
        assert!(out.record.fallback_used);
        assert_eq!(tracker.total_generated(), 1);
    }

    #[test]
    fn provider_failure_mid_chain_preserves_the_partial_record() {
        let fx = fixture();
        let q0 = state("seed question", 0);
        fx.chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &fx.bank["A"]),
            compatible_json("question one"),
        );
        // No response registered for step two: the lookup-only mock
        // fails, standing in for a dead provider.
        let mut tracker = tracker();
        match synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7) {
            Err(SynthesisError::Interrupted { partial, .. }) => {
                assert_eq!(partial.steps.len(), 1);
                assert!(partial.steps[0].is_compatible);
                assert!(partial.model_provenance.contains("interrupted"));
                partial.validate().unwrap();
            }
            other => panic!("expected interruption, got {other:?}"),
        }
        // The completed step was still counted before the failure.
        assert_eq!(tracker.total_generated(), 1);
    }

    #[test]
    fn empty_index_is_an_error() {
        let mut fx = fixture();
        fx.index = VectorIndex::default();
        let q0 = state("seed question", 0);
        let mut tracker = tracker();
        assert!(matches!(
            synthesize_chain(&fx.context(), &mut tracker, "seed-1", "ds", &q0, 7),
            Err(SynthesisError::Retrieval(_))
        ));
    }

    #[test]
    fn apply_accepts_incompatible_flag_without_state_fields() {
        let chat = MockChatProvider::new("mock");
        let q0 = state("q", 0);
        let m = mode("A");
        chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &m),
            "{\"is_compatible\": false}",
        );
        let opts = ChatOptions {
            retry: RetryPolicy::no_wait(0),
            ..ChatOptions::default()
        };
        assert!(matches!(
            apply_thought_mode(&chat, &opts, &q0, &m).unwrap(),
            ApplyOutcome::Incompatible
        ));
    }

    #[test]
    fn apply_returns_evolved_state_and_tuple() {
        let chat = MockChatProvider::new("mock");
        let q0 = state("q", 0);
        let m = mode("A");
        chat.register(
            SYNTHESIS_SYSTEM_PROMPT,
            &render_synthesis_prompt(&q0, &m),
            compatible_json("harder question"),
        );
        let opts = ChatOptions {
            retry: RetryPolicy::no_wait(0),
            ..ChatOptions::default()
        };
        match apply_thought_mode(&chat, &opts, &q0, &m).unwrap() {
            ApplyOutcome::Compatible { state, tuple } => {
                assert_eq!(state.question, "harder question");
                assert_eq!(state.step_index, 1);
                assert_eq!(tuple.s_sum, "sum");
            }
            other => panic!("expected compatible, got {other:?}"),
        }
    }
}
