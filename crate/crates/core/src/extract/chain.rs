//! Chain extraction: seed generation, iterative absorption, saturation
//! handling, and eligibility filtering.

use super::prompts::{
    evolution_schema, render_evolution_prompt, render_seed_prompt, seed_schema,
    EVOLUTION_SYSTEM_PROMPT, SEED_SYSTEM_PROMPT,
};
use super::windows::partition_windows;
use super::{ExtractError, ExtractionConfig};
use crate::gateway::{
    complete_chat, doc_string, doc_string_list, parse_structured_output, ChatExchange,
    ChatProvider, RetryPolicy,
};
use crate::model::{
    ChainRecord, DifficultyLabel, ProblemState, Rollout, RolloutBundle, SolutionWindow,
    ThoughtMode,
};

/// Sampling and retry settings shared by every chat call of a stage.
#[derive(Debug, Clone)]
pub struct ChatOptions {
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
}

impl Default for ChatOptions {
    fn default() -> Self {
        ChatOptions {
            temperature: 0.7,
            max_tokens: 8096,
            retry: RetryPolicy::default(),
        }
    }
}

impl ChatOptions {
    pub fn exchange(&self, system: &str, user: &str) -> ChatExchange {
        ChatExchange::new(system, user).with_sampling(self.temperature, self.max_tokens)
    }
}

fn require_non_empty(value: String, field: &str) -> Result<String, ExtractError> {
    if value.trim().is_empty() {
        Err(ExtractError::InvalidContent(format!("empty `{field}`")))
    } else {
        Ok(value)
    }
}

/// Generate the self-contained seed question for the tail window.
pub fn generate_seed(
    chat: &dyn ChatProvider,
    opts: &ChatOptions,
    subject: &str,
    original: &ProblemState,
    tail_window: &SolutionWindow,
    earlier_steps: &[String],
) -> Result<ProblemState, ExtractError> {
    debug_assert_eq!(tail_window.tail_offset, 0);
    let user = render_seed_prompt(subject, original, tail_window, earlier_steps);
    let response = complete_chat(chat, &opts.exchange(SEED_SYSTEM_PROMPT, &user), opts.retry)?;
    let doc = parse_structured_output(&response.response_text, &seed_schema())
        .map_err(ExtractError::Rejected)?;
    let steps = doc_string_list(&doc, "solution_steps");
    if steps.is_empty() {
        return Err(ExtractError::InvalidContent("empty `solution_steps`".into()));
    }
    Ok(ProblemState {
        question: require_non_empty(doc_string(&doc, "seed_question"), "seed_question")?,
        answer: require_non_empty(doc_string(&doc, "answer"), "answer")?,
        solution_steps: steps,
        step_index: 0,
    })
}

/// One dependency-absorption step: evolve the question and extract the
/// thought mode describing the added requirement.
#[allow(clippy::too_many_arguments)]
pub fn absorb_step(
    chat: &dyn ChatProvider,
    opts: &ChatOptions,
    current: &ProblemState,
    next_window: &SolutionWindow,
    remaining_steps: &[String],
    original: &ProblemState,
    mode_id: &str,
    source_problem_id: &str,
) -> Result<(ProblemState, ThoughtMode), ExtractError> {
    let user = render_evolution_prompt(original, current, next_window, remaining_steps);
    let response = complete_chat(
        chat,
        &opts.exchange(EVOLUTION_SYSTEM_PROMPT, &user),
        opts.retry,
    )?;
    let doc = parse_structured_output(&response.response_text, &evolution_schema())
        .map_err(ExtractError::Rejected)?;
    let steps = doc_string_list(&doc, "solution_steps");
    if steps.is_empty() {
        return Err(ExtractError::InvalidContent("empty `solution_steps`".into()));
    }
    let evolved = ProblemState {
        question: require_non_empty(doc_string(&doc, "Q_next"), "Q_next")?,
        answer: require_non_empty(doc_string(&doc, "answer"), "answer")?,
        solution_steps: steps,
        step_index: current.step_index + 1,
    };
    let mode = ThoughtMode {
        id: mode_id.to_string(),
        s_sum: require_non_empty(doc_string(&doc, "S_sum"), "S_sum")?,
        s_det: require_non_empty(doc_string(&doc, "S_det"), "S_det")?,
        k_gen: doc_string_list(&doc, "K_gen"),
        k_spec: doc_string_list(&doc, "K_spec"),
        source_problem_id: source_problem_id.to_string(),
        cluster: None,
    };
    Ok((evolved, mode))
}

/// Saturation: the model returned the same question text with both
/// knowledge lists empty. The degenerate step is discarded and the chain
/// truncated at the previous step.
pub fn detect_saturation(
    previous: &ProblemState,
    evolved: &ProblemState,
    mode: &ThoughtMode,
) -> bool {
    evolved.question == previous.question && mode.k_gen.is_empty() && mode.k_spec.is_empty()
}

/// The verified trace backing extraction: a judged-correct rollout.
/// Partial-success sources qualify directly; all-wrong sources only
/// through a judged-correct rescue rollout; all-correct sources are
/// excluded as too easy to decompose meaningfully.
fn eligible_trace(source: &RolloutBundle) -> Result<&Rollout, ExtractError> {
    let rollout = match source.label {
        DifficultyLabel::AllCorrect => {
            return Err(ExtractError::Skip("all-correct excluded".into()))
        }
        DifficultyLabel::Partial => source
            .first_correct_rollout()
            .ok_or_else(|| ExtractError::Skip("partial label without correct rollout".into()))?,
        DifficultyLabel::AllWrong => source.first_correct_rescue().ok_or_else(|| {
            ExtractError::Skip("all-wrong without rescued correct rollout".into())
        })?,
    };
    if rollout.parsed_steps.is_empty() {
        return Err(ExtractError::Skip("correct rollout has no parsed steps".into()));
    }
    Ok(rollout)
}

/// Reverse-engineer one eligible source into a thought-mode chain.
///
/// Absorption proceeds back-to-front over the windows, up to one step per
/// non-tail window. A mid-chain rejection or saturation keeps the valid
/// prefix; a chain that ends up with zero modes is skipped.
pub fn extract_chain(
    chat: &dyn ChatProvider,
    opts: &ChatOptions,
    source: &RolloutBundle,
    cfg: &ExtractionConfig,
) -> Result<ChainRecord, ExtractError> {
    let trace = eligible_trace(source)?;
    let original = ProblemState {
        question: source.state.question.clone(),
        answer: source.state.answer.clone(),
        solution_steps: trace.parsed_steps.clone(),
        step_index: 0,
    };
    let windows = partition_windows(&original.solution_steps, cfg.window_length)?;
    let k = windows.len();
    let cap = cfg.max_chain_steps.unwrap_or(k - 1).min(k - 1);
    if cap == 0 {
        return Err(ExtractError::Skip("no absorb steps possible".into()));
    }

    // Front-order offsets: steps strictly before window j.
    let mut offsets = Vec::with_capacity(k);
    let mut acc = 0;
    for window in &windows {
        offsets.push(acc);
        acc += window.steps.len();
    }

    let tail = &windows[k - 1];
    let earlier = &original.solution_steps[..offsets[k - 1]];
    let seed = match generate_seed(chat, opts, &source.source_dataset_id, &original, tail, earlier)
    {
        Ok(seed) => seed,
        Err(ExtractError::Rejected(r)) => {
            return Err(ExtractError::Skip(format!("seed rejected: {r}")))
        }
        Err(ExtractError::InvalidContent(msg)) => {
            return Err(ExtractError::Skip(format!("seed rejected: {msg}")))
        }
        Err(err) => return Err(err),
    };

    let mut modes: Vec<ThoughtMode> = Vec::new();
    let mut evolved: Vec<ProblemState> = Vec::new();
    let mut current = seed.clone();
    for i in 1..=cap {
        let window_index = k - 1 - i;
        let window = &windows[window_index];
        let remaining = &original.solution_steps[..offsets[window_index]];
        let mode_id = format!("{}#{}", source.question_id, i);
        match absorb_step(
            chat,
            opts,
            &current,
            window,
            remaining,
            &original,
            &mode_id,
            &source.question_id,
        ) {
            Ok((state, mode)) => {
                if detect_saturation(&current, &state, &mode) {
                    break;
                }
                evolved.push(state.clone());
                modes.push(mode);
                current = state;
            }
            // Keep the valid prefix on a mid-chain rejection.
            Err(ExtractError::Rejected(_)) | Err(ExtractError::InvalidContent(_)) => break,
            Err(err) => return Err(err),
        }
    }

    if modes.is_empty() {
        return Err(ExtractError::Skip("no modes extracted".into()));
    }
    let record = ChainRecord {
        source_problem_id: source.question_id.clone(),
        source_dataset_id: source.source_dataset_id.clone(),
        seed,
        modes,
        evolved,
    };
    record
        .validate()
        .map_err(|e| ExtractError::InvalidContent(e.to_string()))?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockChatProvider;
    use crate::model::Verdict;

    fn rollout(verdict: Verdict, steps: Vec<&str>) -> Rollout {
        Rollout {
            response: "raw".into(),
            parsed_steps: steps.into_iter().map(String::from).collect(),
            parsed_final_answer: "42".into(),
            verdict,
        }
    }

    fn source(label: DifficultyLabel, steps: Vec<&str>) -> RolloutBundle {
        let verdicts = match label {
            DifficultyLabel::AllCorrect => vec![Verdict::Correct, Verdict::Correct],
            DifficultyLabel::Partial => vec![Verdict::Incorrect, Verdict::Correct],
            DifficultyLabel::AllWrong => vec![Verdict::Incorrect, Verdict::Incorrect],
        };
        RolloutBundle {
            question_id: "prob-1".into(),
            state: ProblemState {
                question: "original question".into(),
                answer: "42".into(),
                solution_steps: vec![],
                step_index: 0,
            },
            rollouts: verdicts
                .into_iter()
                .map(|v| rollout(v, steps.clone()))
                .collect(),
            label,
            source_dataset_id: "fixture".into(),
            rescue_rollouts: vec![],
        }
    }

    fn opts() -> ChatOptions {
        ChatOptions {
            retry: RetryPolicy::no_wait(0),
            ..ChatOptions::default()
        }
    }

    fn seed_json(q: &str) -> String {
        format!(
            r#"{{"seed_question":"{q}","answer":"3/2","solution_steps":["substitute the given","evaluate"]}}"#
        )
    }

    fn evolution_json(q: &str, k_gen: &str, k_spec: &str) -> String {
        format!(
            r#"{{"Q_next":"{q}","answer":"42","solution_steps":["derive","finish"],
                "S_sum":"absorb one dependency","S_det":"removed the given",
                "K_gen":[{k_gen}],"K_spec":[{k_spec}]}}"#
        )
    }

    /// Register the scripted model for a full 5-step partial source with
    /// w=2: windows [1,2,2], so one seed call and up to two absorptions.
    fn scripted_mock(five_step: &RolloutBundle, second_response: Option<String>) -> MockChatProvider {
        let mock = MockChatProvider::new("scripted");
        let original = ProblemState {
            question: five_step.state.question.clone(),
            answer: five_step.state.answer.clone(),
            solution_steps: five_step.rollouts[1].parsed_steps.clone(),
            step_index: 0,
        };
        let windows = partition_windows(&original.solution_steps, 2).unwrap();
        let seed_user = render_seed_prompt(
            "fixture",
            &original,
            &windows[2],
            &original.solution_steps[..3],
        );
        mock.register(SEED_SYSTEM_PROMPT, &seed_user, seed_json("seed q"));

        let seed_state = ProblemState {
            question: "seed q".into(),
            answer: "3/2".into(),
            solution_steps: vec!["substitute the given".into(), "evaluate".into()],
            step_index: 0,
        };
        let evo1_user = render_evolution_prompt(
            &original,
            &seed_state,
            &windows[1],
            &original.solution_steps[..1],
        );
        mock.register(
            EVOLUTION_SYSTEM_PROMPT,
            &evo1_user,
            evolution_json("evolved q1", r#""principle a""#, r#""bounds [1,2]""#),
        );

        if let Some(response) = second_response {
            let state1 = ProblemState {
                question: "evolved q1".into(),
                answer: "42".into(),
                solution_steps: vec!["derive".into(), "finish".into()],
                step_index: 1,
            };
            let evo2_user = render_evolution_prompt(&original, &state1, &windows[0], &[]);
            mock.register(EVOLUTION_SYSTEM_PROMPT, &evo2_user, response);
        }
        mock
    }

    #[test]
    fn extracts_full_chain_up_to_window_bound() {
        let source = source(DifficultyLabel::Partial, vec!["a", "b", "c", "d", "e"]);
        let mock = scripted_mock(
            &source,
            Some(evolution_json("evolved q2", r#""principle b""#, r#""param""#)),
        );
        let chain = extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()).unwrap();
        assert_eq!(chain.modes.len(), 2);
        assert_eq!(chain.modes[0].id, "prob-1#1");
        assert_eq!(chain.modes[1].id, "prob-1#2");
        assert_eq!(chain.evolved[1].step_index, 2);
        assert_eq!(chain.seed.step_index, 0);
    }

    #[test]
    fn all_correct_sources_are_skipped() {
        let source = source(DifficultyLabel::AllCorrect, vec!["a", "b"]);
        let mock = MockChatProvider::new("unused");
        let err = extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()).unwrap_err();
        match err {
            ExtractError::Skip(reason) => assert!(reason.contains("all-correct")),
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn all_wrong_requires_rescued_trace() {
        let mut source = source(DifficultyLabel::AllWrong, vec!["a", "b", "c"]);
        let mock = MockChatProvider::new("unused");
        assert!(matches!(
            extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()),
            Err(ExtractError::Skip(_))
        ));

        // With a judged-correct rescue rollout the source becomes eligible.
        source.rescue_rollouts = vec![rollout(Verdict::Correct, vec!["a", "b", "c"])];
        let err = extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()).unwrap_err();
        match err {
            // Eligibility passed; failure is now the unregistered mock call.
            ExtractError::Skip(reason) => assert!(reason.contains("seed rejected") || reason.is_empty()),
            ExtractError::Gateway(_) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn mid_chain_rejection_keeps_prefix() {
        let source = source(DifficultyLabel::Partial, vec!["a", "b", "c", "d", "e"]);
        let mock = scripted_mock(&source, Some("not json at all".into()));
        let chain = extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()).unwrap();
        assert_eq!(chain.modes.len(), 1);
    }

    #[test]
    fn saturation_truncates_and_discards_degenerate_step() {
        let source = source(DifficultyLabel::Partial, vec!["a", "b", "c", "d", "e"]);
        // Same question text as the previous state, empty knowledge lists.
        let saturated = evolution_json("evolved q1", "", "");
        let mock = scripted_mock(&source, Some(saturated));
        let chain = extract_chain(&mock, &opts(), &source, &ExtractionConfig::default()).unwrap();
        assert_eq!(chain.modes.len(), 1);
        assert_eq!(chain.evolved.last().unwrap().question, "evolved q1");
    }

    #[test]
    fn saturation_predicate_truth_table() {
        let state = |q: &str| ProblemState {
            question: q.into(),
            answer: "1".into(),
            solution_steps: vec!["s".into()],
            step_index: 1,
        };
        let mode = |k_gen: Vec<&str>, k_spec: Vec<&str>| ThoughtMode {
            id: "m".into(),
            s_sum: "sum".into(),
            s_det: "det".into(),
            k_gen: k_gen.into_iter().map(String::from).collect(),
            k_spec: k_spec.into_iter().map(String::from).collect(),
            source_problem_id: "p".into(),
            cluster: None,
        };
        assert!(detect_saturation(&state("q"), &state("q"), &mode(vec![], vec![])));
        assert!(!detect_saturation(&state("q"), &state("q"), &mode(vec!["k"], vec![])));
        assert!(!detect_saturation(&state("q"), &state("q2"), &mode(vec![], vec![])));
    }

    #[test]
    fn max_chain_steps_caps_extraction() {
        let source = source(DifficultyLabel::Partial, vec!["a", "b", "c", "d", "e"]);
        let mock = scripted_mock(&source, None);
        let cfg = ExtractionConfig {
            window_length: 2,
            max_chain_steps: Some(1),
        };
        let chain = extract_chain(&mock, &opts(), &source, &cfg).unwrap();
        assert_eq!(chain.modes.len(), 1);
    }
}
