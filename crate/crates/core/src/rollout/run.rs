//! Rollout execution and judging.

use super::prompts::{
    inference_schema, judge_schema, render_inference_user, render_judge_user,
    INFERENCE_SYSTEM_PROMPT, JUDGE_SYSTEM_PROMPT,
};
use super::RolloutError;
use crate::extract::ChatOptions;
use crate::gateway::{
    complete_chat, doc_bool, doc_string, doc_string_list, parse_structured_output, ChatProvider,
    Rejection,
};
use crate::model::{DifficultyLabel, ProblemState, Rollout, RolloutBundle, Verdict};

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    pub count: usize,
    pub chat: ChatOptions,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            count: 3,
            chat: ChatOptions::default(),
        }
    }
}

/// Run `count` independent completions of the inference prompt. Each
/// response is parsed; unparseable responses come back with verdict
/// `unparsed` (counted as incorrect by labeling).
pub fn run_rollouts(
    chat: &dyn ChatProvider,
    question: &ProblemState,
    cfg: &RolloutConfig,
) -> Result<Vec<Rollout>, RolloutError> {
    let user = render_inference_user(&question.question);
    let exchange = cfg.chat.exchange(INFERENCE_SYSTEM_PROMPT, &user);
    let mut rollouts = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let response = complete_chat(chat, &exchange, cfg.chat.retry)?;
        let rollout = match parse_structured_output(&response.response_text, &inference_schema()) {
            Ok(doc) => Rollout {
                response: response.response_text.clone(),
                parsed_steps: doc_string_list(&doc, "steps"),
                parsed_final_answer: doc_string(&doc, "final_answer"),
                verdict: Verdict::Incorrect, // judged below
            },
            Err(_) => Rollout {
                response: response.response_text.clone(),
                parsed_steps: Vec::new(),
                parsed_final_answer: String::new(),
                verdict: Verdict::Unparsed,
            },
        };
        rollouts.push(rollout);
    }
    Ok(rollouts)
}

#[derive(Debug, Clone)]
pub struct JudgeVerdict {
    pub is_correct: bool,
    pub raw_response: String,
}

#[derive(Debug, Clone)]
pub struct JudgeOutcome {
    pub verdict: JudgeVerdict,
    /// Present when the judge's own output failed to parse; the verdict
    /// is then incorrect by fiat and the reason is logged upstream.
    pub parse_rejection: Option<Rejection>,
}

/// Ask the judge whether a predicted answer is semantically correct.
pub fn judge_rollout(
    chat: &dyn ChatProvider,
    opts: &ChatOptions,
    question: &str,
    reference_answer: &str,
    rationale: &str,
    predicted: &str,
) -> Result<JudgeOutcome, RolloutError> {
    let user = render_judge_user(question, reference_answer, rationale, predicted);
    let response = complete_chat(chat, &opts.exchange(JUDGE_SYSTEM_PROMPT, &user), opts.retry)?;
    match parse_structured_output(&response.response_text, &judge_schema()) {
        Ok(doc) => Ok(JudgeOutcome {
            verdict: JudgeVerdict {
                is_correct: doc_bool(&doc, "is_correct"),
                raw_response: response.response_text,
            },
            parse_rejection: None,
        }),
        Err(rejection) => Ok(JudgeOutcome {
            verdict: JudgeVerdict {
                is_correct: false,
                raw_response: response.response_text,
            },
            parse_rejection: Some(rejection),
        }),
    }
}

/// all_correct iff every verdict is correct; all_wrong iff none is.
pub fn label_difficulty(verdicts: &[Verdict]) -> Result<DifficultyLabel, RolloutError> {
    DifficultyLabel::from_verdicts(verdicts).map_err(|_| RolloutError::EmptyVerdicts)
}

/// Full rollout-and-judge pass for one question: run the rollouts, judge
/// each parsed one, label, and assemble the bundle. Returns the bundle
/// plus the number of judge parse failures.
pub fn rollout_question(
    solver: &dyn ChatProvider,
    judge: &dyn ChatProvider,
    cfg: &RolloutConfig,
    question_id: &str,
    state: &ProblemState,
    source_dataset_id: &str,
) -> Result<(RolloutBundle, u32), RolloutError> {
    let mut rollouts = run_rollouts(solver, state, cfg)?;
    let rationale = state.solution_steps.join(" | ");
    let mut judge_rejections = 0u32;
    for rollout in &mut rollouts {
        if rollout.verdict == Verdict::Unparsed {
            continue;
        }
        let outcome = judge_rollout(
            judge,
            &cfg.chat,
            &state.question,
            &state.answer,
            &rationale,
            &rollout.parsed_final_answer,
        )?;
        if outcome.parse_rejection.is_some() {
            judge_rejections += 1;
        }
        rollout.verdict = if outcome.verdict.is_correct {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        };
    }
    let verdicts: Vec<Verdict> = rollouts.iter().map(|r| r.verdict).collect();
    let label = label_difficulty(&verdicts)?;
    let bundle = RolloutBundle {
        question_id: question_id.to_string(),
        state: state.clone(),
        rollouts,
        label,
        source_dataset_id: source_dataset_id.to_string(),
        rescue_rollouts: Vec::new(),
    };
    Ok((bundle, judge_rejections))
}
