//! Inference and judge prompts with their output schemas.

use crate::gateway::{FieldKind, SchemaSpec};

pub const INFERENCE_SYSTEM_PROMPT: &str = "\
You are an expert problem solver. Think step by step
and produce a JSON object.
Output format (strict JSON):
{\"steps\": [\"step 1\", \"step 2\", ...],
 \"final_answer\": \"concise final result\"}
Rules:
- Each step must be non-trivial and task-specific.
- Avoid macro steps or trivial restatements.
- Keep steps granular but meaningful.
- Do not add extra keys; do not wrap in Markdown.";

pub const JUDGE_SYSTEM_PROMPT: &str = "\
You are a strict grader. For each problem, you receive
the question, the authoritative ground-truth answer,
and a short rationale explaining why that answer is
correct. You also receive a model's predicted answer.
Decide whether the predicted answer should be counted
as correct based on the question and the rationale.
Return JSON: {\"is_correct\": true/false}.

Guidance:
- Judge semantic correctness, not exact string match.
- Use the rationale to understand what counts as a
  valid answer for this question.
- If the predicted answer misses the required outcome,
  mark false.
- Do not add extra keys or text.";

pub fn inference_schema() -> SchemaSpec {
    SchemaSpec::new(&[
        ("steps", FieldKind::StringList),
        ("final_answer", FieldKind::String),
    ])
}

/// Exactly the key `is_correct`, nothing else.
pub fn judge_schema() -> SchemaSpec {
    SchemaSpec::new(&[("is_correct", FieldKind::Boolean)]).strict()
}

pub fn render_inference_user(question: &str) -> String {
    format!("Problem: {question}")
}

pub fn render_judge_user(
    question: &str,
    ground_truth: &str,
    rationale: &str,
    predicted: &str,
) -> String {
    format!(
        "Question: {question}\n\
         Ground-truth answer: {ground_truth}\n\
         Rationale: {rationale}\n\
         Predicted answer: {predicted}\n\
         Respond ONLY with the JSON object."
    )
}
