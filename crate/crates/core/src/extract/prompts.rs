//! Prompt rendering and output schemas for the two extraction calls.

use crate::gateway::{FieldKind, SchemaSpec};
use crate::model::{ProblemState, SolutionWindow};

pub const SEED_SYSTEM_PROMPT: &str = "\
You are a problem designer and reverse-engineering specialist. You work \
backwards from the final window of a verified solution: the seed question \
you produce must be solvable using exactly the steps in that window.

Apply dependency isolation:
1. Identify every value or quantity the tail window uses but does not derive (values computed in earlier steps).
2. Convert each such value into an explicit given in the seed question.
3. Formulate a self-contained question whose complete solution requires exactly the steps in the tail window.
4. Verify the seed question is independently solvable without any external information.

Output format (strict JSON):
{\"seed_question\": \"...\",
 \"answer\": \"...\",
 \"solution_steps\": [\"...\"]}
Rules:
- Do not add extra keys; do not wrap in Markdown.";

pub const EVOLUTION_SYSTEM_PROMPT: &str = "\
You are a problem designer performing dependency absorption. Given an \
intermediate question and the next solution window to absorb, remove one \
explicit given so the solver must derive it, adding exactly one layer of \
reasoning complexity.

Apply these steps:
1. Identify which explicit given in the current question is the result of the computation in the window to absorb.
2. Remove that given from the problem statement and modify the question so that the solver must derive the value.
3. Ensure the evolved question remains well-defined and solvable.
4. Extract the thought mode describing the added requirement: S_sum (one-sentence summary of the transformation type), S_det (the specific modification made), K_gen (general, transferable knowledge required), K_spec (problem-specific parameters involved).

Output format (strict JSON):
{\"Q_next\": \"...\",
 \"answer\": \"...\",
 \"solution_steps\": [\"...\"],
 \"S_sum\": \"...\",
 \"S_det\": \"...\",
 \"K_gen\": [\"...\"],
 \"K_spec\": [\"...\"]}
Rules:
- Do not add extra keys; do not wrap in Markdown.";

pub fn seed_schema() -> SchemaSpec {
    SchemaSpec::new(&[
        ("seed_question", FieldKind::String),
        ("answer", FieldKind::String),
        ("solution_steps", FieldKind::StringList),
    ])
}

pub fn evolution_schema() -> SchemaSpec {
    SchemaSpec::new(&[
        ("Q_next", FieldKind::String),
        ("answer", FieldKind::String),
        ("solution_steps", FieldKind::StringList),
        ("S_sum", FieldKind::String),
        ("S_det", FieldKind::String),
        ("K_gen", FieldKind::StringList),
        ("K_spec", FieldKind::StringList),
    ])
}

fn numbered(steps: &[String]) -> String {
    if steps.is_empty() {
        return "(none)".to_string();
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n")
}

/// User message for seed generation: subject, original problem, final
/// answer, full solution steps, and the current tail window.
pub fn render_seed_prompt(
    subject: &str,
    original: &ProblemState,
    tail_window: &SolutionWindow,
    earlier_steps: &[String],
) -> String {
    format!(
        "Subject: {subject}\n\
         Original problem: {question}\n\
         Final answer: {answer}\n\
         Full solution steps:\n{all}\n\
         Tail window (the seed must be solvable using exactly these steps):\n{tail}\n\
         Earlier steps (computed before the window; convert their results into explicit givens):\n{earlier}",
        question = original.question,
        answer = original.answer,
        all = numbered(&original.solution_steps),
        tail = numbered(&tail_window.steps),
        earlier = numbered(earlier_steps),
    )
}

/// User message for one evolution step: the original target problem, the
/// current intermediate question, the window to absorb, and the upstream
/// steps that remain.
pub fn render_evolution_prompt(
    original: &ProblemState,
    current: &ProblemState,
    next_window: &SolutionWindow,
    remaining_steps: &[String],
) -> String {
    format!(
        "Original target problem: {target}\n\
         Original final answer: {target_answer}\n\
         Current intermediate question: {question}\n\
         Current answer: {answer}\n\
         Current solution steps:\n{steps}\n\
         Window to absorb (the evolved question must require deriving what these steps compute):\n{window}\n\
         Upstream solution steps (still unabsorbed):\n{remaining}",
        target = original.question,
        target_answer = original.answer,
        question = current.question,
        answer = current.answer,
        steps = numbered(&current.solution_steps),
        window = numbered(&next_window.steps),
        remaining = numbered(remaining_steps),
    )
}
