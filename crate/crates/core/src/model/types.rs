use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("field `{0}` must be non-empty")]
    EmptyField(&'static str),
    #[error("chain has {modes} modes but {evolved} evolved states")]
    ChainLengthMismatch { modes: usize, evolved: usize },
    #[error("state {index} has step_index {found}, expected {expected}")]
    BadStepIndex {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("entry {0} follows an incompatible entry")]
    NonMonotoneCompatibility(usize),
    #[error("incompatible first step requires fallback_used and exactly one entry")]
    BadFallback,
    #[error("stored label {stored:?} does not match verdicts ({derived:?})")]
    LabelMismatch {
        stored: DifficultyLabel,
        derived: DifficultyLabel,
    },
    #[error("duplicate mode id `{0}`")]
    DuplicateModeId(String),
    #[error("empty verdict list")]
    EmptyVerdicts,
    #[error("sft record roles must be system/user/assistant")]
    BadSftRoles,
}

/// One atomic knowledge-reasoning transformation: a high-level summary,
/// the concrete modification, and the general vs. problem-specific
/// knowledge it requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtMode {
    pub id: String,
    #[serde(rename = "S_sum")]
    pub s_sum: String,
    #[serde(rename = "S_det")]
    pub s_det: String,
    #[serde(rename = "K_gen")]
    pub k_gen: Vec<String>,
    #[serde(rename = "K_spec")]
    pub k_spec: Vec<String>,
    pub source_problem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

impl ThoughtMode {
    /// Summary and detail must carry content; the knowledge lists may be
    /// empty (that is the saturation signal, handled downstream).
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.trim().is_empty() {
            return Err(ModelError::EmptyField("id"));
        }
        if self.s_sum.trim().is_empty() {
            return Err(ModelError::EmptyField("S_sum"));
        }
        if self.s_det.trim().is_empty() {
            return Err(ModelError::EmptyField("S_det"));
        }
        Ok(())
    }
}

/// One node in a question evolution sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemState {
    pub question: String,
    pub answer: String,
    pub solution_steps: Vec<String>,
    pub step_index: usize,
}

impl ProblemState {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.question.trim().is_empty() {
            return Err(ModelError::EmptyField("question"));
        }
        if self.answer.trim().is_empty() {
            return Err(ModelError::EmptyField("answer"));
        }
        Ok(())
    }

    /// States produced by extraction or synthesis must also carry steps.
    pub fn validate_with_steps(&self) -> Result<(), ModelError> {
        self.validate()?;
        if self.solution_steps.is_empty() {
            return Err(ModelError::EmptyField("solution_steps"));
        }
        Ok(())
    }
}

/// A contiguous slice of solution steps. `tail_offset` counts windows
/// from the end of the solution: 0 is the last window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionWindow {
    pub steps: Vec<String>,
    pub tail_offset: usize,
}

/// One reverse-engineered problem: seed state, ordered thought modes,
/// and the per-step evolved states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub source_problem_id: String,
    pub source_dataset_id: String,
    pub seed: ProblemState,
    pub modes: Vec<ThoughtMode>,
    pub evolved: Vec<ProblemState>,
}

impl ChainRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.modes.len() != self.evolved.len() {
            return Err(ModelError::ChainLengthMismatch {
                modes: self.modes.len(),
                evolved: self.evolved.len(),
            });
        }
        if self.seed.step_index != 0 {
            return Err(ModelError::BadStepIndex {
                index: 0,
                found: self.seed.step_index,
                expected: 0,
            });
        }
        for (i, state) in self.evolved.iter().enumerate() {
            if state.step_index != i + 1 {
                return Err(ModelError::BadStepIndex {
                    index: i,
                    found: state.step_index,
                    expected: i + 1,
                });
            }
        }
        Ok(())
    }

    /// The state an evolution step started from: the seed for step 0,
    /// otherwise the previous evolved state.
    pub fn state_before(&self, step: usize) -> &ProblemState {
        if step == 0 {
            &self.seed
        } else {
            &self.evolved[step - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStep {
    pub mode_id: String,
    pub is_compatible: bool,
    pub state: ProblemState,
    pub cluster: usize,
}

/// One synthesis run over a seed question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub seed_problem_id: String,
    pub source_dataset_id: String,
    pub steps: Vec<GenerationStep>,
    pub model_provenance: String,
    pub fallback_used: bool,
    pub rng_seed: u64,
}

impl GenerationRecord {
    /// Compatibility flags must form a prefix of `true` values optionally
    /// followed by one `false`; an incompatible first step must be a
    /// single fallback entry.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 && !self.steps[i - 1].is_compatible {
                return Err(ModelError::NonMonotoneCompatibility(i));
            }
            let _ = step;
        }
        if let Some(first) = self.steps.first() {
            if !first.is_compatible && (!self.fallback_used || self.steps.len() != 1) {
                return Err(ModelError::BadFallback);
            }
        }
        Ok(())
    }

    /// Latest valid question state, if any step was recorded.
    pub fn final_state(&self) -> Option<&ProblemState> {
        self.steps.last().map(|s| &s.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
    Unparsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyLabel {
    AllCorrect,
    Partial,
    AllWrong,
}

impl DifficultyLabel {
    /// Pure function of the verdicts: all correct, none correct, or mixed.
    pub fn from_verdicts(verdicts: &[Verdict]) -> Result<Self, ModelError> {
        if verdicts.is_empty() {
            return Err(ModelError::EmptyVerdicts);
        }
        let correct = verdicts.iter().filter(|v| **v == Verdict::Correct).count();
        Ok(if correct == verdicts.len() {
            DifficultyLabel::AllCorrect
        } else if correct == 0 {
            DifficultyLabel::AllWrong
        } else {
            DifficultyLabel::Partial
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub response: String,
    pub parsed_steps: Vec<String>,
    pub parsed_final_answer: String,
    pub verdict: Verdict,
}

/// A generated (or source) question with its independent rollouts,
/// per-rollout judge verdicts, and difficulty label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBundle {
    pub question_id: String,
    pub state: ProblemState,
    pub rollouts: Vec<Rollout>,
    pub label: DifficultyLabel,
    pub source_dataset_id: String,
    /// Optional secondary-channel rollouts (e.g. a thinking-mode rescue
    /// pass). Never emitted by this pipeline; honored on input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rescue_rollouts: Vec<Rollout>,
}

impl RolloutBundle {
    pub fn validate(&self) -> Result<(), ModelError> {
        let verdicts: Vec<Verdict> = self.rollouts.iter().map(|r| r.verdict).collect();
        let derived = DifficultyLabel::from_verdicts(&verdicts)?;
        if derived != self.label {
            return Err(ModelError::LabelMismatch {
                stored: self.label,
                derived,
            });
        }
        Ok(())
    }

    pub fn first_correct_rollout(&self) -> Option<&Rollout> {
        self.rollouts.iter().find(|r| r.verdict == Verdict::Correct)
    }

    pub fn first_correct_rescue(&self) -> Option<&Rollout> {
        self.rescue_rollouts
            .iter()
            .find(|r| r.verdict == Verdict::Correct)
    }
}

pub const SFT_SYSTEM_TEXT: &str = "You are a helpful assistant";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SftMessage {
    role: String,
    content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SftWire {
    messages: Vec<SftMessage>,
}

/// A three-message supervised fine-tuning conversation. Serialized as
/// `{"messages": [{"role": ..., "content": ...}, ...]}` with roles
/// system/user/assistant in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SftWire", try_from = "SftWire")]
pub struct SftRecord {
    pub system_text: String,
    pub user_text: String,
    pub assistant_text: String,
}

impl From<SftRecord> for SftWire {
    fn from(r: SftRecord) -> Self {
        SftWire {
            messages: vec![
                SftMessage {
                    role: "system".into(),
                    content: r.system_text,
                },
                SftMessage {
                    role: "user".into(),
                    content: r.user_text,
                },
                SftMessage {
                    role: "assistant".into(),
                    content: r.assistant_text,
                },
            ],
        }
    }
}

impl TryFrom<SftWire> for SftRecord {
    type Error = ModelError;

    fn try_from(w: SftWire) -> Result<Self, ModelError> {
        let mut it = w.messages.into_iter();
        match (it.next(), it.next(), it.next(), it.next()) {
            (Some(s), Some(u), Some(a), None)
                if s.role == "system" && u.role == "user" && a.role == "assistant" =>
            {
                Ok(SftRecord {
                    system_text: s.content,
                    user_text: u.content,
                    assistant_text: a.content,
                })
            }
            _ => Err(ModelError::BadSftRoles),
        }
    }
}
