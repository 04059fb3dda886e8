//! Training signals for external trainers: Q/A items, action supervision,
//! format rewards, normalized evaluator feedback, preference pairs and
//! negative samples, with a JSON-lines exporter.

mod export;
mod feedback;
mod negative;
mod preference;
mod qa;
mod supervision;

pub use export::{export_dataset, import_dataset, DatasetHeader, DatasetItem, DatasetKind, DATASET_SCHEMA_VERSION};
pub use feedback::{build_evaluator_context, evaluate, normalize_feedback, parse_score, score_batch, Evaluator, FeedbackScore};
pub use negative::gen_negative_samples;
pub use preference::{joint_prefer, prefers, PreferenceLabel, PreferencePair, Side};
pub use qa::{grade_answer, normalize_answer, ContextLeakCheck, QAItem, QuestionKind};
pub use qa::{gen_qa_items, qa_candidates};
pub use supervision::{gen_action_supervision, ActionSupervisionItem, Conditioning};

use thiserror::Error;

use crate::equilibrium::{EquilibriumError, SolutionConcept};
use crate::protocol::{exact_format, parse_action, ParseRules};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("no question template survives the leakage check")]
    ExhaustedTemplates,
    #[error("{0:?} has no profiles in this game")]
    UnachievableConcept(SolutionConcept),
    #[error("every candidate profile belongs to the target set")]
    EmptyComplement,
    #[error("operation needs a matrix game")]
    UnsupportedGame,
    #[error("invalid feedback batch: {0}")]
    InvalidBatch(String),
    #[error("dataset mixes kinds {expected:?} and {found:?}")]
    MixedKinds { expected: DatasetKind, found: DatasetKind },
    #[error("evaluator produced no score line")]
    MissingScore,
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// +1 iff the response parses without fallback and its answer line is
/// exactly `ACTION: <label>`; −1 otherwise.
pub fn check_format(response: &str, rules: &ParseRules) -> i32 {
    let parsed = matches!(parse_action(response, rules), Ok(p) if p.parse_ok);
    if parsed && exact_format(response, rules) {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_rewards() {
        let r = ParseRules::new(&["Cooperate", "Defect"], "ACTION: <label>", None).unwrap();
        assert_eq!(check_format("ACTION: Defect", &r), 1);
        assert_eq!(check_format("I defect!!", &r), -1);
        assert_eq!(check_format("CHOICE: Defect", &r), -1);
        assert_eq!(check_format("ACTION: Cooperate or Defect", &r), -1);
    }
}
