//! Game environments: the classic 2×2 templates, repetition specs and the
//! War of Attrition.

mod attrition;
mod classic;
mod repetition;

pub use attrition::{
    woa_loss, woa_step, Decision, EvolvingParams, TerminationClass, WinnerPayoff, WoAConfig,
    WoAOutcome, WoAState, WoAVariant, COST_FLOOR,
};
pub use classic::{make_classic_game, GameKind, JointAction, MatrixSpec, NormalFormGame, PayoffParams};
pub use repetition::{sample_repetitions, RepetitionSpec};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("payoff ordering violated for {kind:?}: {detail}")]
    OrderingViolation { kind: GameKind, detail: String },
    #[error("action index out of range: ({row}, {col})")]
    IndexOutOfRange { row: usize, col: usize },
    #[error("invalid period {0}: periods start at 1")]
    InvalidPeriod(u32),
    #[error("game already reached a terminal state")]
    SteppedTerminalGame,
    #[error("operation requires the classic variant")]
    UnsupportedVariant,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

use serde::{Deserialize, Serialize};

use crate::PlayerId;

/// Declarative game description, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GameSpec {
    Matrix(MatrixSpec),
    Attrition(WoAConfig),
}

impl GameSpec {
    pub fn matrix(kind: GameKind, params: PayoffParams) -> Self {
        GameSpec::Matrix(MatrixSpec { kind, params })
    }

    pub fn build(&self) -> Result<GameInstance, GameError> {
        Ok(match self {
            GameSpec::Matrix(m) => GameInstance::Matrix(m.build()?),
            GameSpec::Attrition(w) => {
                w.validate()?;
                GameInstance::Attrition(w.clone())
            }
        })
    }
}

/// A validated, playable game.
#[derive(Debug, Clone, PartialEq)]
pub enum GameInstance {
    Matrix(NormalFormGame),
    Attrition(WoAConfig),
}

impl GameInstance {
    pub fn name(&self) -> String {
        match self {
            GameInstance::Matrix(g) => g.name(),
            GameInstance::Attrition(_) => "War of Attrition".to_string(),
        }
    }

    /// Action labels for `player`, index order.
    pub fn labels(&self, player: PlayerId) -> Vec<String> {
        match self {
            GameInstance::Matrix(g) => g.labels(player).to_vec(),
            GameInstance::Attrition(_) => Decision::LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn as_matrix(&self) -> Option<&NormalFormGame> {
        match self {
            GameInstance::Matrix(g) => Some(g),
            GameInstance::Attrition(_) => None,
        }
    }

    pub fn as_attrition(&self) -> Option<&WoAConfig> {
        match self {
            GameInstance::Attrition(w) => Some(w),
            GameInstance::Matrix(_) => None,
        }
    }
}
