//! The prompt-chaining protocol: system prompts, context windows,
//! communication, action parsing and the per-iteration state machine.

pub mod comm;
pub mod context;
pub mod iteration;
pub mod parse;
pub mod prompt;
pub mod templates;
pub mod tokenizer;
pub mod transcript;

pub use comm::{parse_comm_response, route_messages, CommConfig, CommGraph, CommTurn, Delivery, GraphViolation, Message, Scheduling};
pub use context::{Author, ContextWindow, Cursor, Segment, Stage};
pub use iteration::{recall_summarize, run_iteration, IterationConfig, IterationRecord, MemoryMode, MemorySettings, PlayerSeat, World};
pub use parse::{exact_format, parse_action, ParseRules, ParsedAction};
pub use prompt::{
    attrition_private_facts, attrition_rules, build_system_prompt, matrix_rules, MultiAgentContext, SystemPromptSpec,
    TaskContext, ACTION_FORMAT, MEMORY_HEADER, MULTI_AGENT_HEADER, ROLE_HEADER, RULES_HEADER, TASK_HEADER,
};
pub use templates::{Template, TemplateSet};
pub use tokenizer::{count_tokens, ApproxTokenizer, Tokenizer};
pub use transcript::{read_transcript, write_transcript, TranscriptLine};

use thiserror::Error;

use crate::agents::AgentError;
use crate::game::GameError;
use crate::memory::MemoryError;
use crate::PlayerId;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid parse rules: {0}")]
    InvalidRules(String),
    #[error("response could not be parsed and no default action is configured: {response:?}")]
    UnparseableNoDefault { response: String },
    #[error("backend failure for {player}: {source}")]
    BackendFailure {
        player: PlayerId,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
