//! Agent backends: remote chat-completions models, deterministic scripted
//! strategies and fixed replays.

pub mod mock;
mod remote;
mod scripted;

pub use remote::{chat_request, transcript_messages, ChatMessage, InFlightLimiter, RemoteBackend, RemoteSpec, API_KEY_ENV, ENDPOINT_ENV};
pub use scripted::{observed_history, scripted_woa, Observation, ScriptedBackend, ScriptedStrategy};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ContextWindow, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {status}")]
    HttpError { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fixed script exhausted")]
    ExhaustedScript,
    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),
    #[error("injected failure: {0}")]
    Injected(String),
}

/// Uniform contract for every stage of the chain. Implementations must not
/// rely on anything but their own state and the window they are handed.
pub trait Backend: Send {
    fn respond(&mut self, context: &ContextWindow, stage: Stage) -> Result<String, AgentError>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Remote(RemoteSpec),
    Scripted { strategy: ScriptedStrategy },
    FixedScript { responses: Vec<String> },
    /// Fails on every call; used to exercise failure isolation.
    Failing { message: String },
}

impl BackendSpec {
    pub fn scripted(strategy: ScriptedStrategy) -> Self {
        BackendSpec::Scripted { strategy }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            BackendSpec::Remote(r) => r.validate(),
            BackendSpec::Scripted { strategy } => strategy.validate(),
            _ => Ok(()),
        }
    }

    /// Instantiate for one world. `salt` decorrelates seeded strategies
    /// across worlds while keeping each world reproducible.
    pub fn build(&self, salt: u64, limiter: Option<InFlightLimiter>) -> Result<Box<dyn Backend>, AgentError> {
        self.validate()?;
        Ok(match self {
            BackendSpec::Remote(r) => Box::new(RemoteBackend::new(r.clone(), limiter)),
            BackendSpec::Scripted { strategy } => Box::new(ScriptedBackend::new(strategy.clone(), salt)),
            BackendSpec::FixedScript { responses } => Box::new(FixedScript::new(responses.clone())),
            BackendSpec::Failing { message } => Box::new(Failing(message.clone())),
        })
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, BackendSpec::Remote(_))
    }

    pub fn label(&self) -> String {
        match self {
            BackendSpec::Remote(r) => format!("remote:{}", r.model_name),
            BackendSpec::Scripted { strategy } => strategy.name(),
            BackendSpec::FixedScript { responses } => format!("fixed:{}", responses.len()),
            BackendSpec::Failing { .. } => "failing".into(),
        }
    }
}

/// Replays captured responses in order.
#[derive(Debug, Clone)]
pub struct FixedScript {
    responses: Vec<String>,
    next: usize,
}

impl FixedScript {
    pub fn new(responses: Vec<String>) -> Self {
        FixedScript { responses, next: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.next
    }
}

impl Backend for FixedScript {
    fn respond(&mut self, _context: &ContextWindow, _stage: Stage) -> Result<String, AgentError> {
        let r = self.responses.get(self.next).cloned().ok_or(AgentError::ExhaustedScript)?;
        self.next += 1;
        Ok(r)
    }

    fn describe(&self) -> String {
        format!("fixed script ({} responses)", self.responses.len())
    }
}

struct Failing(String);

impl Backend for Failing {
    fn respond(&mut self, _context: &ContextWindow, _stage: Stage) -> Result<String, AgentError> {
        Err(AgentError::Injected(self.0.clone()))
    }

    fn describe(&self) -> String {
        "failing backend".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_script_replays_then_exhausts() {
        let mut b = FixedScript::new(vec!["one".into(), "two".into()]);
        let w = ContextWindow::new();
        assert_eq!(b.respond(&w, Stage::Action).unwrap(), "one");
        assert_eq!(b.respond(&w, Stage::Action).unwrap(), "two");
        assert_eq!(b.respond(&w, Stage::Action), Err(AgentError::ExhaustedScript));
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = BackendSpec::scripted(ScriptedStrategy::TitForTat);
        let toml_text = toml::to_string(&spec).unwrap();
        assert_eq!(toml::from_str::<BackendSpec>(&toml_text).unwrap(), spec);
    }
}
