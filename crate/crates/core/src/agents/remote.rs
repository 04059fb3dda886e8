use std::sync::Arc;
use std::thread;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{AgentError, Backend};
use crate::protocol::{Author, ContextWindow, Stage};

/// Fallback endpoint when a backend leaves `endpoint_url` empty.
pub const ENDPOINT_ENV: &str = "AGORA_ENDPOINT";
/// Bearer token for chat and embedding endpoints.
pub const API_KEY_ENV: &str = "AGORA_API_KEY";

fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    512
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    250
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSpec {
    #[serde(default)]
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Base delay of the exponential backoff, in milliseconds.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// When false the system turn is folded into the first user turn.
    #[serde(default = "yes")]
    pub system_role: bool,
}

impl RemoteSpec {
    pub fn new(endpoint_url: &str, model_name: &str) -> Self {
        RemoteSpec {
            endpoint_url: endpoint_url.to_string(),
            model_name: model_name.to_string(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            timeout: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            system_role: true,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.temperature >= 0.0) {
            return Err(AgentError::InvalidSpec("temperature must be nonnegative".into()));
        }
        if !(self.timeout > 0.0) {
            return Err(AgentError::InvalidSpec("timeout must be positive".into()));
        }
        if self.model_name.is_empty() {
            return Err(AgentError::InvalidSpec("model name is empty".into()));
        }
        Ok(())
    }

    pub fn endpoint(&self) -> Result<String, AgentError> {
        if !self.endpoint_url.is_empty() {
            return Ok(self.endpoint_url.clone());
        }
        std::env::var(ENDPOINT_ENV).map_err(|_| AgentError::InvalidSpec(format!("no endpoint and {ENDPOINT_ENV} unset")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: &str) -> Self {
        ChatMessage { role: role.to_string(), content: content.to_string() }
    }
}

/// Convert a window into chat turns: system segments become the system
/// turn, the owner's generated text becomes assistant turns, everything
/// else is user input. Adjacent turns with the same role are merged.
pub fn transcript_messages(context: &ContextWindow, system_role: bool) -> Vec<ChatMessage> {
    let mut system = Vec::new();
    let mut turns: Vec<ChatMessage> = Vec::new();
    for seg in context.segments() {
        if seg.stage == Stage::System && !seg.generated {
            system.push(seg.text.as_str());
            continue;
        }
        let role = match seg.author {
            Author::Player(_) | Author::Designer if seg.generated => "assistant",
            _ => "user",
        };
        match turns.last_mut() {
            Some(last) if last.role == role => {
                last.content.push_str("\n\n");
                last.content.push_str(&seg.text);
            }
            _ => turns.push(ChatMessage::new(role, &seg.text)),
        }
    }
    let system = system.join("\n\n");
    if system.is_empty() {
        return turns;
    }
    if system_role {
        turns.insert(0, ChatMessage::new("system", &system));
    } else {
        match turns.first_mut() {
            Some(first) if first.role == "user" => first.content = format!("{system}\n\n{}", first.content),
            _ => turns.insert(0, ChatMessage::new("user", &system)),
        }
    }
    turns
}

fn retryable(err: &AgentError) -> bool {
    match err {
        AgentError::HttpError { status, .. } => *status == 429 || *status >= 500,
        AgentError::Timeout | AgentError::Transport(_) => true,
        _ => false,
    }
}

fn once(spec: &RemoteSpec, endpoint: &str, body: &Value) -> Result<String, AgentError> {
    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(spec.timeout)))
        .http_status_as_error(false)
        .build()
        .new_agent();
    let mut req = agent.post(endpoint);
    if let Ok(key) = std::env::var(API_KEY_ENV) {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => AgentError::Timeout,
        other => AgentError::Transport(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| AgentError::Transport(e.to_string()))?;
    if !(200..300).contains(&status) {
        return Err(AgentError::HttpError { status, body: text });
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| AgentError::MalformedResponse("missing choices[0].message.content".into()))
}

/// POST one chat completion, retrying 429, 5xx and transport failures with
/// exponential backoff. Other client errors are returned immediately.
pub fn chat_request(spec: &RemoteSpec, messages: &[ChatMessage]) -> Result<String, AgentError> {
    spec.validate()?;
    let endpoint = spec.endpoint()?;
    let body = json!({
        "model": spec.model_name,
        "messages": messages,
        "temperature": spec.temperature,
        "max_tokens": spec.max_tokens,
    });
    let mut attempt = 0;
    loop {
        match once(spec, &endpoint, &body) {
            Ok(text) => return Ok(text),
            Err(e) if retryable(&e) && attempt < spec.max_retries => {
                let delay = spec.backoff_ms.saturating_mul(1 << attempt.min(16));
                warn!(attempt, delay_ms = delay, error = %e, "chat request failed, retrying");
                thread::sleep(Duration::from_millis(delay));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Counting semaphore bounding concurrent remote requests.
#[derive(Debug, Clone)]
pub struct InFlightLimiter {
    inner: Arc<(Mutex<usize>, Condvar)>,
    max: usize,
}

pub struct InFlightGuard<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        InFlightLimiter { inner: Arc::new((Mutex::new(0), Condvar::new())), max: max.max(1) }
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let (lock, cv) = &*self.inner;
        let mut n = lock.lock();
        while *n >= self.max {
            cv.wait(&mut n);
        }
        *n += 1;
        InFlightGuard(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.inner.0.lock()
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let (lock, cv) = &*self.0.inner;
        *lock.lock() -= 1;
        cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    spec: RemoteSpec,
    limiter: Option<InFlightLimiter>,
}

impl RemoteBackend {
    pub fn new(spec: RemoteSpec, limiter: Option<InFlightLimiter>) -> Self {
        RemoteBackend { spec, limiter }
    }
}

impl Backend for RemoteBackend {
    fn respond(&mut self, context: &ContextWindow, stage: Stage) -> Result<String, AgentError> {
        let messages = transcript_messages(context, self.spec.system_role);
        debug!(%stage, turns = messages.len(), "chat request");
        let _guard = self.limiter.as_ref().map(InFlightLimiter::acquire);
        chat_request(&self.spec, &messages)
    }

    fn describe(&self) -> String {
        format!("remote {} at {}", self.spec.model_name, self.spec.endpoint_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::mock::{MockEndpoint, MockReply};
    use crate::protocol::Cursor;
    use crate::PlayerId;

    fn window() -> ContextWindow {
        let mut w = ContextWindow::new();
        let at = Cursor::new(1, 1);
        w.push(Stage::System, Author::Environment, "You are Player A.", false, at);
        w.push(Stage::Thinking, Author::Environment, "Think.", false, at);
        w.push(Stage::Thinking, Author::Player(PlayerId::A), "Thinking...", true, at);
        w.push(Stage::Action, Author::Environment, "Act.", false, at);
        w
    }

    fn spec(url: &str) -> RemoteSpec {
        RemoteSpec { backoff_ms: 1, ..RemoteSpec::new(url, "m") }
    }

    #[test]
    fn folds_system_turn() {
        let with = transcript_messages(&window(), true);
        assert_eq!(with.iter().map(|m| m.role.as_str()).collect::<Vec<_>>(), ["system", "user", "assistant", "user"]);
        let without = transcript_messages(&window(), false);
        assert!(without.iter().all(|m| m.role != "system"));
        assert!(without[0].content.starts_with("You are Player A.\n\nThink."));
    }

    #[test]
    fn echo_round_trip() {
        let mock = MockEndpoint::echo();
        let out = chat_request(&spec(&mock.url()), &[ChatMessage::new("user", "ping")]).unwrap();
        assert_eq!(out, "ping");
    }

    #[test]
    fn retries_429_then_succeeds() {
        let mock = MockEndpoint::scripted(vec![MockReply::status(429), MockReply::status(429), MockReply::content("ok")]);
        assert_eq!(chat_request(&spec(&mock.url()), &[ChatMessage::new("user", "x")]).unwrap(), "ok");
        assert_eq!(mock.requests().len(), 3);
    }

    #[test]
    fn no_retry_on_client_error() {
        let mock = MockEndpoint::scripted(vec![MockReply::status(400), MockReply::content("never")]);
        let err = chat_request(&spec(&mock.url()), &[ChatMessage::new("user", "x")]).unwrap_err();
        assert!(matches!(err, AgentError::HttpError { status: 400, .. }));
        assert_eq!(mock.requests().len(), 1);
    }

    #[test]
    fn malformed_body() {
        let mock = MockEndpoint::scripted(vec![MockReply::raw(200, "{\"choices\": []}")]);
        assert!(matches!(chat_request(&spec(&mock.url()), &[]), Err(AgentError::MalformedResponse(_))));
    }

    #[test]
    fn limiter_caps_concurrency() {
        let l = InFlightLimiter::new(2);
        let a = l.acquire();
        let _b = l.acquire();
        assert_eq!(l.in_flight(), 2);
        drop(a);
        assert_eq!(l.in_flight(), 1);
    }
}
