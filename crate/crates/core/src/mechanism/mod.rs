//! The mechanism designer: a non-playing role that reads every player's
//! transcript and may append global rules or reshape communication.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::info;

use crate::agents::{AgentError, Backend};
use crate::game::GameInstance;
use crate::protocol::{
    build_system_prompt, count_tokens, Author, CommConfig, CommGraph, ContextWindow, Cursor, ProtocolError, Stage,
    SystemPromptSpec, TemplateSet,
};
use crate::PlayerId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Intervention {
    GlobalRule(String),
    SetCommRounds(u32),
    SetCommGraph(Vec<(PlayerId, PlayerId)>),
}

impl Intervention {
    /// Content hash; equal interventions share an id.
    pub fn id(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("interventions serialize");
        let digest = Sha256::digest(&canonical);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The directive line that parses back to this intervention.
    pub fn directive(&self) -> String {
        match self {
            Intervention::GlobalRule(r) => format!("RULE: {r}"),
            Intervention::SetCommRounds(n) => format!("COMM_ROUNDS: {n}"),
            Intervention::SetCommGraph(edges) if edges.is_empty() => "COMM_GRAPH: none".to_string(),
            Intervention::SetCommGraph(edges) => {
                let e: Vec<String> = edges.iter().map(|(a, b)| format!("{}->{}", a.letter(), b.letter())).collect();
                format!("COMM_GRAPH: {}", e.join(", "))
            }
        }
    }
}

fn max_rules() -> usize {
    3
}
fn max_rule_tokens() -> usize {
    48
}
fn max_rounds() -> u32 {
    4
}
fn yes() -> bool {
    true
}
fn players() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismConstraints {
    #[serde(default = "max_rules")]
    pub max_rules_per_run: usize,
    #[serde(default = "max_rule_tokens")]
    pub max_rule_tokens: usize,
    #[serde(default)]
    pub min_rounds: u32,
    #[serde(default = "max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "yes")]
    pub graph_edits_allowed: bool,
    #[serde(default = "players")]
    pub players: usize,
}

impl Default for MechanismConstraints {
    fn default() -> Self {
        MechanismConstraints {
            max_rules_per_run: max_rules(),
            max_rule_tokens: max_rule_tokens(),
            min_rounds: 0,
            max_rounds: max_rounds(),
            graph_edits_allowed: true,
            players: players(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    EmptyRule,
    TooLong { tokens: usize, max: usize },
    OutOfBounds { value: u32, min: u32, max: u32 },
    TooManyRules { max: usize },
    GraphEditsDisallowed,
    InvalidGraph,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::EmptyRule => write!(f, "rule text is empty"),
            RejectReason::TooLong { tokens, max } => write!(f, "rule has {tokens} tokens, limit {max}"),
            RejectReason::OutOfBounds { value, min, max } => write!(f, "{value} outside [{min}, {max}]"),
            RejectReason::TooManyRules { max } => write!(f, "more than {max} rules"),
            RejectReason::GraphEditsDisallowed => write!(f, "graph edits are not allowed"),
            RejectReason::InvalidGraph => write!(f, "graph references unknown players or self-loops"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Check a single intervention against the constraints.
pub fn validate(intervention: &Intervention, constraints: &MechanismConstraints) -> Verdict {
    let reject = Verdict::Reject;
    match intervention {
        Intervention::GlobalRule(text) => {
            let tokens = count_tokens(text);
            if text.trim().is_empty() {
                reject(RejectReason::EmptyRule)
            } else if tokens > constraints.max_rule_tokens {
                reject(RejectReason::TooLong { tokens, max: constraints.max_rule_tokens })
            } else {
                Verdict::Accept
            }
        }
        Intervention::SetCommRounds(n) => {
            if (constraints.min_rounds..=constraints.max_rounds).contains(n) {
                Verdict::Accept
            } else {
                reject(RejectReason::OutOfBounds { value: *n, min: constraints.min_rounds, max: constraints.max_rounds })
            }
        }
        Intervention::SetCommGraph(edges) => {
            if !constraints.graph_edits_allowed {
                reject(RejectReason::GraphEditsDisallowed)
            } else if !CommGraph::from_edges(constraints.players, edges.iter().copied()).is_valid() {
                reject(RejectReason::InvalidGraph)
            } else {
                Verdict::Accept
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub text: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedDirectives {
    pub interventions: Vec<Intervention>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Read directives from a designer response: lines of the form `RULE:`,
/// `COMM_ROUNDS:` or `COMM_GRAPH:`. Other `WORD:` lines in capitals are
/// reported as unknown; prose is ignored.
pub fn parse_intervention(response: &str) -> ParsedDirectives {
    let mut out = ParsedDirectives::default();
    for (i, raw) in response.lines().enumerate() {
        let line = raw.trim().trim_start_matches(['-', '*']).trim();
        let Some((head, rest)) = line.split_once(':') else { continue };
        let head = head.trim();
        let rest = rest.trim();
        let diag = |problem: String| Diagnostic { line: i + 1, text: raw.to_string(), problem };
        match head {
            "RULE" => out.interventions.push(Intervention::GlobalRule(rest.to_string())),
            "COMM_ROUNDS" => match rest.parse() {
                Ok(n) => out.interventions.push(Intervention::SetCommRounds(n)),
                Err(_) => out.diagnostics.push(diag(format!("expected a nonnegative integer, got {rest:?}"))),
            },
            "COMM_GRAPH" => match parse_edges(rest) {
                Some(edges) => out.interventions.push(Intervention::SetCommGraph(edges)),
                None => out.diagnostics.push(diag(format!("unreadable edge list {rest:?}"))),
            },
            h if !h.is_empty() && h.chars().all(|c| c.is_ascii_uppercase() || c == '_') => {
                out.diagnostics.push(diag(format!("unknown directive {h}")))
            }
            _ => {}
        }
    }
    out
}

fn parse_edges(text: &str) -> Option<Vec<(PlayerId, PlayerId)>> {
    if text.eq_ignore_ascii_case("none") {
        return Some(Vec::new());
    }
    let letter = |s: &str| {
        let mut cs = s.trim().chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) => PlayerId::from_letter(c),
            _ => None,
        }
    };
    text.split(',')
        .filter(|e| !e.trim().is_empty())
        .map(|e| {
            let (a, b) = e.split_once("->")?;
            Some((letter(a)?, letter(b)?))
        })
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("intervention {0} was not validated")]
    NotValidated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub iteration: u32,
    pub id: String,
    pub intervention: Intervention,
    pub verdict: Verdict,
    pub applied: bool,
}

/// Per-world designer bookkeeping: what was accepted, what was applied.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MechanismState {
    validated: BTreeMap<String, Intervention>,
    applied: BTreeSet<String>,
    rules_accepted: usize,
    pub log: Vec<AuditEntry>,
}

impl MechanismState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validate and, on acceptance, remember the intervention for `apply`.
    /// Also enforces the per-run rule budget.
    pub fn admit(&mut self, intervention: &Intervention, constraints: &MechanismConstraints) -> Verdict {
        let id = intervention.id();
        if self.validated.contains_key(&id) {
            return Verdict::Accept;
        }
        let mut verdict = validate(intervention, constraints);
        if verdict.accepted() && matches!(intervention, Intervention::GlobalRule(_)) {
            if self.rules_accepted >= constraints.max_rules_per_run {
                verdict = Verdict::Reject(RejectReason::TooManyRules { max: constraints.max_rules_per_run });
            } else {
                self.rules_accepted += 1;
            }
        }
        if verdict.accepted() {
            self.validated.insert(id, intervention.clone());
        }
        verdict
    }

    pub fn is_validated(&self, intervention: &Intervention) -> bool {
        self.validated.contains_key(&intervention.id())
    }

    /// Apply a validated intervention. Returns whether anything changed;
    /// re-applying the same intervention is a no-op.
    pub fn apply(
        &mut self,
        intervention: &Intervention,
        comm: &mut CommConfig,
        specs: &mut [&mut SystemPromptSpec],
    ) -> Result<bool, MechanismError> {
        let id = intervention.id();
        if !self.validated.contains_key(&id) {
            return Err(MechanismError::NotValidated(id));
        }
        match intervention {
            Intervention::GlobalRule(text) => {
                if self.applied.contains(&id) {
                    return Ok(false);
                }
                for spec in specs.iter_mut() {
                    if !spec.mechanism_rules.iter().any(|r| r == text) {
                        spec.mechanism_rules.push(text.clone());
                    }
                }
            }
            Intervention::SetCommRounds(n) => {
                if comm.rounds == *n {
                    self.applied.insert(id);
                    return Ok(false);
                }
                comm.rounds = *n;
            }
            Intervention::SetCommGraph(edges) => {
                let graph = CommGraph::from_edges(comm.graph.players, edges.iter().copied());
                if comm.graph == graph {
                    self.applied.insert(id);
                    return Ok(false);
                }
                comm.graph = graph;
            }
        }
        self.applied.insert(id);
        Ok(true)
    }
}

/// Digest line for one segment; payoffs are hidden when they could reveal
/// private facts.
fn digest_line(seg: &crate::protocol::Segment, hide_payoffs: bool) -> String {
    let who = match seg.author {
        Author::Player(p) => p.to_string(),
        Author::Designer => "Designer".into(),
        Author::Environment => "Environment".into(),
    };
    let mut text = seg.text.trim().to_string();
    if hide_payoffs {
        text = text
            .lines()
            .map(|l| match l.find("payoff=") {
                Some(i) if l.trim_start().starts_with("OUTCOME:") || l.trim_start().starts_with("SUMMARY:") => {
                    let end = l[i..].find(';').map_or(l.len(), |j| i + j);
                    format!("{}payoff=hidden{}", &l[..i], &l[end..])
                }
                _ => l.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n");
    }
    format!("[{} | {}] {}", seg.stage, who, text)
}

/// The designer's window: a system prompt sharing the players' structure
/// with a designer role definition, then a digest of every transcript.
/// System prompts (holding private facts and memory) are never copied.
pub fn build_designer_context(
    players: &[(PlayerId, &ContextWindow)],
    player_spec: &SystemPromptSpec,
    game: &GameInstance,
    constraints: &MechanismConstraints,
    templates: &TemplateSet,
    iteration: u32,
) -> Result<ContextWindow, ProtocolError> {
    let role = templates.render(
        "designer_role",
        &[
            ("game", &game.name()),
            ("max_rules", &constraints.max_rules_per_run.to_string()),
            ("max_rule_tokens", &constraints.max_rule_tokens.to_string()),
            ("min_rounds", &constraints.min_rounds.to_string()),
            ("max_rounds", &constraints.max_rounds.to_string()),
            ("graph_edits", if constraints.graph_edits_allowed { "allowed" } else { "not allowed" }),
        ],
    )?;
    let spec = SystemPromptSpec { role_definition: role, ..player_spec.redacted() };
    let at = Cursor::new(iteration, 1);
    let mut w = ContextWindow::new();
    w.push(Stage::System, Author::Environment, build_system_prompt(&spec), false, at);
    let hide = spec.masked || matches!(game, GameInstance::Attrition(_));
    let mut digest = Vec::new();
    for (p, window) in players {
        let lines: Vec<String> = window
            .segments()
            .iter()
            .filter(|s| s.stage != Stage::System && s.stage != Stage::Recall)
            .map(|s| digest_line(s, hide))
            .collect();
        digest.push(format!("### Transcript of {p}\n{}", lines.join("\n")));
    }
    digest.push("Write your interventions now, one directive per line, or nothing to leave the game unchanged.".into());
    w.push(Stage::Reflection, Author::Environment, digest.join("\n\n"), false, at);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerRound {
    pub response: String,
    pub parsed: ParsedDirectives,
    pub entries: Vec<AuditEntry>,
}

/// One designer turn: build its context, ask, parse, validate, apply.
#[allow(clippy::too_many_arguments)]
pub fn designer_round(
    backend: &mut dyn Backend,
    state: &mut MechanismState,
    players: &[(PlayerId, &ContextWindow)],
    player_spec: &SystemPromptSpec,
    game: &GameInstance,
    constraints: &MechanismConstraints,
    templates: &TemplateSet,
    iteration: u32,
    comm: &mut CommConfig,
    specs: &mut [&mut SystemPromptSpec],
) -> Result<DesignerRound, DesignerError> {
    let context = build_designer_context(players, player_spec, game, constraints, templates, iteration)?;
    let response = backend.respond(&context, Stage::Action)?;
    let parsed = parse_intervention(&response);
    let mut entries = Vec::new();
    for iv in &parsed.interventions {
        let verdict = state.admit(iv, constraints);
        let applied = if verdict.accepted() { state.apply(iv, comm, specs)? } else { false };
        info!(id = %iv.id(), ?verdict, applied, "designer intervention");
        let entry = AuditEntry { iteration, id: iv.id(), intervention: iv.clone(), verdict, applied };
        state.log.push(entry.clone());
        entries.push(entry);
    }
    Ok(DesignerRound { response, parsed, entries })
}

#[derive(Debug, Error)]
pub enum DesignerError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("designer backend failed: {0}")]
    Backend(#[from] AgentError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[cfg(test)]
mod tests;
