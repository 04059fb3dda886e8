use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::comm::{parse_comm_response, route_messages, CommConfig, CommTurn, GraphViolation, Message, Scheduling};
use super::context::{Author, ContextWindow, Cursor, Segment, Stage};
use super::parse::{parse_action, ParseRules};
use super::prompt::{
    attrition_private_facts, attrition_rules, build_system_prompt, matrix_rules, MultiAgentContext, SystemPromptSpec,
    TaskContext, ACTION_FORMAT,
};
use super::templates::TemplateSet;
use super::ProtocolError;
use crate::agents::Backend;
use crate::equilibrium::SolutionConcept;
use crate::game::{woa_step, Decision, GameInstance, JointAction, WoAOutcome, WoAState};
use crate::memory::{chunk_text_from, Chunk, ChunkSource, EmbedderSpec, SharedStore};
use crate::PlayerId;

/// How a player's context carries over between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    /// Fresh window every iteration, no memory.
    Reflex,
    /// Fresh window; whole transcripts are chunked into the store.
    RagFull,
    /// Fresh window; only recall summaries enter the store.
    RagRecall,
    /// One ever-growing window.
    #[default]
    Cumulative,
}

impl MemoryMode {
    pub const ALL: [MemoryMode; 4] = [MemoryMode::Reflex, MemoryMode::RagFull, MemoryMode::RagRecall, MemoryMode::Cumulative];

    pub fn uses_store(self) -> bool {
        matches!(self, MemoryMode::RagFull | MemoryMode::RagRecall)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryMode::Reflex => "reflex",
            MemoryMode::RagFull => "rag_full",
            MemoryMode::RagRecall => "rag_recall",
            MemoryMode::Cumulative => "cumulative",
        }
    }
}

fn k_system() -> usize {
    3
}
fn k_action() -> usize {
    2
}
fn chunk_max() -> usize {
    96
}
fn chunk_overlap() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySettings {
    #[serde(default)]
    pub mode: MemoryMode,
    /// Records retrieved into the system prompt.
    #[serde(default = "k_system")]
    pub k_system: usize,
    /// Records retrieved right before action selection.
    #[serde(default = "k_action")]
    pub k_action: usize,
    #[serde(default = "chunk_max")]
    pub chunk_max_tokens: usize,
    #[serde(default = "chunk_overlap")]
    pub chunk_overlap_tokens: usize,
    #[serde(default)]
    pub embedder: EmbedderSpec,
}

impl Default for MemorySettings {
    fn default() -> Self {
        MemorySettings::new(MemoryMode::default())
    }
}

impl MemorySettings {
    pub fn new(mode: MemoryMode) -> Self {
        MemorySettings {
            mode,
            k_system: k_system(),
            k_action: k_action(),
            chunk_max_tokens: chunk_max(),
            chunk_overlap_tokens: chunk_overlap(),
            embedder: EmbedderSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IterationConfig {
    pub memory: MemorySettings,
    /// Whether the game is repeated; recall only runs in repeated play.
    pub repeated: bool,
}

/// One player's prompt spec and context window.
#[derive(Debug, Clone)]
pub struct PlayerSeat {
    pub spec: SystemPromptSpec,
    pub window: ContextWindow,
    last_system: Option<String>,
}

impl PlayerSeat {
    pub fn new(spec: SystemPromptSpec) -> Self {
        PlayerSeat { spec, window: ContextWindow::new(), last_system: None }
    }
}

/// One isolated world instance: a game, the communication protocol, each
/// player's seat and the memory partitions tagged with `world_id`.
pub struct World {
    pub world_id: String,
    pub game: GameInstance,
    pub comm: CommConfig,
    pub seats: Vec<PlayerSeat>,
    pub memory: Option<SharedStore>,
    pub templates: Arc<TemplateSet>,
    pub seed: u64,
    next_iteration: u32,
}

impl World {
    pub fn new(world_id: impl Into<String>, game: GameInstance, comm: CommConfig, specs: [SystemPromptSpec; 2], seed: u64) -> Self {
        World {
            world_id: world_id.into(),
            game,
            comm,
            seats: specs.into_iter().map(PlayerSeat::new).collect(),
            memory: None,
            templates: Arc::new(TemplateSet::default()),
            seed,
            next_iteration: 1,
        }
    }

    pub fn with_memory(mut self, store: SharedStore) -> Self {
        self.memory = Some(store);
        self
    }

    pub fn with_templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = templates;
        self
    }

    /// Number of the next iteration to be played.
    pub fn next_iteration(&self) -> u32 {
        self.next_iteration
    }

    /// The standard prompt spec for `player`.
    pub fn prompt_spec(
        templates: &TemplateSet,
        game: &GameInstance,
        player: PlayerId,
        target: SolutionConcept,
        masked: bool,
    ) -> Result<SystemPromptSpec, ProtocolError> {
        let role_definition = templates.render("player_role", &[("player", &player.to_string()), ("game", &game.name())])?;
        let (rules, private_facts) = match game {
            GameInstance::Matrix(g) => (matrix_rules(g, player), Vec::new()),
            GameInstance::Attrition(w) => (attrition_rules(w, player), attrition_private_facts(w, player)),
        };
        Ok(SystemPromptSpec {
            role_definition,
            task: TaskContext {
                rules,
                action_labels: game.labels(player),
                format_instruction: format!("When asked for an action, {ACTION_FORMAT}."),
                private_facts,
            },
            masked,
            multi_agent: MultiAgentContext { target, guidance: None },
            memory_context: String::new(),
            mechanism_rules: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub actions: [usize; 2],
    pub labels: [String; 2],
    /// Whether the first answer parsed cleanly.
    pub parse_ok: [bool; 2],
    /// Whether the default or forfeit action was substituted.
    pub fallback: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub world_id: String,
    pub iteration: u32,
    pub steps: Vec<StepRecord>,
    /// Final joint action (the last period's decisions in a war).
    pub joint: JointAction,
    pub payoffs: [f64; 2],
    pub woa: Option<WoAOutcome>,
    /// Segments each player's window gained during this iteration.
    pub transcripts: Vec<Vec<Segment>>,
    pub summaries: Vec<Option<String>>,
    /// Window totals at the end of the iteration.
    pub tokens: Vec<usize>,
    pub violations: Vec<GraphViolation>,
    pub parse_failures: [u32; 2],
}

fn num(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

struct Chain<'a> {
    world: &'a mut World,
    agents: &'a mut [Box<dyn Backend>],
    iteration: u32,
    violations: Vec<GraphViolation>,
}

impl Chain<'_> {
    fn ask(&mut self, p: usize, stage: Stage, prompt: String, at: Cursor) -> Result<String, ProtocolError> {
        let seat = &mut self.world.seats[p];
        seat.window.push(stage, Author::Environment, prompt, false, at);
        let reply = self.agents[p]
            .respond(&seat.window, stage)
            .map_err(|source| ProtocolError::BackendFailure { player: PlayerId(p), source })?;
        seat.window.push(stage, Author::Player(PlayerId(p)), reply.clone(), true, at);
        Ok(reply)
    }

    fn open(&mut self, config: &IterationConfig) -> Result<(), ProtocolError> {
        let mode = config.memory.mode;
        for p in 0..self.world.seats.len() {
            let base = {
                let seat = &mut self.world.seats[p];
                if mode != MemoryMode::Cumulative {
                    seat.window.clear();
                }
                seat.spec.memory_context.clear();
                build_system_prompt(&seat.spec)
            };
            if mode.uses_store() {
                let hits = self.retrieve(p, &base, config.memory.k_system, &config.memory.embedder)?;
                self.world.seats[p].spec.memory_context = hits.join("\n");
            }
            let seat = &mut self.world.seats[p];
            let rendered = build_system_prompt(&seat.spec);
            if seat.window.is_empty() || seat.last_system.as_deref() != Some(rendered.as_str()) {
                seat.window.push(Stage::System, Author::Environment, rendered.clone(), false, Cursor::new(self.iteration, 1));
                seat.last_system = Some(rendered);
            }
        }
        Ok(())
    }

    fn retrieve(&self, p: usize, query: &str, k: usize, embedder: &EmbedderSpec) -> Result<Vec<String>, ProtocolError> {
        let Some(store) = &self.world.memory else { return Ok(Vec::new()) };
        if k == 0 {
            return Ok(Vec::new());
        }
        let hits = store.retrieve(PlayerId(p), &self.world.world_id, query, k, embedder)?;
        Ok(hits.into_iter().map(|(r, _)| r.chunk.text.trim().to_string()).collect())
    }

    fn situation(&self, p: usize, step: u32, state: Option<&WoAState>) -> String {
        let me = PlayerId(p);
        match state {
            None => format!("STATE: iteration={}\nYou are {me}; choose your action for this round.", self.iteration),
            Some(s) => {
                let mut text = format!(
                    "STATE: iteration={}; period={step}\nNobody has surrendered yet. Your accumulated loss is {}.",
                    self.iteration,
                    num(s.accumulated_loss[p])
                );
                if !s.theta.is_empty() {
                    let theta: Vec<String> = s.theta.iter().map(|x| num(*x)).collect();
                    text.push_str(&format!(" Public state: [{}].", theta.join(", ")));
                }
                text
            }
        }
    }

    fn thinking(&mut self, step: u32, state: Option<&WoAState>) -> Result<(), ProtocolError> {
        for p in 0..self.world.seats.len() {
            let situation = self.situation(p, step, state);
            let prompt = self.world.templates.render("thinking", &[("situation", &situation)])?;
            self.ask(p, Stage::Thinking, prompt, Cursor::new(self.iteration, step))?;
        }
        Ok(())
    }

    fn comm_prompt(&self, p: usize, round: u32) -> Result<Option<String>, ProtocolError> {
        let targets = self.world.comm.graph.targets(PlayerId(p));
        if targets.is_empty() {
            return Ok(None);
        }
        let names: Vec<String> = targets.iter().map(|t| t.to_string()).collect();
        Ok(Some(self.world.templates.render("comm", &[("round", &round.to_string()), ("recipients", &names.join(", "))])?))
    }

    fn deliver(&mut self, messages: &[Message], round: u32, step: u32) -> Result<(), ProtocolError> {
        let delivery = route_messages(messages, &self.world.comm, round);
        self.violations.extend(delivery.violations);
        for (r, inbox) in delivery.inboxes.into_iter().enumerate() {
            for m in inbox {
                let text = self.world.templates.render(
                    "message",
                    &[("sender", &m.sender.to_string()), ("round", &round.to_string()), ("text", &m.text)],
                )?;
                if let Some(seat) = self.world.seats.get_mut(r) {
                    seat.window.push(Stage::Comm, Author::Player(m.sender), text, false, Cursor::new(self.iteration, step).with_round(round));
                }
            }
        }
        Ok(())
    }

    fn communicate(&mut self, step: u32) -> Result<(), ProtocolError> {
        let comm = self.world.comm.clone();
        let order = comm.order();
        for round in 1..=comm.rounds {
            let at = Cursor::new(self.iteration, step).with_round(round);
            let mut pending = Vec::new();
            for &p in &order {
                let Some(prompt) = self.comm_prompt(p.index(), round)? else { continue };
                let reply = self.ask(p.index(), Stage::Comm, prompt, at)?;
                if let CommTurn::Send(m) = parse_comm_response(&reply, p, round, &comm) {
                    match comm.scheduling {
                        Scheduling::Simultaneous => pending.push(m),
                        Scheduling::Sequential(_) => self.deliver(&[m], round, step)?,
                    }
                }
            }
            self.deliver(&pending, round, step)?;
        }
        Ok(())
    }

    fn choose(&mut self, p: usize, step: u32, state: Option<&WoAState>, config: &IterationConfig) -> Result<(usize, bool, bool), ProtocolError> {
        let me = PlayerId(p);
        let at = Cursor::new(self.iteration, step);
        let labels = self.world.game.labels(me);
        let default = match self.world.game {
            GameInstance::Attrition(_) => Some(Decision::Continue.label().to_string()),
            GameInstance::Matrix(_) => None,
        };
        let rules = ParseRules { admissible_actions: labels.clone(), format_instruction: ACTION_FORMAT.to_string(), default_action: default };
        let situation = self.situation(p, step, state);

        if config.memory.mode.uses_store() {
            let hits = self.retrieve(p, &situation, config.memory.k_action, &config.memory.embedder)?;
            if !hits.is_empty() {
                let text = self.world.templates.render("memory_action", &[("memory", &hits.join("\n"))])?;
                self.world.seats[p].window.push(Stage::Action, Author::Environment, text, false, at);
            }
        }
        let admissible = labels.join(", ");
        let prompt = self.world.templates.render(
            "action",
            &[("situation", &situation), ("admissible", &admissible), ("format", ACTION_FORMAT)],
        )?;
        let reply = self.ask(p, Stage::Action, prompt, at)?;
        let first = parse_action(&reply, &rules);
        if let Ok(a) = &first {
            if a.parse_ok {
                return Ok((a.index, true, false));
            }
        }
        debug!(player = %me, "unparseable action, restating the format");
        let retry = self.world.templates.render("action_retry", &[("admissible", &admissible), ("format", ACTION_FORMAT)])?;
        let reply = self.ask(p, Stage::Action, retry, at)?;
        match parse_action(&reply, &rules) {
            Ok(a) if a.parse_ok => Ok((a.index, false, false)),
            Ok(a) => Ok((a.index, false, true)),
            Err(_) => {
                warn!(world = %self.world.world_id, player = %me, iteration = self.iteration, "action forfeited to index 0");
                Ok((0, false, true))
            }
        }
    }

    fn reflect(&mut self, step: u32, outcome_lines: [String; 2]) -> Result<(), ProtocolError> {
        let reflection = self.world.templates.render("reflection", &[])?;
        for (p, line) in outcome_lines.into_iter().enumerate() {
            self.ask(p, Stage::Reflection, format!("{line}\n{reflection}"), Cursor::new(self.iteration, step))?;
        }
        Ok(())
    }
}

/// Run one iteration: thinking, communication, action selection and
/// reflection (once per period in a war), then recall when summaries feed
/// memory in repeated play.
pub fn run_iteration(
    world: &mut World,
    agents: &mut [Box<dyn Backend>],
    config: &IterationConfig,
) -> Result<IterationRecord, ProtocolError> {
    if agents.len() != world.seats.len() {
        return Err(ProtocolError::InvalidConfig(format!("{} agents for {} players", agents.len(), world.seats.len())));
    }
    world.comm.validate().map_err(ProtocolError::InvalidConfig)?;
    let iteration = world.next_iteration;
    world.next_iteration += 1;
    let mut chain = Chain { world, agents, iteration, violations: Vec::new() };
    chain.open(config)?;
    let start: Vec<usize> = chain
        .world
        .seats
        .iter()
        .map(|s| s.window.segments().iter().rposition(|seg| seg.iteration < iteration).map_or(0, |i| i + 1))
        .collect();

    let mut steps = Vec::new();
    let mut parse_failures = [0u32; 2];
    let (joint, payoffs, woa) = match chain.world.game.clone() {
        GameInstance::Matrix(game) => {
            chain.thinking(1, None)?;
            chain.communicate(1)?;
            let mut rec = StepRecord { step: 1, actions: [0; 2], labels: Default::default(), parse_ok: [true; 2], fallback: [false; 2] };
            for p in 0..2 {
                let (a, ok, fb) = chain.choose(p, 1, None, config)?;
                rec.actions[p] = a;
                rec.parse_ok[p] = ok;
                rec.fallback[p] = fb;
                rec.labels[p] = game.label(PlayerId(p), a).to_string();
                parse_failures[p] += u32::from(!ok);
            }
            let joint = JointAction::new(rec.actions[0], rec.actions[1]);
            let payoffs = game.payoff(joint)?;
            let lines = [0, 1].map(|p| {
                let me = PlayerId(p);
                chain
                    .world
                    .templates
                    .render(
                        "outcome_matrix",
                        &[
                            ("iteration", &iteration.to_string()),
                            ("own", &rec.labels[p]),
                            ("opponent", &rec.labels[me.opponent().index()]),
                            ("payoff", &num(payoffs[p])),
                        ],
                    )
            });
            let [l0, l1] = lines;
            chain.reflect(1, [l0?, l1?])?;
            steps.push(rec);
            (joint, payoffs, None)
        }
        GameInstance::Attrition(cfg) => {
            let mut state = WoAState::initial(&cfg);
            let noise_seed = chain.world.seed ^ u64::from(iteration).wrapping_mul(0xD6E8_FEB8_6659_FD93);
            loop {
                let t = state.t;
                chain.thinking(t, Some(&state))?;
                chain.communicate(t)?;
                let mut rec = StepRecord { step: t, actions: [0; 2], labels: Default::default(), parse_ok: [true; 2], fallback: [false; 2] };
                for p in 0..2 {
                    let (a, ok, fb) = chain.choose(p, t, Some(&state), config)?;
                    rec.actions[p] = a;
                    rec.parse_ok[p] = ok;
                    rec.fallback[p] = fb;
                    rec.labels[p] = Decision::from_index(a).label().to_string();
                    parse_failures[p] += u32::from(!ok);
                }
                let decisions = rec.actions.map(Decision::from_index);
                let (next, outcome) = woa_step(&state, &cfg, decisions, noise_seed)?;
                let mut lines = Vec::new();
                for p in 0..2 {
                    let me = PlayerId(p);
                    let (status, payoff) = match &outcome {
                        None => ("ongoing", -next.accumulated_loss[p]),
                        Some(o) => (
                            match o.winner {
                                None => "mutual_surrender",
                                Some(w) if w == me => "won",
                                Some(_) => "lost",
                            },
                            o.payoffs[p],
                        ),
                    };
                    lines.push(chain.world.templates.render(
                        "outcome_woa",
                        &[
                            ("iteration", &iteration.to_string()),
                            ("period", &t.to_string()),
                            ("own", &rec.labels[p]),
                            ("opponent", &rec.labels[me.opponent().index()]),
                            ("status", status),
                            ("payoff", &num(payoff)),
                        ],
                    )?);
                }
                let [l0, l1]: [String; 2] = lines.try_into().expect("two players");
                chain.reflect(t, [l0, l1])?;
                let joint = JointAction::new(rec.actions[0], rec.actions[1]);
                steps.push(rec);
                state = next;
                if let Some(o) = outcome {
                    break (joint, o.payoffs, Some(o));
                }
            }
        }
    };

    let mut summaries = vec![None; 2];
    let mode = config.memory.mode;
    let last_step = steps.last().map_or(1, |s| s.step);
    if mode == MemoryMode::RagRecall && config.repeated {
        for (p, slot) in summaries.iter_mut().enumerate() {
            let templates = chain.world.templates.clone();
            let seat = &mut chain.world.seats[p];
            let summary = recall_summarize(PlayerId(p), &mut seat.window, chain.agents[p].as_mut(), &templates, iteration, last_step)?;
            if let Some(store) = &chain.world.memory {
                let chunk = Chunk::whole(&summary, ChunkSource { stage: Stage::Recall, iteration });
                store.insert(PlayerId(p), &chain.world.world_id, chunk, &config.memory.embedder)?;
            }
            *slot = Some(summary);
        }
    } else if mode == MemoryMode::RagFull {
        if let Some(store) = chain.world.memory.clone() {
            for p in 0..2 {
                let text = chain.world.seats[p]
                    .window
                    .segments_of(iteration)
                    .filter(|s| s.stage != Stage::System)
                    .map(|s| s.text.as_str())
                    .collect::<Vec<_>>()
                    .join("\n");
                let source = ChunkSource { stage: Stage::Reflection, iteration };
                for chunk in chunk_text_from(&text, config.memory.chunk_max_tokens, config.memory.chunk_overlap_tokens, source) {
                    store.insert(PlayerId(p), &chain.world.world_id, chunk, &config.memory.embedder)?;
                }
            }
        }
    }

    let world = chain.world;
    let transcripts: Vec<Vec<Segment>> = world.seats.iter().zip(&start).map(|(s, &i)| s.window.segments()[i..].to_vec()).collect();
    Ok(IterationRecord {
        world_id: world.world_id.clone(),
        iteration,
        steps,
        joint,
        payoffs,
        woa,
        transcripts,
        summaries,
        tokens: world.seats.iter().map(|s| s.window.total_tokens()).collect(),
        violations: chain.violations,
        parse_failures,
    })
}

/// Ask `player` for its one-line structured summary of the iteration just
/// played; the summary text is returned and also kept in the window.
pub fn recall_summarize(
    player: PlayerId,
    window: &mut ContextWindow,
    backend: &mut dyn Backend,
    templates: &TemplateSet,
    iteration: u32,
    step: u32,
) -> Result<String, ProtocolError> {
    let at = Cursor::new(iteration, step);
    let prompt = templates.render("recall", &[("iteration", &iteration.to_string())])?;
    window.push(Stage::Recall, Author::Environment, prompt, false, at);
    let reply = backend.respond(window, Stage::Recall).map_err(|source| ProtocolError::BackendFailure { player, source })?;
    let summary = reply
        .lines()
        .rev()
        .find(|l| l.trim_start().starts_with("SUMMARY:"))
        .unwrap_or(reply.as_str())
        .trim()
        .to_string();
    window.push(Stage::Recall, Author::Player(player), reply, true, at);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{BackendSpec, FixedScript, ScriptedStrategy};
    use crate::game::{GameKind, GameSpec, PayoffParams, WoAConfig};
    use crate::memory::MemoryStore;

    fn world(game: GameInstance, comm: CommConfig) -> World {
        let t = TemplateSet::default();
        let specs = [PlayerId::A, PlayerId::B].map(|p| World::prompt_spec(&t, &game, p, SolutionConcept::PureNash, false).unwrap());
        World::new("w0", game, comm, specs, 7)
    }

    fn pd() -> GameInstance {
        GameSpec::matrix(GameKind::PrisonersDilemma, PayoffParams::default()).build().unwrap()
    }

    fn scripted(a: ScriptedStrategy, b: ScriptedStrategy) -> Vec<Box<dyn Backend>> {
        vec![BackendSpec::scripted(a).build(0, None).unwrap(), BackendSpec::scripted(b).build(1, None).unwrap()]
    }

    fn comm_segments(w: &World, p: usize) -> (usize, usize) {
        let segs = w.seats[p].window.segments();
        let sent = segs.iter().filter(|s| s.stage == Stage::Comm && s.generated).count();
        let received = segs.iter().filter(|s| s.stage == Stage::Comm && matches!(s.author, Author::Player(q) if q.index() != p)).count();
        (sent, received)
    }

    #[test]
    fn no_comm_segments_when_disabled() {
        let mut w = world(pd(), CommConfig::silent(2));
        let mut agents = scripted(ScriptedStrategy::TitForTat, ScriptedStrategy::TitForTat);
        let rec = run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap();
        assert!(rec.transcripts.iter().flatten().all(|s| s.stage != Stage::Comm));
        assert_eq!(rec.joint, JointAction::new(0, 0));
        assert_eq!(rec.payoffs, [2.0, 2.0]);
    }

    #[test]
    fn two_simultaneous_rounds() {
        let mut w = world(pd(), CommConfig::with_rounds(2, 2));
        let mut agents = scripted(ScriptedStrategy::TitForTat, ScriptedStrategy::GrimTrigger);
        run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap();
        for p in 0..2 {
            let (sent, received) = comm_segments(&w, p);
            assert!(sent <= 2 && received <= 2);
            assert_eq!((sent, received), (2, 2));
            assert!(w.seats[p].window.stage_order_holds());
        }
    }

    #[test]
    fn sequential_delivery_is_immediate() {
        let comm = CommConfig { scheduling: Scheduling::Sequential(vec![PlayerId::A, PlayerId::B]), ..CommConfig::with_rounds(2, 1) };
        let mut w = world(pd(), comm);
        let mut agents = scripted(ScriptedStrategy::TitForTat, ScriptedStrategy::TitForTat);
        run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap();
        let segs = w.seats[1].window.segments();
        let got = segs.iter().position(|s| s.stage == Stage::Comm && s.author == Author::Player(PlayerId::A)).unwrap();
        let replied = segs.iter().position(|s| s.stage == Stage::Comm && s.generated).unwrap();
        assert!(got < replied);
        // A spoke first, so B's message reaches A only after A's turn.
        let segs = w.seats[0].window.segments();
        let replied = segs.iter().position(|s| s.stage == Stage::Comm && s.generated).unwrap();
        let got = segs.iter().position(|s| s.stage == Stage::Comm && s.author == Author::Player(PlayerId::B)).unwrap();
        assert!(replied < got);
    }

    #[test]
    fn reflection_after_every_period() {
        let game = GameSpec::Attrition(WoAConfig::classic(5.0, 2.0, 0.5, 30)).build().unwrap();
        let mut w = world(game, CommConfig::silent(2));
        let mut agents = scripted(ScriptedStrategy::WoAThreshold { surrender_at_t: 2 }, ScriptedStrategy::WoAThreshold { surrender_at_t: 5 });
        let rec = run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap();
        let o = rec.woa.unwrap();
        assert_eq!((o.period, o.winner), (2, Some(PlayerId::B)));
        assert_eq!(rec.steps.len(), 2);
        for p in 0..2 {
            let segs = &rec.transcripts[p];
            for step in 1..=2 {
                let action = segs.iter().rposition(|s| s.step == step && s.stage == Stage::Action).unwrap();
                let refl = segs.iter().rposition(|s| s.step == step && s.stage == Stage::Reflection && s.generated).unwrap();
                assert!(action < refl);
            }
        }
    }

    #[test]
    fn parse_retry_then_forfeit() {
        let mut w = world(pd(), CommConfig::silent(2));
        let a: Box<dyn Backend> = Box::new(FixedScript::new(
            ["think", "I dunno", "ACTION: Defect", "ok"].map(String::from).to_vec(),
        ));
        let b: Box<dyn Backend> = Box::new(FixedScript::new(["think", "hmm", "still no", "ok"].map(String::from).to_vec()));
        let mut agents = vec![a, b];
        let rec = run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap();
        let s = &rec.steps[0];
        assert_eq!(s.actions, [1, 0]);
        assert_eq!(s.parse_ok, [false, false]);
        assert_eq!(s.fallback, [false, true]);
        assert_eq!(rec.parse_failures, [1, 1]);
    }

    #[test]
    fn backend_failure_is_wrapped() {
        let mut w = world(pd(), CommConfig::silent(2));
        let mut agents: Vec<Box<dyn Backend>> = vec![Box::new(FixedScript::new(vec![])), Box::new(FixedScript::new(vec![]))];
        let err = run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap_err();
        assert!(matches!(err, ProtocolError::BackendFailure { player: PlayerId(0), .. }));
    }

    #[test]
    fn deterministic_transcripts() {
        let run = || {
            let mut w = world(pd(), CommConfig::with_rounds(2, 1));
            let mut agents = scripted(ScriptedStrategy::UniformRandom { seed: 3 }, ScriptedStrategy::TitForTat);
            (0..3).map(|_| run_iteration(&mut w, &mut agents, &IterationConfig::default()).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(serde_json::to_string(&run()).unwrap(), serde_json::to_string(&run()).unwrap());
    }

    #[test]
    fn recall_summaries_enter_memory() {
        let store = MemoryStore::shared(256);
        let mut w = world(pd(), CommConfig::silent(2)).with_memory(store.clone());
        let mut agents = scripted(ScriptedStrategy::AlwaysAction { index: 1 }, ScriptedStrategy::TitForTat);
        let config = IterationConfig { memory: MemorySettings::new(MemoryMode::RagRecall), repeated: true };
        let r1 = run_iteration(&mut w, &mut agents, &config).unwrap();
        assert_eq!(r1.summaries[0].as_deref(), Some("SUMMARY: iteration=1; action=Defect; opponent=Cooperate; payoff=3; note=always_1"));
        let r2 = run_iteration(&mut w, &mut agents, &config).unwrap();
        assert_eq!(store.partition_len(PlayerId::B, "w0"), 2);
        // B recalled A's defection from memory alone.
        assert_eq!(r2.joint, JointAction::new(1, 1));
        assert!(w.seats[1].window.segments()[0].text.contains("SUMMARY: iteration=1"));
    }

    #[test]
    fn cumulative_grows_reflex_does_not() {
        let totals = |mode| {
            let mut w = world(pd(), CommConfig::with_rounds(2, 1));
            let mut agents = scripted(ScriptedStrategy::TitForTat, ScriptedStrategy::GrimTrigger);
            let config = IterationConfig { memory: MemorySettings::new(mode), repeated: true };
            (0..4).map(|_| run_iteration(&mut w, &mut agents, &config).unwrap().tokens[0]).collect::<Vec<_>>()
        };
        let c = totals(MemoryMode::Cumulative);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
        let r = totals(MemoryMode::Reflex);
        assert!(r.iter().all(|x| *x == r[0]));
    }
}
