use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crossplay::{Pairing, PoolMember};
use super::RunnerError;
use crate::agents::BackendSpec;
use crate::equilibrium::SolutionConcept;
use crate::game::{GameInstance, GameSpec, RepetitionSpec};
use crate::mechanism::MechanismConstraints;
use crate::memory::EmbedderSpec;
use crate::protocol::{CommConfig, CommGraph, MemoryMode, MemorySettings, Scheduling};
use crate::PlayerId;

/// One experiment, usually read from a TOML file.
///
/// ```toml
/// name = "ipd"
/// worlds = 16
/// trials = 1
/// seed = 7
///
/// [game]
/// type = "matrix"
/// kind = "PrisonersDilemma"
/// params = { a = 0, b = 1, c = 2, d = 3 }
///
/// [repetition]
/// mode = "fixed"
/// n = 5
///
/// [[players]]
/// backend = { kind = "scripted", strategy = { type = "tit_for_tat" } }
///
/// [[players]]
/// backend = { kind = "scripted", strategy = { type = "grim_trigger" } }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub game: GameSpec,
    #[serde(default)]
    pub repetition: RepetitionSpec,
    #[serde(default)]
    pub comm: CommSection,
    #[serde(default)]
    pub memory: MemorySection,
    /// Hide rules and payoffs from the system prompts.
    #[serde(default)]
    pub mask_task_context: bool,
    pub players: Vec<PlayerConfig>,
    #[serde(default)]
    pub mechanism: MechanismSection,
    /// Independent world runs.
    #[serde(default = "one")]
    pub worlds: usize,
    /// Independent instances per world run; each plays one sampled
    /// repetition count.
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Global cap on concurrent remote requests.
    #[serde(default = "in_flight")]
    pub max_in_flight: usize,
    /// Replace one player's backend in selected world instances.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub world_overrides: Vec<WorldOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossplay: Option<CrossPlaySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_name() -> String {
    "experiment".into()
}

fn one() -> usize {
    1
}

fn in_flight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CommSection {
    #[serde(default)]
    pub rounds: u32,
    #[serde(default)]
    pub scheduling: Scheduling,
    /// Directed edges; the complete graph when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(PlayerId, PlayerId)>>,
}

impl CommSection {
    pub fn build(&self, players: usize) -> CommConfig {
        let graph = match &self.edges {
            Some(e) => CommGraph::from_edges(players, e.iter().copied()),
            None => CommGraph::complete(players),
        };
        CommConfig { rounds: self.rounds, scheduling: self.scheduling.clone(), graph }
    }
}

/// Memory mode plus optional retrieval knobs; unset knobs take the
/// library defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    #[serde(default)]
    pub mode: MemoryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_system: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_action: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_max_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_overlap_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<EmbedderSpec>,
}

impl MemorySection {
    fn has_knobs(&self) -> bool {
        self.k_system.is_some()
            || self.k_action.is_some()
            || self.chunk_max_tokens.is_some()
            || self.chunk_overlap_tokens.is_some()
            || self.embedder.is_some()
    }

    pub fn settings(&self) -> MemorySettings {
        let mut s = MemorySettings::new(self.mode);
        if let Some(k) = self.k_system {
            s.k_system = k;
        }
        if let Some(k) = self.k_action {
            s.k_action = k;
        }
        if let Some(m) = self.chunk_max_tokens {
            s.chunk_max_tokens = m;
        }
        if let Some(o) = self.chunk_overlap_tokens {
            s.chunk_overlap_tokens = o;
        }
        if let Some(e) = &self.embedder {
            s.embedder = e.clone();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub backend: BackendSpec,
    /// Defaults to pure Nash for matrix games and SPE for wars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SolutionConcept>,
}

impl PlayerConfig {
    pub fn new(backend: BackendSpec) -> Self {
        PlayerConfig { backend, target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub constraints: MechanismConstraints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designer: Option<BackendSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldOverride {
    pub world: usize,
    /// Every trial of the world when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
    pub player: PlayerId,
    pub backend: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossPlaySection {
    pub mode: Pairing,
    pub pool: Vec<PoolMember>,
    #[serde(default)]
    pub partners: Vec<PoolMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<serde_json::Value>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunnerError> {
    let text = std::fs::read_to_string(path)?;
    let config = ExperimentConfig::from_toml(&text)?;
    Ok(config)
}

impl ExperimentConfig {
    /// A config with library defaults for everything but the game and the
    /// two backends.
    pub fn new(game: GameSpec, backends: [BackendSpec; 2]) -> Self {
        ExperimentConfig {
            name: default_name(),
            game,
            repetition: RepetitionSpec::Single,
            comm: CommSection::default(),
            memory: MemorySection::default(),
            mask_task_context: false,
            players: backends.into_iter().map(PlayerConfig::new).collect(),
            mechanism: MechanismSection::default(),
            worlds: 1,
            trials: 1,
            seed: 0,
            max_in_flight: in_flight(),
            world_overrides: Vec::new(),
            templates_dir: None,
            output_dir: None,
            crossplay: None,
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let invalid = |m: String| Err(RunnerError::ConfigInvalid(m));
        if self.players.len() != 2 {
            return invalid(format!("exactly one backend per player is required, got {}", self.players.len()));
        }
        for (i, p) in self.players.iter().enumerate() {
            if let Err(e) = p.backend.validate() {
                return invalid(format!("player {}: {e}", PlayerId(i)));
            }
        }
        for o in &self.world_overrides {
            if o.player.index() >= 2 || o.world >= self.worlds || o.trial.is_some_and(|t| t >= self.trials) {
                return invalid(format!("world override for {} at world {} is out of range", o.player, o.world));
            }
            if let Err(e) = o.backend.validate() {
                return invalid(format!("world override at world {}: {e}", o.world));
            }
        }
        let game = self.game.build().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        if let (GameInstance::Attrition(_), Some(SolutionConcept::MixedNash | SolutionConcept::ParetoEfficient)) =
            (&game, self.players.iter().find_map(|p| p.target))
        {
            return invalid("wars support only SPE-style targets".into());
        }
        self.repetition.validate().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        self.comm.build(2).validate().map_err(RunnerError::ConfigInvalid)?;
        if self.memory.mode == MemoryMode::Reflex && self.memory.has_knobs() {
            return invalid("memory mode reflex takes no retrieval knobs".into());
        }
        let m = self.memory.settings();
        if m.chunk_max_tokens == 0 || m.chunk_overlap_tokens >= m.chunk_max_tokens {
            return invalid("chunk overlap must be smaller than a positive chunk size".into());
        }
        if self.worlds == 0 || self.trials == 0 {
            return invalid("worlds and trials must be positive".into());
        }
        if self.max_in_flight == 0 {
            return invalid("max_in_flight must be positive".into());
        }
        if self.mechanism.enabled {
            match &self.mechanism.designer {
                None => return invalid("mechanism design enabled without a designer backend".into()),
                Some(d) => d.validate().map_err(|e| RunnerError::ConfigInvalid(format!("designer: {e}")))?,
            }
            let c = &self.mechanism.constraints;
            if c.players != 2 || c.min_rounds > c.max_rounds {
                return invalid("mechanism constraints are inconsistent".into());
            }
        }
        Ok(())
    }

    /// Backend of `player` in instance (`world`, `trial`).
    pub fn backend_for(&self, world: usize, trial: usize, player: PlayerId) -> &BackendSpec {
        self.world_overrides
            .iter()
            .rev()
            .find(|o| o.world == world && o.trial.is_none_or(|t| t == trial) && o.player == player)
            .map_or(&self.players[player.index()].backend, |o| &o.backend)
    }

    /// Target concept of `player`.
    pub fn target(&self, player: PlayerId) -> SolutionConcept {
        self.players[player.index()].target.unwrap_or(match self.game {
            GameSpec::Matrix(_) => SolutionConcept::PureNash,
            GameSpec::Attrition(_) => SolutionConcept::Spe,
        })
    }

    /// The part of the config that determines results: everything except
    /// where outputs go and the cross-play/sweep sections.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig { output_dir: None, crossplay: None, sweep: None, ..self.clone() }
    }

    /// Hex prefix of the sha256 of the canonical config, stamped into
    /// every output.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("configs serialize");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
