use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::metrics::{aggregate, iteration_metrics, TargetCheck};
use super::plots::emit_plots;
use super::{ExperimentConfig, RunMetrics, RunnerError, WorldMetrics, WorldStatus};
use crate::agents::{AgentError, Backend, BackendSpec, InFlightLimiter};
use crate::equilibrium::SolutionConcept;
use crate::game::{sample_repetitions, GameInstance};
use crate::mechanism::{designer_round, MechanismState};
use crate::memory::{MemoryStore, SharedStore};
use crate::protocol::{
    read_transcript, run_iteration, write_transcript, Author, ContextWindow, IterationConfig, SystemPromptSpec,
    TemplateSet, TranscriptLine, World,
};
use crate::PlayerId;

pub const TRANSCRIPT_FILE: &str = "transcripts.jsonl";
pub const DESIGNER_FILE: &str = "designer.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const MEMORY_DIR: &str = "memory";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DesignerLine {
    world_id: String,
    iteration: u32,
    response: String,
}

pub fn world_id(world: usize, trial: usize) -> String {
    format!("w{world}-t{trial}")
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one world instance, derived from the experiment seed.
pub fn world_seed(seed: u64, world: usize, trial: usize) -> u64 {
    splitmix(seed ^ splitmix(((world as u64) << 32) | trial as u64))
}

/// Where backends come from: the config, or recorded responses.
enum Source<'a> {
    Config,
    Replay { players: &'a BTreeMap<(String, PlayerId), Vec<String>>, designer: &'a BTreeMap<String, Vec<String>> },
}

impl Source<'_> {
    fn player(&self, cfg: &ExperimentConfig, at: (usize, usize), world: &str, p: PlayerId, salt: u64, limiter: &InFlightLimiter) -> Result<Box<dyn Backend>, AgentError> {
        match self {
            Source::Config => cfg.backend_for(at.0, at.1, p).build(salt, Some(limiter.clone())),
            Source::Replay { players, .. } => {
                let responses = players.get(&(world.to_string(), p)).cloned().unwrap_or_default();
                BackendSpec::FixedScript { responses }.build(salt, None)
            }
        }
    }

    fn designer(&self, cfg: &ExperimentConfig, world: &str, salt: u64, limiter: &InFlightLimiter) -> Result<Box<dyn Backend>, AgentError> {
        match self {
            Source::Config => {
                let spec = cfg.mechanism.designer.as_ref().ok_or_else(|| AgentError::InvalidSpec("no designer".into()))?;
                spec.build(salt, Some(limiter.clone()))
            }
            Source::Replay { designer, .. } => {
                let responses = designer.get(world).cloned().unwrap_or_default();
                BackendSpec::FixedScript { responses }.build(salt, None)
            }
        }
    }
}

struct Shared {
    game: GameInstance,
    templates: Arc<TemplateSet>,
    store: Option<SharedStore>,
    limiter: InFlightLimiter,
    iteration: IterationConfig,
    targets: [SolutionConcept; 2],
    check: TargetCheck,
}

struct Instance {
    metrics: WorldMetrics,
    lines: Vec<TranscriptLine>,
    designer: Vec<DesignerLine>,
}

fn drive(cfg: &ExperimentConfig, sh: &Shared, src: &Source<'_>, inst: &mut Instance) -> Result<(), String> {
    let id = inst.metrics.world_id.clone();
    let seed = inst.metrics.seed;
    let specs = [PlayerId::A, PlayerId::B]
        .map(|p| World::prompt_spec(&sh.templates, &sh.game, p, sh.targets[p.index()], cfg.mask_task_context));
    let [a, b] = specs;
    let specs = [a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?];
    let mut world = World::new(id.clone(), sh.game.clone(), cfg.comm.build(2), specs, seed).with_templates(sh.templates.clone());
    if let Some(store) = &sh.store {
        world = world.with_memory(store.clone());
    }
    let mut agents = Vec::with_capacity(2);
    for p in PlayerId::both() {
        let salt = splitmix(seed ^ (p.index() as u64 + 1));
        agents.push(src.player(cfg, (inst.metrics.world, inst.metrics.trial), &id, p, salt, &sh.limiter).map_err(|e| format!("{p}: {e}"))?);
    }
    let mut designer = if cfg.mechanism.enabled {
        let backend = src.designer(cfg, &id, splitmix(seed ^ 0xD5), &sh.limiter).map_err(|e| format!("designer: {e}"))?;
        Some((backend, MechanismState::new()))
    } else {
        None
    };

    for _ in 0..sample_repetitions(&cfg.repetition, seed) {
        let iteration = world.next_iteration();
        let mut applied = Vec::new();
        if let Some((backend, state)) = designer.as_mut() {
            let windows: Vec<ContextWindow> = world.seats.iter().map(|s| s.window.clone()).collect();
            let players: Vec<(PlayerId, &ContextWindow)> = windows.iter().enumerate().map(|(p, w)| (PlayerId(p), w)).collect();
            let player_spec = world.seats[0].spec.clone();
            let World { seats, comm, game, templates, .. } = &mut world;
            let mut specs: Vec<&mut SystemPromptSpec> = seats.iter_mut().map(|s| &mut s.spec).collect();
            let round = designer_round(
                backend.as_mut(),
                state,
                &players,
                &player_spec,
                game,
                &cfg.mechanism.constraints,
                templates,
                iteration,
                comm,
                &mut specs,
            )
            .map_err(|e| e.to_string())?;
            inst.designer.push(DesignerLine { world_id: id.clone(), iteration, response: round.response });
            applied = round.entries.iter().filter(|e| e.applied).map(|e| e.id.clone()).collect();
            inst.metrics.audit.extend(round.entries);
        }
        let record = run_iteration(&mut world, &mut agents, &sh.iteration).map_err(|e| e.to_string())?;
        for (p, segments) in record.transcripts.iter().enumerate() {
            inst.lines.extend(segments.iter().map(|s| TranscriptLine::from_segment(&id, PlayerId(p), s)));
        }
        inst.metrics.iterations.push(iteration_metrics(&record, applied, &sh.check));
    }
    Ok(())
}

fn run_instance(cfg: &ExperimentConfig, sh: &Shared, src: &Source<'_>, world: usize, trial: usize) -> Instance {
    let mut inst = Instance {
        metrics: WorldMetrics {
            world_id: world_id(world, trial),
            world,
            trial,
            seed: world_seed(cfg.seed, world, trial),
            status: WorldStatus::Completed,
            iterations: Vec::new(),
            audit: Vec::new(),
        },
        lines: Vec::new(),
        designer: Vec::new(),
    };
    if let Err(error) = drive(cfg, sh, src, &mut inst) {
        warn!(world = %inst.metrics.world_id, %error, "world failed");
        inst.metrics.status = WorldStatus::Failed { error };
    }
    inst
}

/// `<output_dir>/<config hash>` when the config names an output directory.
pub fn artifact_dir(config: &ExperimentConfig) -> Option<PathBuf> {
    config.output_dir.as_ref().map(|d| d.join(config.config_hash()))
}

/// Run every world instance in parallel and aggregate. When the config
/// has an output directory, transcripts, metrics, plot tables and the
/// memory store are written under [`artifact_dir`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunMetrics, RunnerError> {
    config.validate()?;
    run_with(config, &Source::Config)
}

fn run_with(config: &ExperimentConfig, src: &Source<'_>) -> Result<RunMetrics, RunnerError> {
    let game = config.game.build().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
    let templates = match &config.templates_dir {
        Some(dir) => TemplateSet::with_overrides(dir).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?,
        None => TemplateSet::default(),
    };
    let memory = config.memory.settings();
    let store = memory.mode.uses_store().then(|| MemoryStore::shared(memory.embedder.dim()));
    let targets = [config.target(PlayerId::A), config.target(PlayerId::B)];
    let sh = Shared {
        check: TargetCheck::new(&game, targets),
        game,
        templates: Arc::new(templates),
        store,
        limiter: InFlightLimiter::new(config.max_in_flight),
        iteration: IterationConfig { memory, repeated: config.repetition.is_repeated() },
        targets,
    };
    let hash = config.config_hash();
    info!(name = %config.name, %hash, worlds = config.worlds, trials = config.trials, "running experiment");

    let jobs: Vec<(usize, usize)> = (0..config.worlds).flat_map(|w| (0..config.trials).map(move |t| (w, t))).collect();
    let instances: Vec<Instance> = jobs.par_iter().map(|&(w, t)| run_instance(config, &sh, src, w, t)).collect();

    let worlds: Vec<WorldMetrics> = instances.iter().map(|i| i.metrics.clone()).collect();
    let metrics = RunMetrics {
        name: config.name.clone(),
        config_hash: hash,
        game: config.game.clone(),
        aggregate: aggregate(&sh.game, &worlds),
        worlds,
    };

    if let Some(dir) = artifact_dir(config) {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(CONFIG_FILE), config.canonical().to_toml())?;
        let lines: Vec<TranscriptLine> = instances.iter().flat_map(|i| i.lines.iter().cloned()).collect();
        write_transcript(&dir.join(TRANSCRIPT_FILE), &lines, false)?;
        if config.mechanism.enabled {
            let mut f = File::create(dir.join(DESIGNER_FILE))?;
            for line in instances.iter().flat_map(|i| &i.designer) {
                serde_json::to_writer(&mut f, line)?;
                f.write_all(b"\n")?;
            }
        }
        let mut json = serde_json::to_string_pretty(&metrics)?;
        json.push('\n');
        std::fs::write(dir.join(METRICS_FILE), json)?;
        emit_plots(&[(config.name.clone(), &metrics)], &dir)?;
        if let Some(store) = &sh.store {
            store.save(&dir.join(MEMORY_DIR))?;
        }
    }
    Ok(metrics)
}

/// Re-run `config` with every backend replaced by the responses recorded
/// in `transcripts` (and, for the designer, the sibling designer file).
pub fn replay(config: &ExperimentConfig, transcripts: &Path) -> Result<RunMetrics, RunnerError> {
    config.validate()?;
    let mut players: BTreeMap<(String, PlayerId), Vec<String>> = BTreeMap::new();
    for line in read_transcript(transcripts)? {
        if line.generated && line.author == Author::Player(line.player_id) {
            players.entry((line.world_id, line.player_id)).or_default().push(line.text);
        }
    }
    let mut designer: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let designer_path = transcripts.with_file_name(DESIGNER_FILE);
    if designer_path.exists() {
        for line in BufReader::new(File::open(&designer_path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let d: DesignerLine = serde_json::from_str(&line)?;
            designer.entry(d.world_id).or_default().push(d.response);
        }
    }
    run_with(config, &Source::Replay { players: &players, designer: &designer })
}
