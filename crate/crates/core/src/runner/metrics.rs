use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{satisfies, woa_spe_truncated, MixedProfile, SolutionConcept, WoAPolicy};
use crate::game::{GameInstance, GameSpec, JointAction, TerminationClass, WoAOutcome};
use crate::mechanism::AuditEntry;
use crate::protocol::IterationRecord;
use crate::{PlayerId, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub joint: JointAction,
    pub labels: [String; 2],
    pub payoffs: [f64; 2],
    pub welfare: f64,
    /// Context-window totals per player at the end of the iteration.
    pub tokens: Vec<usize>,
    pub parse_failures: [u32; 2],
    pub woa: Option<WoAOutcome>,
    /// Ids of interventions applied right before this iteration.
    pub interventions: Vec<String>,
    pub violations: usize,
    pub on_target: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WorldStatus {
    Completed,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldMetrics {
    pub world_id: String,
    pub world: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: WorldStatus,
    pub iterations: Vec<IterationMetrics>,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub joint: JointAction,
    pub row_label: String,
    pub col_label: String,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub period: u32,
    pub class: TerminationClass,
    pub count: u64,
}

/// Reduction over completed worlds only; failed worlds are listed and
/// otherwise ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub events: u64,
    pub frequencies: Vec<FrequencyRow>,
    pub target_probability: Option<f64>,
    pub mean_welfare: Option<f64>,
    /// Nonzero (period, class) cells.
    pub woa_histogram: Vec<HistogramRow>,
    pub total_tokens: [u64; 2],
    /// Mean end-of-iteration window size per player, by iteration number.
    pub mean_tokens_by_iteration: Vec<[f64; 2]>,
    pub parse_failures: [u64; 2],
    pub interventions_applied: u64,
    pub violations: u64,
    pub failed_worlds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub name: String,
    pub config_hash: String,
    pub game: GameSpec,
    pub worlds: Vec<WorldMetrics>,
    pub aggregate: Aggregate,
}

impl RunMetrics {
    pub fn frequency(&self, joint: JointAction) -> f64 {
        self.aggregate.frequencies.iter().find(|r| r.joint == joint).map_or(0.0, |r| r.frequency)
    }

    pub fn histogram_count(&self, period: u32, class: TerminationClass) -> u64 {
        self.aggregate.woa_histogram.iter().find(|r| r.period == period && r.class == class).map_or(0, |r| r.count)
    }

    pub fn failed(&self) -> impl Iterator<Item = &WorldMetrics> {
        self.worlds.iter().filter(|w| w.status != WorldStatus::Completed)
    }
}

/// Decides whether an iteration reached the players' targets.
pub(crate) enum TargetCheck {
    Matrix(crate::game::NormalFormGame, Vec<SolutionConcept>),
    War(WoAPolicy),
    Unavailable,
}

impl TargetCheck {
    pub(crate) fn new(game: &GameInstance, targets: [SolutionConcept; 2]) -> Self {
        match game {
            GameInstance::Matrix(g) => {
                let mut t = targets.to_vec();
                t.dedup();
                TargetCheck::Matrix(g.clone(), t)
            }
            GameInstance::Attrition(w) => match woa_spe_truncated(w) {
                Ok(p) if targets.iter().all(|t| *t == SolutionConcept::Spe) => TargetCheck::War(p),
                _ => TargetCheck::Unavailable,
            },
        }
    }

    fn check(&self, record: &IterationRecord) -> Option<bool> {
        match self {
            TargetCheck::Matrix(g, targets) => {
                let p = MixedProfile::pure(record.joint);
                Some(targets.iter().all(|c| satisfies(g, &p, *c, DEFAULT_TOL)))
            }
            TargetCheck::War(policy) => {
                let o = record.woa?;
                let t = o.period;
                let on_path = policy.end_period == t
                    && record.joint
                        == JointAction::new(policy.decision(PlayerId::A, t).index(), policy.decision(PlayerId::B, t).index());
                Some(on_path)
            }
            TargetCheck::Unavailable => None,
        }
    }
}

pub(crate) fn iteration_metrics(record: &IterationRecord, interventions: Vec<String>, target: &TargetCheck) -> IterationMetrics {
    let labels = record.steps.last().map(|s| s.labels.clone()).unwrap_or_default();
    IterationMetrics {
        iteration: record.iteration,
        joint: record.joint,
        labels,
        payoffs: record.payoffs,
        welfare: record.payoffs[0] + record.payoffs[1],
        tokens: record.tokens.clone(),
        parse_failures: record.parse_failures,
        woa: record.woa,
        interventions,
        violations: record.violations.len(),
        on_target: target.check(record),
    }
}

pub(crate) fn aggregate(game: &GameInstance, worlds: &[WorldMetrics]) -> Aggregate {
    let done: Vec<&WorldMetrics> = worlds.iter().filter(|w| w.status == WorldStatus::Completed).collect();
    let its = || done.iter().flat_map(|w| w.iterations.iter());
    let events = its().count() as u64;

    let mut counts: BTreeMap<JointAction, u64> = BTreeMap::new();
    for m in its() {
        *counts.entry(m.joint).or_default() += 1;
    }
    let label = |p: PlayerId, a: usize| -> String { game.labels(p).get(a).cloned().unwrap_or_default() };
    let frequencies = JointAction::cells()
        .into_iter()
        .map(|c| {
            let count = counts.get(&c).copied().unwrap_or(0);
            FrequencyRow {
                joint: c,
                row_label: label(PlayerId::A, c.row),
                col_label: label(PlayerId::B, c.col),
                count,
                frequency: if events == 0 { 0.0 } else { count as f64 / events as f64 },
            }
        })
        .collect();

    let checked: Vec<bool> = its().filter_map(|m| m.on_target).collect();
    let target_probability = (!checked.is_empty() && checked.len() as u64 == events)
        .then(|| checked.iter().filter(|b| **b).count() as f64 / events as f64);
    let mean_welfare = (events > 0).then(|| its().map(|m| m.welfare).sum::<f64>() / events as f64);

    let mut hist: BTreeMap<(u32, TerminationClass), u64> = BTreeMap::new();
    for o in its().filter_map(|m| m.woa) {
        *hist.entry((o.period, o.class)).or_default() += 1;
    }
    let woa_histogram = hist.into_iter().map(|((period, class), count)| HistogramRow { period, class, count }).collect();

    let mut total_tokens = [0u64; 2];
    let mut parse_failures = [0u64; 2];
    let mut sums: Vec<([f64; 2], u64)> = Vec::new();
    for w in &done {
        for (i, m) in w.iterations.iter().enumerate() {
            if sums.len() <= i {
                sums.push(([0.0; 2], 0));
            }
            for p in 0..2 {
                let t = m.tokens.get(p).copied().unwrap_or(0);
                total_tokens[p] += t as u64;
                sums[i].0[p] += t as f64;
                parse_failures[p] += u64::from(m.parse_failures[p]);
            }
            sums[i].1 += 1;
        }
    }
    let mean_tokens_by_iteration = sums.into_iter().map(|(s, n)| [s[0] / n as f64, s[1] / n as f64]).collect();

    Aggregate {
        events,
        frequencies,
        target_probability,
        mean_welfare,
        woa_histogram,
        total_tokens,
        mean_tokens_by_iteration,
        parse_failures,
        interventions_applied: its().map(|m| m.interventions.len() as u64).sum(),
        violations: its().map(|m| m.violations as u64).sum(),
        failed_worlds: worlds.iter().filter(|w| w.status != WorldStatus::Completed).map(|w| w.world_id.clone()).collect(),
    }
}
