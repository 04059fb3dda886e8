use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, Backend};
use crate::game::{Decision, WoAState};
use crate::protocol::{Author, ContextWindow, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScriptedStrategy {
    AlwaysAction { index: usize },
    TitForTat,
    GrimTrigger,
    UniformRandom { seed: u64 },
    MixedSampler { probs: Vec<f64>, seed: u64 },
    #[serde(rename = "woa_threshold")]
    WoAThreshold { surrender_at_t: u32 },
}

impl ScriptedStrategy {
    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            ScriptedStrategy::MixedSampler { probs, .. } => {
                let ok = !probs.is_empty()
                    && probs.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9;
                if ok {
                    Ok(())
                } else {
                    Err(AgentError::InvalidSpec(format!("not a distribution: {probs:?}")))
                }
            }
            ScriptedStrategy::WoAThreshold { surrender_at_t: 0 } => {
                Err(AgentError::InvalidSpec("surrender_at_t must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScriptedStrategy::AlwaysAction { index } => format!("always_{index}"),
            ScriptedStrategy::TitForTat => "tit_for_tat".into(),
            ScriptedStrategy::GrimTrigger => "grim_trigger".into(),
            ScriptedStrategy::UniformRandom { .. } => "uniform_random".into(),
            ScriptedStrategy::MixedSampler { .. } => "mixed_sampler".into(),
            ScriptedStrategy::WoAThreshold { surrender_at_t } => format!("threshold_{surrender_at_t}"),
        }
    }
}

/// Surrender iff the period about to be played has reached the threshold.
pub fn scripted_woa(surrender_at_t: u32, state: &WoAState) -> Decision {
    if state.t >= surrender_at_t {
        Decision::Surrender
    } else {
        Decision::Continue
    }
}

/// One remembered iteration, read from `OUTCOME:` or `SUMMARY:` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub own: String,
    pub opponent: String,
    pub payoff: String,
}

fn fields(line: &str) -> BTreeMap<&str, &str> {
    line.split(';')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect()
}

/// Iterations the window remembers, keyed by iteration number. Later lines
/// for the same iteration (e.g. further periods) overwrite earlier ones.
pub fn observed_history(context: &ContextWindow) -> BTreeMap<u32, Observation> {
    let mut out = BTreeMap::new();
    for seg in context.segments() {
        for line in seg.text.lines() {
            let l = line.trim();
            let body = l.strip_prefix("OUTCOME:").or_else(|| l.strip_prefix("SUMMARY:"));
            let Some(body) = body else { continue };
            let f = fields(body);
            let own = f.get("you").or(f.get("action"));
            let (Some(it), Some(own), Some(opp)) = (f.get("iteration").and_then(|s| s.parse().ok()), own, f.get("opponent")) else {
                continue;
            };
            out.insert(
                it,
                Observation { own: own.to_string(), opponent: opp.to_string(), payoff: f.get("payoff").unwrap_or(&"0").to_string() },
            );
        }
    }
    out
}

/// `(iteration, period)` from the most recent `STATE:` line.
fn current_state(context: &ContextWindow) -> (u32, u32) {
    for seg in context.segments().iter().rev() {
        for line in seg.text.lines().rev() {
            if let Some(body) = line.trim().strip_prefix("STATE:") {
                let f = fields(body);
                let get = |k: &str| f.get(k).and_then(|s| s.parse().ok());
                return (get("iteration").unwrap_or(1), get("period").unwrap_or(1));
            }
        }
    }
    (1, 1)
}

fn admissible(context: &ContextWindow) -> Vec<String> {
    for seg in context.segments().iter().rev() {
        for line in seg.text.lines().rev() {
            if let Some(rest) = line.trim().strip_prefix("Admissible actions:") {
                return rest.trim().trim_end_matches('.').split(',').map(|s| s.trim().to_string()).collect();
            }
        }
    }
    Vec::new()
}

/// Deterministic strategy player. Every response is a pure function of the
/// strategy, the salt and the window.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    strategy: ScriptedStrategy,
    salt: u64,
}

impl ScriptedBackend {
    pub fn new(strategy: ScriptedStrategy, salt: u64) -> Self {
        ScriptedBackend { strategy, salt }
    }

    fn draw(&self, seed: u64, iteration: u32, period: u32) -> f64 {
        let stream = (u64::from(iteration) << 32) | u64::from(period);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.salt.rotate_left(17) ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.random::<f64>()
    }

    /// Index of the chosen action among `labels`.
    pub fn choose(&self, context: &ContextWindow, labels: &[String]) -> usize {
        let n = labels.len().max(1);
        let (iteration, period) = current_state(context);
        let history = observed_history(context);
        let index_of = |label: &str| labels.iter().position(|l| l == label);
        let pick = match &self.strategy {
            ScriptedStrategy::AlwaysAction { index } => *index,
            ScriptedStrategy::TitForTat => history
                .range(..iteration)
                .next_back()
                .and_then(|(_, o)| index_of(&o.opponent))
                .unwrap_or(0),
            ScriptedStrategy::GrimTrigger => {
                let betrayed = history.range(..iteration).any(|(_, o)| index_of(&o.opponent).is_some_and(|i| i != 0));
                usize::from(betrayed)
            }
            ScriptedStrategy::UniformRandom { seed } => (self.draw(*seed, iteration, period) * n as f64) as usize,
            ScriptedStrategy::MixedSampler { probs, seed } => {
                let u = self.draw(*seed, iteration, period);
                let mut acc = 0.0;
                probs.iter().position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(probs.len() - 1)
            }
            ScriptedStrategy::WoAThreshold { surrender_at_t } => {
                usize::from(period >= *surrender_at_t) * Decision::Surrender.index()
            }
        };
        pick.min(n - 1)
    }
}

impl Backend for ScriptedBackend {
    fn respond(&mut self, context: &ContextWindow, stage: Stage) -> Result<String, AgentError> {
        let name = self.strategy.name();
        Ok(match stage {
            Stage::System => String::new(),
            Stage::Thinking => format!("THINKING: I follow {name}."),
            Stage::Comm => format!("MESSAGE: I follow {name}."),
            Stage::Action => {
                let labels = admissible(context);
                if labels.is_empty() {
                    return Err(AgentError::MalformedResponse("no admissible actions in the prompt".into()));
                }
                format!("ACTION: {}", labels[self.choose(context, &labels)])
            }
            Stage::Reflection => format!("REFLECTION: I keep following {name}."),
            Stage::Recall => {
                let (iteration, _) = current_state(context);
                let last_outcome = context
                    .segments()
                    .iter()
                    .filter(|s| s.author == Author::Environment && s.iteration == iteration)
                    .flat_map(|s| s.text.lines())
                    .filter_map(|l| l.trim().strip_prefix("OUTCOME:"))
                    .last()
                    .map(fields);
                let get = |k: &str| last_outcome.as_ref().and_then(|f| f.get(k).copied()).unwrap_or("none");
                format!(
                    "SUMMARY: iteration={iteration}; action={}; opponent={}; payoff={}; note={name}",
                    get("you"),
                    get("opponent"),
                    get("payoff")
                )
            }
        })
    }

    fn describe(&self) -> String {
        format!("scripted {}", self.strategy.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::WoAConfig;
    use crate::protocol::Cursor;

    fn window(outcomes: &[(u32, &str)], iteration: u32) -> ContextWindow {
        let mut w = ContextWindow::new();
        for (it, opp) in outcomes {
            w.push(
                Stage::Reflection,
                Author::Environment,
                format!("OUTCOME: iteration={it}; you=Cooperate; opponent={opp}; payoff=0"),
                false,
                Cursor::new(*it, 1),
            );
        }
        w.push(
            Stage::Action,
            Author::Environment,
            format!("STATE: iteration={iteration}\nAdmissible actions: Cooperate, Defect."),
            false,
            Cursor::new(iteration, 1),
        );
        w
    }

    fn act(s: ScriptedStrategy, w: &ContextWindow) -> String {
        ScriptedBackend::new(s, 0).respond(w, Stage::Action).unwrap()
    }

    #[test]
    fn tit_for_tat() {
        assert_eq!(act(ScriptedStrategy::TitForTat, &window(&[], 1)), "ACTION: Cooperate");
        assert_eq!(act(ScriptedStrategy::TitForTat, &window(&[(1, "Defect")], 2)), "ACTION: Defect");
        assert_eq!(act(ScriptedStrategy::TitForTat, &window(&[(1, "Defect"), (2, "Cooperate")], 3)), "ACTION: Cooperate");
    }

    #[test]
    fn grim_trigger_never_forgives() {
        let w = window(&[(1, "Defect"), (2, "Cooperate"), (3, "Cooperate")], 4);
        assert_eq!(act(ScriptedStrategy::GrimTrigger, &w), "ACTION: Defect");
        assert_eq!(act(ScriptedStrategy::GrimTrigger, &window(&[(1, "Cooperate")], 2)), "ACTION: Cooperate");
    }

    #[test]
    fn mixed_sampler_frequencies() {
        let b = ScriptedBackend::new(ScriptedStrategy::MixedSampler { probs: vec![0.3, 0.7], seed: 9 }, 4);
        let labels = vec!["Cooperate".to_string(), "Defect".to_string()];
        let mut first = 0;
        for it in 1..=10_000 {
            first += usize::from(b.choose(&window(&[], it), &labels) == 0);
        }
        assert!((first as f64 / 10_000.0 - 0.3).abs() <= 0.02);
    }

    #[test]
    fn invalid_specs() {
        assert!(ScriptedStrategy::MixedSampler { probs: vec![0.5, 0.6], seed: 0 }.validate().is_err());
        assert!(ScriptedStrategy::WoAThreshold { surrender_at_t: 0 }.validate().is_err());
    }

    #[test]
    fn woa_threshold_rule() {
        let cfg = WoAConfig::classic(5.0, 2.0, 0.5, 30);
        let s = WoAState::initial(&cfg);
        assert_eq!(scripted_woa(1, &s), Decision::Surrender);
        let mut later = s.clone();
        for t in 1..=30 {
            later.t = t;
            assert_eq!(scripted_woa(31, &later), Decision::Continue);
        }
    }
}
