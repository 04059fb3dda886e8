use serde::{Deserialize, Serialize};

use crate::equilibrium::SolutionConcept;
use crate::game::{JointAction, NormalFormGame, WoAConfig, WoAVariant};
use crate::PlayerId;

pub const ROLE_HEADER: &str = "## Role Definition";
pub const TASK_HEADER: &str = "## Task Context";
pub const MULTI_AGENT_HEADER: &str = "## Multi-Agent Context";
pub const MEMORY_HEADER: &str = "## Memory Context";
pub const RULES_HEADER: &str = "## Mechanism Rules";

/// Instruction appended to every action prompt.
pub const ACTION_FORMAT: &str = "end your answer with a single line of the form ACTION: <one admissible action>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskContext {
    /// Rules, payoffs and dynamics; dropped when the task is masked.
    pub rules: String,
    pub action_labels: Vec<String>,
    pub format_instruction: String,
    /// Facts known to this player only (e.g. its own valuation). Dropped
    /// when masked and never shown to other roles.
    #[serde(default)]
    pub private_facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAgentContext {
    pub target: SolutionConcept,
    #[serde(default)]
    pub guidance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPromptSpec {
    pub role_definition: String,
    pub task: TaskContext,
    pub masked: bool,
    pub multi_agent: MultiAgentContext,
    #[serde(default)]
    pub memory_context: String,
    /// Global rules injected by the mechanism designer.
    #[serde(default)]
    pub mechanism_rules: Vec<String>,
}

impl SystemPromptSpec {
    /// A copy suitable for other roles' eyes: private facts and memory removed.
    pub fn redacted(&self) -> SystemPromptSpec {
        SystemPromptSpec {
            task: TaskContext { private_facts: Vec::new(), ..self.task.clone() },
            memory_context: String::new(),
            ..self.clone()
        }
    }
}

fn section(out: &mut Vec<String>, header: &str, body: &str) {
    let body = body.trim();
    if !body.is_empty() {
        out.push(format!("{header}\n{body}"));
    }
}

/// Render the system prompt: role, task, multi-agent and memory context in
/// that order, followed by any mechanism rules. Empty sections are elided.
pub fn build_system_prompt(spec: &SystemPromptSpec) -> String {
    let mut sections = Vec::new();
    section(&mut sections, ROLE_HEADER, &spec.role_definition);

    let mut task = Vec::new();
    if !spec.masked {
        task.push(spec.task.rules.trim().to_string());
        task.extend(spec.task.private_facts.iter().map(|f| f.trim().to_string()));
    }
    task.push(format!("Actions available to you: {}.", spec.task.action_labels.join(", ")));
    task.push(format!("Formatting: {}", spec.task.format_instruction.trim()));
    task.retain(|t| !t.is_empty());
    section(&mut sections, TASK_HEADER, &task.join("\n"));

    let mut multi = format!("Your objective is to reach {}.", spec.multi_agent.target.describe());
    if let Some(g) = spec.multi_agent.guidance.as_deref().filter(|g| !g.trim().is_empty()) {
        multi.push('\n');
        multi.push_str(g.trim());
    }
    section(&mut sections, MULTI_AGENT_HEADER, &multi);
    section(&mut sections, MEMORY_HEADER, &spec.memory_context);

    if !spec.mechanism_rules.is_empty() {
        let rules: Vec<String> = spec.mechanism_rules.iter().map(|r| format!("- {}", r.trim())).collect();
        section(&mut sections, RULES_HEADER, &rules.join("\n"));
    }
    sections.join("\n\n")
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Rules text for `player` in a matrix game, with the payoff table written
/// from that player's perspective.
pub fn matrix_rules(game: &NormalFormGame, player: PlayerId) -> String {
    let me = player;
    let opp = player.opponent();
    let mut lines = vec![format!(
        "The game is {}. Both players choose an action simultaneously and without seeing the other's choice.",
        game.name()
    )];
    lines.push("Payoff table (your payoff, opponent payoff):".to_string());
    for own in 0..2 {
        for other in 0..2 {
            let cell = JointAction::from_perspective(me, own, other);
            let p = game.cell(cell);
            lines.push(format!(
                "- you {} / opponent {}: {}, {}",
                game.label(me, own),
                game.label(opp, other),
                num(p[me.index()]),
                num(p[opp.index()])
            ));
        }
    }
    lines.join("\n")
}

/// Rules text for the War of Attrition. Each player's own prize is a
/// private fact; see [`attrition_private_facts`].
pub fn attrition_rules(config: &WoAConfig, player: PlayerId) -> String {
    let mut lines = vec![
        "The game is a War of Attrition. In every period both players simultaneously choose to Continue or Surrender."
            .to_string(),
        "If exactly one player surrenders, the other wins its prize. Staying in the war costs you every period; costs are discounted and accumulate."
            .to_string(),
        format!(
            "Your cost per period is {} and the discount factor is {}. If nobody has surrendered by period {}, both players surrender and bear their accumulated losses.",
            num(config.costs[player.index()]),
            num(config.gamma),
            config.terminal_t
        ),
    ];
    if let WoAVariant::Evolving(_) = config.variant {
        lines.push("Costs change over time with a public state that is reported every period.".to_string());
    }
    lines.join("\n")
}

pub fn attrition_private_facts(config: &WoAConfig, player: PlayerId) -> Vec<String> {
    vec![format!("Your prize for winning is {}.", num(config.values[player.index()]))]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_classic_game, GameKind, PayoffParams};

    fn pd_spec(masked: bool) -> SystemPromptSpec {
        let g = make_classic_game(GameKind::PrisonersDilemma, PayoffParams::default()).unwrap();
        SystemPromptSpec {
            role_definition: "You are Player A.".into(),
            task: TaskContext {
                rules: matrix_rules(&g, PlayerId::A),
                action_labels: vec!["Cooperate".into(), "Defect".into()],
                format_instruction: ACTION_FORMAT.into(),
                private_facts: vec![],
            },
            masked,
            multi_agent: MultiAgentContext { target: SolutionConcept::PureNash, guidance: None },
            memory_context: String::new(),
            mechanism_rules: vec![],
        }
    }

    #[test]
    fn empty_memory_leaves_three_sections() {
        let out = build_system_prompt(&pd_spec(false));
        assert_eq!(out.matches("\n## ").count() + usize::from(out.starts_with("## ")), 3);
        assert!(!out.contains(MEMORY_HEADER));
    }

    #[test]
    fn masked_prompt_has_labels_but_no_payoffs() {
        let out = build_system_prompt(&pd_spec(true));
        assert!(out.contains("Cooperate") && out.contains("Defect"));
        assert!(!out.chars().any(|c| c.is_ascii_digit()), "{out}");
        let unmasked = build_system_prompt(&pd_spec(false));
        assert!(unmasked.contains("you Defect / opponent Cooperate: 3, 0"));
    }

    #[test]
    fn rendering_is_deterministic_and_ordered() {
        let mut spec = pd_spec(false);
        spec.memory_context = "SUMMARY: iteration=1".into();
        spec.mechanism_rules = vec!["Be nice.".into()];
        let a = build_system_prompt(&spec);
        assert_eq!(a, build_system_prompt(&spec.clone()));
        let pos: Vec<usize> = [ROLE_HEADER, TASK_HEADER, MULTI_AGENT_HEADER, MEMORY_HEADER, RULES_HEADER]
            .iter()
            .map(|h| a.find(h).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
