use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::equilibrium::{best_response, concept_cells, SolutionConcept};
use crate::game::{JointAction, MatrixSpec, NormalFormGame};
use crate::protocol::{ContextWindow, Stage};
use crate::PlayerId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Conditioning {
    OpponentAction { action: usize },
    Concept { concept: SolutionConcept },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSupervisionItem {
    pub player: PlayerId,
    pub game: MatrixSpec,
    pub iteration: u32,
    /// The window before this iteration's action stage, with every
    /// action-stage exchange removed.
    pub context_prefix: String,
    pub question: String,
    pub conditioning: Conditioning,
    pub target_actions: Vec<usize>,
    pub target_labels: Vec<String>,
    pub span: (u32, u32),
}

fn prefix_text(window: &ContextWindow, iteration: u32) -> String {
    window
        .segments()
        .iter()
        .take_while(|s| !(s.iteration == iteration && s.stage == Stage::Action))
        .filter(|s| s.stage != Stage::Action)
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Supervision items for every iteration of `transcript` that reached the
/// action stage. For each conditioning opponent action the targets are the
/// player's best responses, narrowed to the target profiles when the
/// concept prescribes an action against that opponent action. `designated`
/// restricts the concept to one of its profiles.
pub fn gen_action_supervision(
    game: &NormalFormGame,
    transcript: &ContextWindow,
    player: PlayerId,
    target: SolutionConcept,
    designated: Option<JointAction>,
) -> Result<Vec<ActionSupervisionItem>, AlignmentError> {
    let spec = game.spec().ok_or(AlignmentError::UnsupportedGame)?;
    let mut cells = concept_cells(game, target)?;
    if let Some(d) = designated {
        cells.retain(|c| *c == d);
    }
    if cells.is_empty() {
        return Err(AlignmentError::UnachievableConcept(target));
    }
    let opp = player.opponent();
    let iterations: BTreeSet<u32> =
        transcript.segments().iter().filter(|s| s.stage == Stage::Action).map(|s| s.iteration).collect();
    let span = (iterations.first().copied().unwrap_or(0), iterations.last().copied().unwrap_or(0));
    let label = |a: usize| game.label(player, a).to_string();
    let mut out = Vec::new();
    for it in iterations {
        let prefix = prefix_text(transcript, it);
        for other in 0..2 {
            let br = best_response(game, player, other);
            let prescribed: Vec<usize> =
                cells.iter().filter(|c| c.action_of(opp) == other).map(|c| c.action_of(player)).collect();
            let both: Vec<usize> = br.iter().copied().filter(|a| prescribed.contains(a)).collect();
            let targets = if !both.is_empty() {
                both
            } else if !prescribed.is_empty() {
                prescribed
            } else {
                br
            };
            out.push(ActionSupervisionItem {
                player,
                game: spec,
                iteration: it,
                context_prefix: prefix.clone(),
                question: format!("If {opp} chose action {other}, what should your action be?"),
                conditioning: Conditioning::OpponentAction { action: other },
                target_labels: targets.iter().map(|&a| label(a)).collect(),
                target_actions: targets,
                span,
            });
        }
        let own: BTreeSet<usize> = cells.iter().map(|c| c.action_of(player)).collect();
        out.push(ActionSupervisionItem {
            player,
            game: spec,
            iteration: it,
            context_prefix: prefix.clone(),
            question: format!("Which action should you take to reach {}?", target.describe()),
            conditioning: Conditioning::Concept { concept: target },
            target_labels: own.iter().map(|&a| label(a)).collect(),
            target_actions: own.into_iter().collect(),
            span,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_classic_game, GameKind, PayoffParams};
    use crate::protocol::{Author, Cursor};

    fn window() -> ContextWindow {
        let mut w = ContextWindow::new();
        for it in 1..=2 {
            let at = Cursor::new(it, 1);
            w.push(Stage::System, Author::Environment, "system", false, at);
            w.push(Stage::Thinking, Author::Player(PlayerId::A), "thinking", true, at);
            w.push(Stage::Action, Author::Environment, "Admissible actions: ...", false, at);
            w.push(Stage::Action, Author::Player(PlayerId::A), "ACTION: Defect", true, at);
            w.push(Stage::Reflection, Author::Environment, "OUTCOME: ...", false, at);
        }
        w
    }

    fn targets(items: &[ActionSupervisionItem], other: usize) -> Vec<String> {
        items
            .iter()
            .find(|i| i.conditioning == Conditioning::OpponentAction { action: other })
            .unwrap()
            .target_labels
            .clone()
    }

    #[test]
    fn pd_best_response() {
        let g = make_classic_game(GameKind::PrisonersDilemma, PayoffParams::default()).unwrap();
        let items = gen_action_supervision(&g, &window(), PlayerId::A, SolutionConcept::PureNash, None).unwrap();
        assert_eq!(targets(&items, 0), vec!["Defect"]);
        assert_eq!(items.len(), 6);
        for i in &items {
            assert!(!i.context_prefix.contains("ACTION:") && !i.context_prefix.contains("Admissible"));
        }
        assert!(items.iter().filter(|i| i.iteration == 2).all(|i| i.context_prefix.contains("OUTCOME")));
    }

    #[test]
    fn chicken_designated_profile() {
        let g = make_classic_game(GameKind::Chicken, PayoffParams::default()).unwrap();
        let stay_swerve = JointAction::new(1, 0);
        let items = gen_action_supervision(&g, &window(), PlayerId::A, SolutionConcept::PureNash, Some(stay_swerve)).unwrap();
        assert_eq!(targets(&items, 0), vec!["Stay"]);
    }

    #[test]
    fn pennies_unachievable() {
        let g = make_classic_game(GameKind::MatchingPennies, PayoffParams::pennies(1.0)).unwrap();
        let err = gen_action_supervision(&g, &window(), PlayerId::A, SolutionConcept::PureNash, None).unwrap_err();
        assert!(matches!(err, AlignmentError::UnachievableConcept(SolutionConcept::PureNash)));
    }
}
