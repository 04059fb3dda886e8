use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::agents::Backend;
use crate::protocol::{Author, ContextWindow, Cursor, Stage, TemplateSet};
use crate::PlayerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evaluator {
    /// An outside model reading every player's window.
    Centralized,
    /// A fellow player judging from its own window.
    Team { peer: PlayerId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackScore {
    pub evaluator: Evaluator,
    pub subject: PlayerId,
    pub raw: f64,
    pub normalized: f64,
    pub batch_id: String,
}

/// Min-max map of a batch onto [−1, 1]; a constant batch maps to zeros.
pub fn normalize_feedback(raw: &[f64]) -> Result<Vec<f64>, AlignmentError> {
    if raw.is_empty() {
        return Err(AlignmentError::InvalidBatch("empty batch".into()));
    }
    if let Some(x) = raw.iter().find(|x| !(0.0..=10.0).contains(*x)) {
        return Err(AlignmentError::InvalidBatch(format!("score {x} outside [0, 10]")));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|x| 2.0 * (x - lo) / (hi - lo) - 1.0).collect())
}

/// The last `SCORE: <0-10>` line of an evaluator response.
pub fn parse_score(response: &str) -> Option<f64> {
    response.lines().rev().find_map(|l| {
        let rest = l.trim().strip_prefix("SCORE:")?;
        let x: f64 = rest.trim().trim_end_matches('.').parse().ok()?;
        (0.0..=10.0).contains(&x).then_some(x)
    })
}

/// Evaluation prompt for `subject`. Centralized evaluators see every
/// window; a team evaluator sees only its own window.
pub fn build_evaluator_context(
    evaluator: Evaluator,
    windows: &[(PlayerId, &ContextWindow)],
    subject: PlayerId,
    game_name: &str,
    templates: &TemplateSet,
) -> Result<ContextWindow, AlignmentError> {
    let at = Cursor::new(0, 1);
    let mut w = ContextWindow::new();
    match evaluator {
        Evaluator::Centralized => {
            let role = templates.render("evaluator_role", &[("game", game_name)])?;
            w.push(Stage::System, Author::Environment, role, false, at);
            let transcripts: Vec<String> = windows
                .iter()
                .map(|(p, win)| format!("### Context window of {p}\n{}", win.render()))
                .collect();
            let prompt = templates.render(
                "evaluator_centralized",
                &[("transcripts", &transcripts.join("\n\n")), ("subject", &subject.to_string())],
            )?;
            w.push(Stage::Reflection, Author::Environment, prompt, false, at);
        }
        Evaluator::Team { peer } => {
            if let Some((_, own)) = windows.iter().find(|(p, _)| *p == peer) {
                for s in own.segments() {
                    w.push(s.stage, s.author, s.text.clone(), s.generated, Cursor { iteration: s.iteration, step: s.step, round: s.round });
                }
            }
            let prompt = templates.render("evaluator_team", &[("subject", &subject.to_string())])?;
            w.push(Stage::Reflection, Author::Environment, prompt, false, at);
        }
    }
    Ok(w)
}

/// Ask one evaluator for a raw score.
pub fn evaluate(backend: &mut dyn Backend, context: &ContextWindow) -> Result<f64, AlignmentError> {
    let reply = backend.respond(context, Stage::Reflection)?;
    parse_score(&reply).ok_or(AlignmentError::MissingScore)
}

/// Attach batch-normalized values to `(evaluator, subject, raw)` triples.
pub fn score_batch(batch_id: &str, raw: &[(Evaluator, PlayerId, f64)]) -> Result<Vec<FeedbackScore>, AlignmentError> {
    let values: Vec<f64> = raw.iter().map(|r| r.2).collect();
    let normalized = normalize_feedback(&values)?;
    Ok(raw
        .iter()
        .zip(normalized)
        .map(|(&(evaluator, subject, raw), normalized)| FeedbackScore {
            evaluator,
            subject,
            raw,
            normalized,
            batch_id: batch_id.to_string(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::FixedScript;
    use proptest::prelude::*;

    #[test]
    fn worked_batches() {
        assert_eq!(normalize_feedback(&[0.0, 5.0, 10.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(normalize_feedback(&[7.0, 7.0, 7.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(normalize_feedback(&[2.0, 4.0, 10.0]).unwrap(), vec![-1.0, -0.5, 1.0]);
        assert!(normalize_feedback(&[]).is_err());
        assert!(normalize_feedback(&[11.0]).is_err());
    }

    #[test]
    fn score_lines() {
        assert_eq!(parse_score("Fine play.\nSCORE: 7"), Some(7.0));
        assert_eq!(parse_score("SCORE: 12"), None);
        assert_eq!(parse_score("no score"), None);
    }

    #[test]
    fn evaluators_through_backends() {
        let mut wa = ContextWindow::new();
        wa.push(Stage::Action, Author::Player(PlayerId::A), "ACTION: Cooperate", true, Cursor::new(1, 1));
        let wb = ContextWindow::new();
        let t = TemplateSet::default();
        let windows = [(PlayerId::A, &wa), (PlayerId::B, &wb)];
        let central = build_evaluator_context(Evaluator::Centralized, &windows, PlayerId::A, "Prisoner's Dilemma", &t).unwrap();
        assert!(central.render().contains("ACTION: Cooperate"));
        let team = build_evaluator_context(Evaluator::Team { peer: PlayerId::B }, &windows, PlayerId::A, "PD", &t).unwrap();
        assert!(!team.render().contains("ACTION: Cooperate"));
        let mut b = FixedScript::new(vec!["SCORE: 8".into(), "SCORE: 2".into()]);
        let raw = [evaluate(&mut b, &central).unwrap(), evaluate(&mut b, &team).unwrap()];
        let scores = score_batch(
            "b0",
            &[(Evaluator::Centralized, PlayerId::A, raw[0]), (Evaluator::Team { peer: PlayerId::B }, PlayerId::A, raw[1])],
        )
        .unwrap();
        assert_eq!(scores.iter().map(|s| s.normalized).collect::<Vec<_>>(), vec![1.0, -1.0]);
    }

    proptest! {
        #[test]
        fn order_preserving(xs in proptest::collection::vec(0.0f64..=10.0, 1..30)) {
            let n = normalize_feedback(&xs).unwrap();
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] < xs[j] { prop_assert!(n[i] <= n[j]); }
                }
            }
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                let imin = xs.iter().position(|x| *x == lo).unwrap();
                let imax = xs.iter().position(|x| *x == hi).unwrap();
                prop_assert_eq!(n[imin], -1.0);
                prop_assert_eq!(n[imax], 1.0);
            }
        }
    }
}
