use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::game::{JointAction, MatrixSpec, NormalFormGame};
use crate::protocol::{ApproxTokenizer, ContextWindow, Tokenizer};
use crate::PlayerId;

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    /// Payoff of `subject` given both actions.
    PayoffInference { subject: PlayerId },
    /// Opponent action given its reward and the asker's action.
    InverseAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    /// The player the question is put to ("I" in the question).
    pub player: PlayerId,
    pub game: MatrixSpec,
    pub kind: QuestionKind,
    pub own_action: usize,
    pub opponent_action: usize,
    pub player_context: String,
    pub question: String,
    pub ground_truth: String,
    pub reward_correct: i32,
    pub reward_incorrect: i32,
    /// First and last iteration covered by the context.
    pub span: (u32, u32),
}

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

impl QAItem {
    /// Recompute the ground truth from the recorded game config.
    pub fn recompute(&self) -> Result<String, AlignmentError> {
        let game = self.game.build().map_err(|_| AlignmentError::UnsupportedGame)?;
        let cell = JointAction::from_perspective(self.player, self.own_action, self.opponent_action);
        let p = game.payoff(cell).map_err(|_| AlignmentError::UnsupportedGame)?;
        Ok(match self.kind {
            QuestionKind::PayoffInference { subject } => num(p[subject.index()]),
            QuestionKind::InverseAction => format!("action {}", self.opponent_action),
        })
    }

    pub fn grade(&self, answer: &str) -> i32 {
        if grade_answer(self, answer) > 0 {
            self.reward_correct
        } else {
            self.reward_incorrect
        }
    }
}

/// All instantiated questions for `player`, in a fixed order. Inverse
/// questions are produced only where the observed reward pins down the
/// opponent's action uniquely.
pub fn qa_candidates(game: &NormalFormGame, player: PlayerId) -> Vec<(QuestionKind, usize, usize, String, String)> {
    let opp = player.opponent();
    let mut out = Vec::new();
    for own in 0..2 {
        for other in 0..2 {
            let p = game.payoff(JointAction::from_perspective(player, own, other)).expect("2x2 indices");
            for subject in [opp, player] {
                let whom = if subject == player { "I".to_string() } else { subject.to_string() };
                let q = format!(
                    "If {opp} chose action {other} and I chose action {own}, what payoff will {whom} receive?"
                );
                out.push((QuestionKind::PayoffInference { subject }, own, other, q, num(p[subject.index()])));
            }
        }
        for other in 0..2 {
            let reward = game.payoff(JointAction::from_perspective(player, own, other)).expect("2x2")[opp.index()];
            let alt = game.payoff(JointAction::from_perspective(player, own, 1 - other)).expect("2x2")[opp.index()];
            if alt == reward {
                continue;
            }
            let q = format!(
                "If {opp} received a reward of {} and I chose action {own}, what action did {opp} choose?",
                num(reward)
            );
            out.push((QuestionKind::InverseAction, own, other, q, format!("action {other}")));
        }
    }
    out
}

fn tokens(text: &str) -> Vec<String> {
    ApproxTokenizer.tokenize(text).into_iter().map(|r| text[r].to_lowercase()).collect()
}

/// Token sequences that state `truth`: the literal plus numeric synonyms.
fn synonyms(truth: &str) -> Vec<Vec<String>> {
    let mut forms = vec![truth.to_string()];
    let (prefix, number) = match truth.strip_prefix("action ") {
        Some(rest) => ("action ", rest),
        None => ("", truth),
    };
    if let Ok(x) = number.parse::<f64>() {
        if x.fract() == 0.0 {
            forms.push(format!("{prefix}{x:.1}"));
            let n = x.abs() as usize;
            if n < NUMBER_WORDS.len() {
                let sign = if x < 0.0 { "minus " } else { "" };
                forms.push(format!("{prefix}{sign}{}", NUMBER_WORDS[n]));
                if x < 0.0 {
                    forms.push(format!("{prefix}negative {}", NUMBER_WORDS[n]));
                }
            }
        }
    }
    forms.iter().map(|f| tokens(f)).collect()
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Leakage check over a context. Counters the environment writes into every
/// prompt (`iteration=`, `period=`, communication round numbers) carry no
/// payoff information and are ignored.
#[derive(Debug, Clone)]
pub struct ContextLeakCheck {
    tokens: Vec<String>,
}

impl ContextLeakCheck {
    pub fn new(context: &str) -> Self {
        let raw = tokens(context);
        let mut kept = Vec::with_capacity(raw.len());
        let mut i = 0;
        while i < raw.len() {
            let t = &raw[i];
            let counter_key = matches!(t.as_str(), "iteration" | "period" | "round");
            kept.push(t.clone());
            if counter_key {
                let mut j = i + 1;
                if raw.get(j).is_some_and(|s| s == "=") {
                    kept.push("=".into());
                    j += 1;
                }
                if raw.get(j).is_some_and(|s| s.chars().all(|c| c.is_ascii_digit())) {
                    j += 1;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        ContextLeakCheck { tokens: kept }
    }

    pub fn leaks(&self, truth: &str) -> bool {
        synonyms(truth).iter().any(|s| contains_seq(&self.tokens, s))
    }
}

fn span_of(window: &ContextWindow) -> (u32, u32) {
    let its = window.segments().iter().map(|s| s.iteration);
    (its.clone().min().unwrap_or(0), its.max().unwrap_or(0))
}

/// Sample `n` questions for `player` from its window. Candidates whose
/// answer the context already states are discarded; the rest are drawn
/// with replacement under `seed`.
pub fn gen_qa_items(
    game: &NormalFormGame,
    player: PlayerId,
    transcript: &ContextWindow,
    n: usize,
    seed: u64,
) -> Result<Vec<QAItem>, AlignmentError> {
    let spec = game.spec().ok_or(AlignmentError::UnsupportedGame)?;
    let context = transcript.render();
    let check = ContextLeakCheck::new(&context);
    let pool: Vec<_> = qa_candidates(game, player).into_iter().filter(|c| !check.leaks(&c.4)).collect();
    if n == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(AlignmentError::ExhaustedTemplates);
    }
    let span = span_of(transcript);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let (kind, own, other, question, truth) = pool[rng.random_range(0..pool.len())].clone();
            QAItem {
                player,
                game: spec,
                kind,
                own_action: own,
                opponent_action: other,
                player_context: context.clone(),
                question,
                ground_truth: truth,
                reward_correct: 1,
                reward_incorrect: -1,
                span,
            }
        })
        .collect())
}

/// Lower-case tokens with number words 0–20 (optionally preceded by
/// "minus"/"negative") rewritten as numerals and `x.0` as `x`.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let raw = tokens(text);
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let t = raw[i].as_str();
        let negate = matches!(t, "minus" | "negative") || (t == "-" && raw.get(i + 1).is_some_and(|n| is_number(n)));
        let at = if negate { i + 1 } else { i };
        if let Some(n) = raw.get(at).and_then(|w| as_number(w)) {
            // Absorb a trailing ".0".
            let mut end = at + 1;
            if raw.get(end).is_some_and(|s| s == ".") && raw.get(end + 1).is_some_and(|s| s.chars().all(|c| c == '0')) {
                end += 2;
            }
            let v = if negate { -n } else { n };
            out.push(num(v));
            i = end;
            continue;
        }
        out.push(t.to_string());
        i += 1;
    }
    out
}

fn is_number(w: &str) -> bool {
    as_number(w).is_some()
}

fn as_number(w: &str) -> Option<f64> {
    if let Some(i) = NUMBER_WORDS.iter().position(|n| *n == w) {
        return Some(i as f64);
    }
    if !w.is_empty() && w.chars().all(|c| c.is_ascii_digit()) {
        return w.parse().ok();
    }
    None
}

/// +1 when the normalized answer contains the normalized ground truth;
/// for action questions a lone number equal to the index also counts.
pub fn grade_answer(item: &QAItem, answer: &str) -> i32 {
    let ans = normalize_answer(answer);
    let truth = normalize_answer(&item.ground_truth);
    if contains_seq(&ans, &truth) {
        return 1;
    }
    if let QuestionKind::InverseAction = item.kind {
        let numbers: Vec<&String> = ans.iter().filter(|t| t.parse::<f64>().is_ok()).collect();
        if numbers.len() == 1 && truth.last() == Some(numbers[0]) {
            return 1;
        }
    }
    -1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_classic_game, GameKind, PayoffParams};
    use crate::protocol::{Author, Cursor, Stage};

    fn pd() -> NormalFormGame {
        make_classic_game(GameKind::PrisonersDilemma, PayoffParams::default()).unwrap()
    }

    fn find<'a>(c: &'a [(QuestionKind, usize, usize, String, String)], q: &str) -> &'a str {
        &c.iter().find(|x| x.3 == q).unwrap_or_else(|| panic!("no question {q}")).4
    }

    #[test]
    fn worked_questions() {
        let c = qa_candidates(&pd(), PlayerId::A);
        assert_eq!(find(&c, "If Player B chose action 0 and I chose action 1, what payoff will Player B receive?"), "0");
        assert_eq!(find(&c, "If Player B received a reward of 1 and I chose action 1, what action did Player B choose?"), "action 1");
    }

    #[test]
    fn leaked_items_discarded() {
        let g = pd();
        let mut w = ContextWindow::new();
        w.push(Stage::Reflection, Author::Environment, "Player B receives 0, 1, 2 and 3 in the four cells.", false, Cursor::new(1, 1));
        let items = gen_qa_items(&g, PlayerId::A, &w, 50, 1).unwrap();
        assert!(items.iter().all(|i| matches!(i.kind, QuestionKind::InverseAction)));
        w.push(Stage::Reflection, Author::Environment, "action 0, action 1", false, Cursor::new(1, 1));
        assert!(matches!(gen_qa_items(&g, PlayerId::A, &w, 5, 1), Err(AlignmentError::ExhaustedTemplates)));
    }

    #[test]
    fn counters_do_not_leak() {
        let check = ContextLeakCheck::new("STATE: iteration=1; period=2\nCommunication round 3.");
        assert!(!check.leaks("1") && !check.leaks("2") && !check.leaks("3"));
        assert!(ContextLeakCheck::new("payoff=3").leaks("3"));
        assert!(ContextLeakCheck::new("you get three").leaks("3"));
    }

    #[test]
    fn grading() {
        let g = pd();
        let item = gen_qa_items(&g, PlayerId::A, &ContextWindow::new(), 200, 3)
            .unwrap()
            .into_iter()
            .find(|i| i.ground_truth == "0")
            .unwrap();
        assert_eq!(grade_answer(&item, "Player B receives 0"), 1);
        assert_eq!(grade_answer(&item, "3"), -1);
        assert_eq!(grade_answer(&item, "zero"), 1);
        assert_eq!(grade_answer(&item, "0.0"), 1);
    }

    #[test]
    fn negative_numbers() {
        assert_eq!(normalize_answer("minus two"), vec!["-2"]);
        assert_eq!(normalize_answer("-2"), vec!["-2"]);
        assert_eq!(normalize_answer("negative 3.0 points"), vec!["-3", "points"]);
    }

    #[test]
    fn reproducible_and_seeded() {
        let g = pd();
        let a = gen_qa_items(&g, PlayerId::B, &ContextWindow::new(), 30, 9).unwrap();
        assert_eq!(a, gen_qa_items(&g, PlayerId::B, &ContextWindow::new(), 30, 9).unwrap());
        for item in &a {
            assert_eq!(item.recompute().unwrap(), item.ground_truth);
            assert_eq!(item.player, PlayerId::B);
        }
    }
}
