use std::fmt;

use serde::{Deserialize, Serialize};

use super::GameError;
use crate::PlayerId;

/// The five classic two-player games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameKind {
    PrisonersDilemma,
    Chicken,
    StagHunt,
    BattleOfSexes,
    MatchingPennies,
}

impl GameKind {
    pub const ALL: [GameKind; 5] = [
        GameKind::PrisonersDilemma,
        GameKind::Chicken,
        GameKind::StagHunt,
        GameKind::BattleOfSexes,
        GameKind::MatchingPennies,
    ];

    /// Action labels shared by both players; index 0 is the first
    /// row/column of the template.
    pub fn labels(self) -> [&'static str; 2] {
        match self {
            GameKind::PrisonersDilemma => ["Cooperate", "Defect"],
            GameKind::Chicken => ["Swerve", "Stay"],
            GameKind::StagHunt => ["Stag", "Hare"],
            GameKind::BattleOfSexes => ["Boxing", "Ballet"],
            GameKind::MatchingPennies => ["Head", "Tail"],
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            GameKind::PrisonersDilemma => "Prisoner's Dilemma",
            GameKind::Chicken => "Chicken",
            GameKind::StagHunt => "Stag Hunt",
            GameKind::BattleOfSexes => "Battle of the Sexes",
            GameKind::MatchingPennies => "Matching Pennies",
        }
    }

    pub fn validate(self, p: &PayoffParams) -> Result<(), GameError> {
        let fail = |detail: String| Err(GameError::OrderingViolation { kind: self, detail });
        if [p.a, p.b, p.c, p.d].iter().any(|v| !v.is_finite()) {
            return fail("payoff levels must be finite".into());
        }
        match self {
            GameKind::MatchingPennies if p.a <= 0.0 => fail(format!("need a > 0, got a = {}", p.a)),
            GameKind::MatchingPennies => Ok(()),
            _ if !(0.0 <= p.a && p.a < p.b && p.b < p.c && p.c < p.d) => fail(format!(
                "need 0 <= a < b < c < d, got ({}, {}, {}, {})",
                p.a, p.b, p.c, p.d
            )),
            _ => Ok(()),
        }
    }

    /// The template as `[row][col] = (row payoff, column payoff)`.
    fn template(self, p: &PayoffParams) -> [[[f64; 2]; 2]; 2] {
        let PayoffParams { a, b, c, d } = *p;
        match self {
            GameKind::PrisonersDilemma => [[[c, c], [a, d]], [[d, a], [b, b]]],
            GameKind::Chicken => [[[c, c], [b, d]], [[d, b], [a, a]]],
            GameKind::StagHunt => [[[d, d], [a, b]], [[b, a], [c, c]]],
            GameKind::BattleOfSexes => [[[c, b], [a, a]], [[a, a], [b, c]]],
            GameKind::MatchingPennies => [[[a, -a], [-a, a]], [[-a, a], [a, -a]]],
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Payoff levels `a < b < c < d`. Matching Pennies reads only `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffParams {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
}

impl PayoffParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        PayoffParams { a, b, c, d }
    }

    pub fn pennies(a: f64) -> Self {
        PayoffParams { a, b: 0.0, c: 0.0, d: 0.0 }
    }
}

impl Default for PayoffParams {
    fn default() -> Self {
        PayoffParams::new(0.0, 1.0, 2.0, 3.0)
    }
}

/// Row and column action indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction {
    pub row: usize,
    pub col: usize,
}

impl JointAction {
    pub const fn new(row: usize, col: usize) -> Self {
        JointAction { row, col }
    }

    /// All four cells of a 2×2 game in row-major order.
    pub fn cells() -> [JointAction; 4] {
        [JointAction::new(0, 0), JointAction::new(0, 1), JointAction::new(1, 0), JointAction::new(1, 1)]
    }

    pub fn action_of(self, player: PlayerId) -> usize {
        if player == PlayerId::A {
            self.row
        } else {
            self.col
        }
    }

    /// Build the cell where `player` takes `own` and the opponent `other`.
    pub fn from_perspective(player: PlayerId, own: usize, other: usize) -> Self {
        if player == PlayerId::A {
            JointAction::new(own, other)
        } else {
            JointAction::new(other, own)
        }
    }
}

/// Serializable description of a matrix game; the form stored in run
/// configs and dataset headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub kind: GameKind,
    #[serde(default)]
    pub params: PayoffParams,
}

impl MatrixSpec {
    pub fn build(&self) -> Result<NormalFormGame, GameError> {
        make_classic_game(self.kind, self.params)
    }
}

/// A two-player 2×2 game: payoff tensor indexed `[row][col][player]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    kind: Option<GameKind>,
    params: Option<PayoffParams>,
    labels: [[String; 2]; 2],
    payoff: [[[f64; 2]; 2]; 2],
}

/// Instantiate one of the five templates.
pub fn make_classic_game(kind: GameKind, params: PayoffParams) -> Result<NormalFormGame, GameError> {
    kind.validate(&params)?;
    let [l0, l1] = kind.labels();
    let labels = [l0.to_string(), l1.to_string()];
    Ok(NormalFormGame {
        kind: Some(kind),
        params: Some(params),
        labels: [labels.clone(), labels],
        payoff: kind.template(&params),
    })
}

impl NormalFormGame {
    /// An arbitrary 2×2 game. Used for tests and for games outside the
    /// classic templates.
    pub fn from_payoffs(labels: [[&str; 2]; 2], payoff: [[[f64; 2]; 2]; 2]) -> Self {
        NormalFormGame {
            kind: None,
            params: None,
            labels: labels.map(|l| l.map(str::to_string)),
            payoff,
        }
    }

    pub fn kind(&self) -> Option<GameKind> {
        self.kind
    }

    pub fn params(&self) -> Option<PayoffParams> {
        self.params
    }

    pub fn spec(&self) -> Option<MatrixSpec> {
        Some(MatrixSpec { kind: self.kind?, params: self.params? })
    }

    pub fn name(&self) -> String {
        self.kind.map_or_else(|| "Custom 2x2 game".to_string(), |k| k.display_name().to_string())
    }

    pub fn labels(&self, player: PlayerId) -> &[String; 2] {
        &self.labels[player.index().min(1)]
    }

    pub fn label(&self, player: PlayerId, action: usize) -> &str {
        &self.labels(player)[action]
    }

    pub fn action_index(&self, player: PlayerId, label: &str) -> Option<usize> {
        self.labels(player).iter().position(|l| l.eq_ignore_ascii_case(label))
    }

    pub fn payoff(&self, joint: JointAction) -> Result<[f64; 2], GameError> {
        if joint.row > 1 || joint.col > 1 {
            return Err(GameError::IndexOutOfRange { row: joint.row, col: joint.col });
        }
        Ok(self.payoff[joint.row][joint.col])
    }

    /// Infallible lookup for internally generated cells.
    pub(crate) fn cell(&self, joint: JointAction) -> [f64; 2] {
        self.payoff[joint.row][joint.col]
    }

    /// Payoff to `player` when it plays `own` and the opponent plays `other`.
    pub(crate) fn payoff_from(&self, player: PlayerId, own: usize, other: usize) -> f64 {
        self.cell(JointAction::from_perspective(player, own, other))[player.index()]
    }

    pub fn tensor(&self) -> &[[[f64; 2]; 2]; 2] {
        &self.payoff
    }
}
