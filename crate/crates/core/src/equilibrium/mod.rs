//! Solution concepts for 2×2 games and the War of Attrition.

mod spe;

pub use spe::{woa_spe_all, woa_spe_truncated, WoAPolicy, SPE_SELECTION_RULE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{JointAction, NormalFormGame};
use crate::{PlayerId, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("{0} is indifferent between its actions against every opponent action")]
    DegenerateGame(PlayerId),
    #[error("subgame-perfect analysis supports only the classic War of Attrition")]
    UnsupportedVariant,
    #[error("invalid mixed profile: {0}")]
    InvalidProfile(String),
}

/// Target notion an agent is instructed or trained to reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolutionConcept {
    PureNash,
    MixedNash,
    ParetoEfficient,
    SocialWelfareMax,
    #[serde(rename = "SPE")]
    Spe,
}

impl SolutionConcept {
    pub fn describe(self) -> &'static str {
        match self {
            SolutionConcept::PureNash => "a pure-strategy Nash equilibrium",
            SolutionConcept::MixedNash => "a mixed-strategy Nash equilibrium",
            SolutionConcept::ParetoEfficient => "a Pareto efficient outcome",
            SolutionConcept::SocialWelfareMax => "the outcome maximizing social welfare",
            SolutionConcept::Spe => "a subgame-perfect equilibrium",
        }
    }
}

/// One probability vector per player over its two actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub row: [f64; 2],
    pub col: [f64; 2],
}

impl MixedProfile {
    pub fn new(row: [f64; 2], col: [f64; 2]) -> Result<Self, EquilibriumError> {
        for (name, v) in [("row", row), ("col", col)] {
            if v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || ((v[0] + v[1]) - 1.0).abs() > 1e-9 {
                return Err(EquilibriumError::InvalidProfile(format!("{name} probabilities {v:?}")));
            }
        }
        Ok(MixedProfile { row, col })
    }

    pub fn pure(joint: JointAction) -> Self {
        let unit = |i: usize| if i == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
        MixedProfile { row: unit(joint.row), col: unit(joint.col) }
    }

    /// From the probabilities of action 0.
    pub fn from_first(p_row: f64, p_col: f64) -> Self {
        MixedProfile { row: [p_row, 1.0 - p_row], col: [p_col, 1.0 - p_col] }
    }

    pub fn of(&self, player: PlayerId) -> [f64; 2] {
        if player == PlayerId::A {
            self.row
        } else {
            self.col
        }
    }

    /// The cell this profile puts all its mass on, if any.
    pub fn as_pure(&self) -> Option<JointAction> {
        let pick = |v: [f64; 2]| {
            if (v[0] - 1.0).abs() <= 1e-12 {
                Some(0)
            } else if (v[1] - 1.0).abs() <= 1e-12 {
                Some(1)
            } else {
                None
            }
        };
        Some(JointAction::new(pick(self.row)?, pick(self.col)?))
    }

    pub fn approx_eq(&self, other: &MixedProfile, tol: f64) -> bool {
        self.row.iter().chain(&self.col).zip(other.row.iter().chain(&other.col)).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Expected payoffs of both players under `profile`.
pub fn expected_payoffs(game: &NormalFormGame, profile: &MixedProfile) -> [f64; 2] {
    let mut out = [0.0; 2];
    for cell in JointAction::cells() {
        let w = profile.row[cell.row] * profile.col[cell.col];
        let p = game.cell(cell);
        out[0] += w * p[0];
        out[1] += w * p[1];
    }
    out
}

/// Expected payoff to `player` of pure action `action` against the
/// opponent's marginal in `profile`.
fn deviation_payoff(game: &NormalFormGame, profile: &MixedProfile, player: PlayerId, action: usize) -> f64 {
    let opp = profile.of(player.opponent());
    (0..2).map(|o| opp[o] * game.payoff_from(player, action, o)).sum()
}

/// Largest gain `player` can obtain by a unilateral pure deviation.
pub fn max_deviation_gain(game: &NormalFormGame, profile: &MixedProfile, player: PlayerId) -> f64 {
    let realized = expected_payoffs(game, profile)[player.index()];
    (0..2).map(|a| deviation_payoff(game, profile, player, a)).fold(f64::NEG_INFINITY, f64::max) - realized
}

/// Best achievable payoff against the opponent's marginal minus the
/// realized payoff. Never negative.
pub fn regret(game: &NormalFormGame, profile: &MixedProfile, player: PlayerId) -> f64 {
    max_deviation_gain(game, profile, player).max(0.0)
}

pub fn is_nash(game: &NormalFormGame, profile: &MixedProfile, tol: f64) -> bool {
    PlayerId::both().into_iter().all(|p| max_deviation_gain(game, profile, p) <= tol)
}

/// Actions of `player` maximizing its payoff against `opponent_action`;
/// ties within [`DEFAULT_TOL`] are all returned.
pub fn best_response(game: &NormalFormGame, player: PlayerId, opponent_action: usize) -> Vec<usize> {
    best_response_tol(game, player, opponent_action, DEFAULT_TOL)
}

pub fn best_response_tol(game: &NormalFormGame, player: PlayerId, opponent_action: usize, tol: f64) -> Vec<usize> {
    let values: Vec<f64> = (0..2).map(|a| game.payoff_from(player, a, opponent_action.min(1))).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..2).filter(|&a| values[a] >= best - tol).collect()
}

/// Cells where both actions are mutual best responses.
pub fn pure_nash(game: &NormalFormGame) -> Vec<JointAction> {
    pure_nash_tol(game, DEFAULT_TOL)
}

pub fn pure_nash_tol(game: &NormalFormGame, tol: f64) -> Vec<JointAction> {
    JointAction::cells()
        .into_iter()
        .filter(|c| {
            best_response_tol(game, PlayerId::A, c.col, tol).contains(&c.row)
                && best_response_tol(game, PlayerId::B, c.row, tol).contains(&c.col)
        })
        .collect()
}

/// All equilibria of a 2×2 game: the pure ones as degenerate profiles plus
/// the fully mixed indifference solution when it exists.
pub fn mixed_nash_2x2(game: &NormalFormGame) -> Result<Vec<MixedProfile>, EquilibriumError> {
    let t = game.tensor();
    // Row mixes to make the column player indifferent, and vice versa.
    // denominators vanish exactly when a player's own-action difference is
    // the same against both opponent actions.
    let col_diff = [t[0][0][1] - t[0][1][1], t[1][0][1] - t[1][1][1]];
    let row_diff = [t[0][0][0] - t[1][0][0], t[0][1][0] - t[1][1][0]];
    for (player, diff) in [(PlayerId::A, row_diff), (PlayerId::B, col_diff)] {
        if diff.iter().all(|d| d.abs() <= DEFAULT_TOL) {
            return Err(EquilibriumError::DegenerateGame(player));
        }
    }

    let mut out: Vec<MixedProfile> = pure_nash(game).into_iter().map(MixedProfile::pure).collect();

    let interior = |diff: [f64; 2]| {
        let denom = diff[0] - diff[1];
        (denom.abs() > DEFAULT_TOL).then(|| -diff[1] / denom).filter(|p| *p > 0.0 && *p < 1.0)
    };
    if let (Some(p_row), Some(p_col)) = (interior(col_diff), interior(row_diff)) {
        out.push(MixedProfile::from_first(p_row, p_col));
    }
    Ok(out)
}

/// Cells not Pareto-dominated by another cell.
pub fn pareto_frontier(game: &NormalFormGame) -> Vec<JointAction> {
    let cells = JointAction::cells();
    cells
        .into_iter()
        .filter(|&c| !cells.iter().any(|&o| pareto_dominates(game.cell(o), game.cell(c), 0.0)))
        .collect()
}

/// Whether payoff vector `x` Pareto-dominates `y`.
pub fn pareto_dominates(x: [f64; 2], y: [f64; 2], tol: f64) -> bool {
    x.iter().zip(&y).all(|(a, b)| *a >= *b - tol) && x.iter().zip(&y).any(|(a, b)| *a > *b + tol)
}

pub fn social_welfare(game: &NormalFormGame, joint: JointAction) -> Result<f64, crate::game::GameError> {
    let p = game.payoff(joint)?;
    Ok(p[0] + p[1])
}

/// Cells maximizing social welfare.
pub fn welfare_maximizers(game: &NormalFormGame) -> Vec<JointAction> {
    let w = |c: JointAction| {
        let p = game.cell(c);
        p[0] + p[1]
    };
    let best = JointAction::cells().into_iter().map(w).fold(f64::NEG_INFINITY, f64::max);
    JointAction::cells().into_iter().filter(|&c| w(c) >= best - DEFAULT_TOL).collect()
}

/// Pure cells belonging to `concept`. Mixed equilibria contribute the
/// cells in their support.
pub fn concept_cells(game: &NormalFormGame, concept: SolutionConcept) -> Result<Vec<JointAction>, EquilibriumError> {
    Ok(match concept {
        SolutionConcept::PureNash | SolutionConcept::Spe => pure_nash(game),
        SolutionConcept::ParetoEfficient => pareto_frontier(game),
        SolutionConcept::SocialWelfareMax => welfare_maximizers(game),
        SolutionConcept::MixedNash => {
            let mut cells: Vec<JointAction> = Vec::new();
            for p in mixed_nash_2x2(game)? {
                for c in JointAction::cells() {
                    if p.row[c.row] > 0.0 && p.col[c.col] > 0.0 && !cells.contains(&c) {
                        cells.push(c);
                    }
                }
            }
            cells.sort();
            cells
        }
    })
}

/// Whether `profile` belongs to `concept` within `tol`.
pub fn satisfies(game: &NormalFormGame, profile: &MixedProfile, concept: SolutionConcept, tol: f64) -> bool {
    match concept {
        SolutionConcept::PureNash | SolutionConcept::Spe => profile.as_pure().is_some() && is_nash(game, profile, tol),
        SolutionConcept::MixedNash => is_nash(game, profile, tol),
        SolutionConcept::ParetoEfficient => {
            let v = expected_payoffs(game, profile);
            !JointAction::cells().iter().any(|&c| pareto_dominates(game.cell(c), v, tol))
        }
        SolutionConcept::SocialWelfareMax => {
            let v = expected_payoffs(game, profile);
            let best = welfare_maximizers(game).first().map(|&c| game.cell(c)).map_or(0.0, |p| p[0] + p[1]);
            v[0] + v[1] >= best - tol
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_classic_game, GameKind, PayoffParams};

    fn game(kind: GameKind) -> NormalFormGame {
        let params = if kind == GameKind::MatchingPennies { PayoffParams::pennies(1.0) } else { PayoffParams::default() };
        make_classic_game(kind, params).unwrap()
    }

    const C: usize = 0;
    const D: usize = 1;

    #[test]
    fn pure_equilibria_of_the_classics() {
        assert_eq!(pure_nash(&game(GameKind::PrisonersDilemma)), vec![JointAction::new(D, D)]);
        // (Swerve, Stay) and (Stay, Swerve)
        assert_eq!(pure_nash(&game(GameKind::Chicken)), vec![JointAction::new(0, 1), JointAction::new(1, 0)]);
        assert_eq!(pure_nash(&game(GameKind::StagHunt)), vec![JointAction::new(0, 0), JointAction::new(1, 1)]);
        assert_eq!(pure_nash(&game(GameKind::BattleOfSexes)), vec![JointAction::new(0, 0), JointAction::new(1, 1)]);
        assert!(pure_nash(&game(GameKind::MatchingPennies)).is_empty());
    }

    #[test]
    fn mixed_equilibria() {
        let mp = mixed_nash_2x2(&game(GameKind::MatchingPennies)).unwrap();
        assert_eq!(mp.len(), 1);
        assert!(mp[0].approx_eq(&MixedProfile::from_first(0.5, 0.5), 1e-12));

        let ch = mixed_nash_2x2(&game(GameKind::Chicken)).unwrap();
        assert_eq!(ch.len(), 3);
        assert!(ch[2].approx_eq(&MixedProfile::from_first(0.5, 0.5), 1e-12));

        let pd = mixed_nash_2x2(&game(GameKind::PrisonersDilemma)).unwrap();
        assert_eq!(pd, vec![MixedProfile::pure(JointAction::new(D, D))]);
    }

    #[test]
    fn degenerate_game_is_reported() {
        let g = NormalFormGame::from_payoffs([["x", "y"]; 2], [[[1.0, 0.0], [2.0, 1.0]], [[1.0, 3.0], [2.0, 0.0]]]);
        assert_eq!(mixed_nash_2x2(&g), Err(EquilibriumError::DegenerateGame(PlayerId::A)));
    }

    #[test]
    fn nash_checks() {
        let pd = game(GameKind::PrisonersDilemma);
        assert!(is_nash(&pd, &MixedProfile::pure(JointAction::new(D, D)), 1e-9));
        assert!(!is_nash(&pd, &MixedProfile::pure(JointAction::new(C, C)), 1e-9));
        assert!(is_nash(&game(GameKind::MatchingPennies), &MixedProfile::from_first(0.5, 0.5), 1e-9));
    }

    #[test]
    fn pareto_sets() {
        let pd = pareto_frontier(&game(GameKind::PrisonersDilemma));
        assert_eq!(pd, vec![JointAction::new(0, 0), JointAction::new(0, 1), JointAction::new(1, 0)]);
        assert_eq!(pareto_frontier(&game(GameKind::StagHunt)), vec![JointAction::new(0, 0)]);
        assert_eq!(pareto_frontier(&game(GameKind::MatchingPennies)).len(), 4);
    }

    #[test]
    fn welfare_and_best_response() {
        let pd = game(GameKind::PrisonersDilemma);
        assert_eq!(social_welfare(&pd, JointAction::new(C, C)).unwrap(), 4.0);
        assert_eq!(social_welfare(&pd, JointAction::new(D, D)).unwrap(), 2.0);
        for c in JointAction::cells() {
            assert_eq!(social_welfare(&game(GameKind::MatchingPennies), c).unwrap(), 0.0);
        }
        assert_eq!(best_response(&pd, PlayerId::A, C), vec![D]);
        assert_eq!(best_response(&game(GameKind::Chicken), PlayerId::A, 1), vec![0]);
        assert_eq!(best_response(&game(GameKind::BattleOfSexes), PlayerId::A, 1), vec![1]);
    }

    #[test]
    fn regret_values() {
        let pd = game(GameKind::PrisonersDilemma);
        assert_eq!(regret(&pd, &MixedProfile::pure(JointAction::new(C, C)), PlayerId::A), 1.0);
        assert!(regret(&pd, &MixedProfile::pure(JointAction::new(D, D)), PlayerId::B).abs() < 1e-9);
        let mp = game(GameKind::MatchingPennies);
        for p in PlayerId::both() {
            assert!(regret(&mp, &MixedProfile::from_first(0.5, 0.5), p).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(MixedProfile::new([0.6, 0.6], [1.0, 0.0]).is_err());
        assert!(MixedProfile::new([-0.1, 1.1], [1.0, 0.0]).is_err());
        assert!(MixedProfile::new([0.25, 0.75], [1.0, 0.0]).is_ok());
    }
}
