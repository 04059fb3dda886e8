use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{expected_payoffs, max_deviation_gain, satisfies, MixedProfile, SolutionConcept};
use crate::game::NormalFormGame;
use crate::PlayerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreferenceLabel {
    /// Decided by membership in the target set.
    A,
    B,
    /// Decided by the designated player's individual operator.
    TieBrokenA,
    TieBrokenB,
    /// Undecided; `arbitrary_choice` holds the deterministic pick.
    Arbitrary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub profile_a: MixedProfile,
    pub profile_b: MixedProfile,
    pub target: Vec<SolutionConcept>,
    pub designated: PlayerId,
    pub label: PreferenceLabel,
    pub arbitrary_choice: Option<Side>,
}

impl PreferencePair {
    pub fn preferred(&self) -> Side {
        match self.label {
            PreferenceLabel::A | PreferenceLabel::TieBrokenA => Side::A,
            PreferenceLabel::B | PreferenceLabel::TieBrokenB => Side::B,
            PreferenceLabel::Arbitrary => self.arbitrary_choice.unwrap_or(Side::A),
        }
    }

    /// Level-3 ties are flagged for exclusion from consistency checks.
    pub fn flagged(&self) -> bool {
        self.label == PreferenceLabel::Arbitrary
    }
}

fn member(game: &NormalFormGame, p: &MixedProfile, target: &[SolutionConcept], tol: f64) -> bool {
    target.iter().any(|c| satisfies(game, p, *c, tol))
}

/// Individual operator of `designated`: (stability, own payoff), where
/// stability is the negated largest unilateral gain over both players.
fn individual(game: &NormalFormGame, p: &MixedProfile, designated: PlayerId) -> (f64, f64) {
    let gain = PlayerId::both().into_iter().map(|q| max_deviation_gain(game, p, q)).fold(f64::NEG_INFINITY, f64::max);
    (-gain, expected_payoffs(game, p)[designated.index()])
}

fn cmp_tol(x: f64, y: f64, tol: f64) -> Ordering {
    if x > y + tol {
        Ordering::Greater
    } else if y > x + tol {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Label a pair of profiles: membership in `target` first, then the
/// designated player's individual operator, then an arbitrary but
/// deterministic pick favouring less mass on higher action indices.
pub fn joint_prefer(
    pair: (MixedProfile, MixedProfile),
    game: &NormalFormGame,
    target: &[SolutionConcept],
    designated: PlayerId,
    tol: f64,
) -> PreferencePair {
    let (a, b) = pair;
    let mut out = PreferencePair {
        profile_a: a,
        profile_b: b,
        target: target.to_vec(),
        designated,
        label: PreferenceLabel::Arbitrary,
        arbitrary_choice: None,
    };
    match (member(game, &a, target, tol), member(game, &b, target, tol)) {
        (true, false) => {
            out.label = PreferenceLabel::A;
            return out;
        }
        (false, true) => {
            out.label = PreferenceLabel::B;
            return out;
        }
        _ => {}
    }
    let (ia, ib) = (individual(game, &a, designated), individual(game, &b, designated));
    let ord = cmp_tol(ia.0, ib.0, tol).then(cmp_tol(ia.1, ib.1, tol));
    out.label = match ord {
        Ordering::Greater => PreferenceLabel::TieBrokenA,
        Ordering::Less => PreferenceLabel::TieBrokenB,
        Ordering::Equal => {
            let key = |p: &MixedProfile| [p.row[1], p.col[1]];
            let pick = match key(&a).partial_cmp(&key(&b)) {
                Some(Ordering::Greater) => Side::B,
                _ => Side::A,
            };
            out.arbitrary_choice = Some(pick);
            PreferenceLabel::Arbitrary
        }
    };
    out
}

/// Whether `x` is strictly preferred to `y` without an arbitrary tie.
pub fn prefers(x: MixedProfile, y: MixedProfile, game: &NormalFormGame, target: &[SolutionConcept], designated: PlayerId, tol: f64) -> Option<bool> {
    let p = joint_prefer((x, y), game, target, designated, tol);
    (!p.flagged()).then(|| p.preferred() == Side::A)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_classic_game, GameKind, JointAction, PayoffParams};

    fn pure(r: usize, c: usize) -> MixedProfile {
        MixedProfile::pure(JointAction::new(r, c))
    }

    #[test]
    fn membership_dominates() {
        let g = make_classic_game(GameKind::PrisonersDilemma, PayoffParams::default()).unwrap();
        let p = joint_prefer((pure(1, 1), pure(0, 1)), &g, &[SolutionConcept::PureNash], PlayerId::A, 1e-9);
        assert_eq!(p.label, PreferenceLabel::A);
    }

    #[test]
    fn chicken_individual_tie_break() {
        let g = make_classic_game(GameKind::Chicken, PayoffParams::default()).unwrap();
        let stay_swerve = pure(1, 0);
        let swerve_stay = pure(0, 1);
        let a = joint_prefer((stay_swerve, swerve_stay), &g, &[SolutionConcept::PureNash], PlayerId::A, 1e-9);
        assert_eq!(a.label, PreferenceLabel::TieBrokenA);
        let b = joint_prefer((stay_swerve, swerve_stay), &g, &[SolutionConcept::PureNash], PlayerId::B, 1e-9);
        assert_eq!(b.label, PreferenceLabel::TieBrokenB);
    }

    #[test]
    fn identical_profiles_are_arbitrary() {
        let g = make_classic_game(GameKind::StagHunt, PayoffParams::default()).unwrap();
        let p = joint_prefer((pure(0, 1), pure(0, 1)), &g, &[SolutionConcept::PureNash], PlayerId::A, 1e-9);
        assert_eq!((p.label, p.arbitrary_choice), (PreferenceLabel::Arbitrary, Some(Side::A)));
        assert!(p.flagged());
        assert_eq!(p, joint_prefer((pure(0, 1), pure(0, 1)), &g, &[SolutionConcept::PureNash], PlayerId::A, 1e-9));
    }
}
