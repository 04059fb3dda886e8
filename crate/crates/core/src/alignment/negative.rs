use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AlignmentError;
use crate::equilibrium::{satisfies, MixedProfile, SolutionConcept};
use crate::game::{JointAction, NormalFormGame};
use crate::DEFAULT_TOL;

const MIXED_ATTEMPTS: usize = 256;

/// Profiles outside the target set: every non-member pure cell first (as
/// far as `n` allows), then seeded mixed profiles that fail membership,
/// drawn near the game's mixed equilibria and the uniform profile.
pub fn gen_negative_samples(
    game: &NormalFormGame,
    target: &[SolutionConcept],
    n: usize,
    seed: u64,
) -> Result<Vec<MixedProfile>, AlignmentError> {
    let inside = |p: &MixedProfile| target.iter().any(|c| satisfies(game, p, *c, DEFAULT_TOL));
    let mut out: Vec<MixedProfile> =
        JointAction::cells().into_iter().map(MixedProfile::pure).filter(|p| !inside(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<(f64, f64)> = crate::equilibrium::mixed_nash_2x2(game)
        .unwrap_or_default()
        .into_iter()
        .map(|p| (p.row[0], p.col[0]))
        .chain([(0.5, 0.5)])
        .collect();

    let mut attempts = 0;
    while out.len() < n && attempts < MIXED_ATTEMPTS * n {
        attempts += 1;
        let (x, y) = anchors[rng.random_range(0..anchors.len())];
        let scale = rng.random_range(0.05..0.45);
        let clamp = |v: f64| v.clamp(0.01, 0.99);
        let p = MixedProfile::from_first(clamp(x + scale * rng.random_range(-1.0..1.0)), clamp(y + scale * rng.random_range(-1.0..1.0)));
        if inside(&p) || out.iter().any(|q| q.approx_eq(&p, 1e-6)) {
            continue;
        }
        out.push(p);
    }
    if out.is_empty() && n > 0 {
        return Err(AlignmentError::EmptyComplement);
    }
    out.truncate(n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::is_nash;
    use crate::game::{make_classic_game, GameKind, PayoffParams};

    #[test]
    fn pd_complement_cells() {
        let g = make_classic_game(GameKind::PrisonersDilemma, PayoffParams::default()).unwrap();
        let s = gen_negative_samples(&g, &[SolutionConcept::PureNash], 3, 0).unwrap();
        let cells: Vec<_> = s.iter().filter_map(|p| p.as_pure()).collect();
        assert_eq!(cells, vec![JointAction::new(0, 0), JointAction::new(0, 1), JointAction::new(1, 0)]);
    }

    #[test]
    fn pennies_perturbed_profiles_fail_nash() {
        let g = make_classic_game(GameKind::MatchingPennies, PayoffParams::pennies(1.0)).unwrap();
        let s = gen_negative_samples(&g, &[SolutionConcept::MixedNash], 12, 5).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.iter().all(|p| !is_nash(&g, p, DEFAULT_TOL)));
        assert!(s.iter().any(|p| p.as_pure().is_none()));
    }

    #[test]
    fn whole_space_target_is_empty() {
        let g = make_classic_game(GameKind::MatchingPennies, PayoffParams::pennies(1.0)).unwrap();
        assert!(matches!(
            gen_negative_samples(&g, &[SolutionConcept::ParetoEfficient], 4, 0),
            Err(AlignmentError::EmptyComplement)
        ));
    }
}
