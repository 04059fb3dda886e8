use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GameError;

/// How many iterations a (possibly repeated) game runs for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RepetitionSpec {
    #[default]
    Single,
    Fixed { n: u32 },
    Stochastic { lo: u32, hi: u32 },
}

impl RepetitionSpec {
    pub fn validate(&self) -> Result<(), GameError> {
        match *self {
            RepetitionSpec::Single => Ok(()),
            RepetitionSpec::Fixed { n } if n >= 1 => Ok(()),
            RepetitionSpec::Fixed { n } => Err(GameError::InvalidConfig(format!("fixed count must be >= 1, got {n}"))),
            RepetitionSpec::Stochastic { lo, hi } if lo >= 1 && lo <= hi => Ok(()),
            RepetitionSpec::Stochastic { lo, hi } => {
                Err(GameError::InvalidConfig(format!("stochastic range [{lo}, {hi}] must satisfy 1 <= lo <= hi")))
            }
        }
    }

    pub fn is_repeated(&self) -> bool {
        !matches!(self, RepetitionSpec::Single)
    }

    /// Whether players may be told how many iterations remain.
    pub fn horizon_known(&self) -> bool {
        !matches!(self, RepetitionSpec::Stochastic { .. })
    }
}

/// Draw the number of iterations. Stochastic counts are uniform over the
/// inclusive range and fully determined by `seed`.
pub fn sample_repetitions(spec: &RepetitionSpec, seed: u64) -> u32 {
    match *spec {
        RepetitionSpec::Single => 1,
        RepetitionSpec::Fixed { n } => n,
        RepetitionSpec::Stochastic { lo, hi } => ChaCha8Rng::seed_from_u64(seed).random_range(lo..=hi),
    }
}
