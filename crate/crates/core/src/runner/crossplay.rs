use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentConfig, RunMetrics, RunnerError};
use crate::agents::BackendSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub name: String,
    pub backend: BackendSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every ordered pair from the pool, self-play included.
    WithinPool,
    /// Pool members against partners (both seatings); without partners,
    /// every ordered pair of distinct members.
    CrossPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    /// Seated as Player A.
    pub row: String,
    /// Seated as Player B.
    pub col: String,
    pub metrics: RunMetrics,
}

/// Ordered (row, col) index pairs. Indices at or past `pool` refer to
/// `partners`.
pub fn pairings(pool: usize, partners: usize, mode: Pairing) -> Vec<(usize, usize)> {
    match mode {
        Pairing::WithinPool => (0..pool).flat_map(|i| (0..pool).map(move |j| (i, j))).collect(),
        Pairing::CrossPool if partners == 0 => {
            (0..pool).flat_map(|i| (0..pool).filter(move |&j| j != i).map(move |j| (i, j))).collect()
        }
        Pairing::CrossPool => (0..pool)
            .flat_map(|i| (0..partners).flat_map(move |j| [(i, pool + j), (pool + j, i)]))
            .collect(),
    }
}

/// Run one experiment per pairing, each a copy of `config` with the two
/// backends replaced.
pub fn cross_play(
    config: &ExperimentConfig,
    pool: &[PoolMember],
    partners: &[PoolMember],
    mode: Pairing,
) -> Result<Vec<PairingResult>, RunnerError> {
    if pool.is_empty() {
        return Err(RunnerError::ConfigInvalid("cross-play pool is empty".into()));
    }
    let everyone: Vec<&PoolMember> = pool.iter().chain(partners).collect();
    let mut out = Vec::new();
    for (i, j) in pairings(pool.len(), partners.len(), mode) {
        let (a, b) = (everyone[i], everyone[j]);
        let mut cfg = config.canonical();
        cfg.output_dir = config.output_dir.clone();
        cfg.name = format!("{}-{}-vs-{}", config.name, a.name, b.name);
        cfg.players[0].backend = a.backend.clone();
        cfg.players[1].backend = b.backend.clone();
        let metrics = run_experiment(&cfg)?;
        out.push(PairingResult { row: a.name.clone(), col: b.name.clone(), metrics });
    }
    Ok(out)
}
