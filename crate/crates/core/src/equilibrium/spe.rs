//! Backward induction for the truncated classic War of Attrition.
//!
//! Both players are still in the war at the start of period `t` only if
//! everybody continued so far, so a strategy is a decision per period. At
//! the terminal period the war ends in mutual surrender whatever the
//! players choose; earlier periods are simultaneous 2×2 stage games whose
//! `(Continue, Continue)` cell carries the continuation value of `t + 1`.

use serde::{Deserialize, Serialize};

use super::{pareto_dominates, EquilibriumError};
use crate::game::{woa_loss, Decision, WoAConfig};
use crate::{PlayerId, DEFAULT_TOL};

/// Recorded with every policy so downstream analytics know how stage
/// equilibria were chosen.
pub const SPE_SELECTION_RULE: &str =
    "stage equilibria filtered by Pareto dominance, then lowest (row, col) index with Continue = 0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoAPolicy {
    /// `decisions[player][t - 1]` for `t` in `1..=terminal_t`.
    pub decisions: [Vec<Decision>; 2],
    /// On-path payoffs from period 1.
    pub values: [f64; 2],
    /// Period in which the on-path war ends.
    pub end_period: u32,
    pub selection_rule: String,
}

impl WoAPolicy {
    pub fn decision(&self, player: PlayerId, t: u32) -> Decision {
        self.decisions[player.index()][(t - 1) as usize]
    }
}

struct Stage {
    /// `payoffs[row][col]` with index 0 = Continue.
    payoffs: [[[f64; 2]; 2]; 2],
}

impl Stage {
    fn build(config: &WoAConfig, t: u32, continuation: [f64; 2]) -> Result<Self, EquilibriumError> {
        let loss = [loss(config, PlayerId::A, t)?, loss(config, PlayerId::B, t)?];
        let win = |w: PlayerId| config.winner_payoff_value(w, &loss);
        let (c, s) = (0usize, 1usize);
        let mut payoffs = [[[0.0; 2]; 2]; 2];
        payoffs[c][c] = continuation;
        payoffs[s][s] = [-loss[0], -loss[1]];
        payoffs[c][s] = [win(PlayerId::A), -loss[1]];
        payoffs[s][c] = [-loss[0], win(PlayerId::B)];
        Ok(Stage { payoffs })
    }

    fn equilibria(&self) -> Vec<(usize, usize)> {
        let p = &self.payoffs;
        let mut out = Vec::new();
        for r in 0..2 {
            for c in 0..2 {
                let row_ok = p[r][c][0] >= p[1 - r][c][0] - DEFAULT_TOL;
                let col_ok = p[r][c][1] >= p[r][1 - c][1] - DEFAULT_TOL;
                if row_ok && col_ok {
                    out.push((r, c));
                }
            }
        }
        out
    }

    fn select(&self, eqs: &[(usize, usize)]) -> Option<(usize, usize)> {
        let p = &self.payoffs;
        eqs.iter()
            .copied()
            .filter(|&(r, c)| !eqs.iter().any(|&(r2, c2)| pareto_dominates(p[r2][c2], p[r][c], DEFAULT_TOL)))
            .min()
    }
}

fn loss(config: &WoAConfig, player: PlayerId, t: u32) -> Result<f64, EquilibriumError> {
    woa_loss(config, player, t).map_err(|_| EquilibriumError::UnsupportedVariant)
}

fn check(config: &WoAConfig) -> Result<(), EquilibriumError> {
    if !config.is_classic() {
        return Err(EquilibriumError::UnsupportedVariant);
    }
    config.validate().map_err(|e| EquilibriumError::InvalidProfile(e.to_string()))
}

fn terminal_value(config: &WoAConfig) -> Result<[f64; 2], EquilibriumError> {
    let t = config.terminal_t;
    Ok([-loss(config, PlayerId::A, t)?, -loss(config, PlayerId::B, t)?])
}

fn finish(config: &WoAConfig, rows: Vec<Decision>, cols: Vec<Decision>, values: [f64; 2]) -> WoAPolicy {
    let end_period = (1..=config.terminal_t)
        .find(|&t| {
            let i = (t - 1) as usize;
            rows[i] == Decision::Surrender || cols[i] == Decision::Surrender
        })
        .unwrap_or(config.terminal_t);
    WoAPolicy {
        decisions: [rows, cols],
        values,
        end_period,
        selection_rule: SPE_SELECTION_RULE.to_string(),
    }
}

/// The subgame-perfect policy selected by [`SPE_SELECTION_RULE`].
pub fn woa_spe_truncated(config: &WoAConfig) -> Result<WoAPolicy, EquilibriumError> {
    check(config)?;
    let n = config.terminal_t as usize;
    let mut rows = vec![Decision::Surrender; n];
    let mut cols = vec![Decision::Surrender; n];
    let mut value = terminal_value(config)?;
    for t in (1..config.terminal_t).rev() {
        let stage = Stage::build(config, t, value)?;
        // a stage equilibrium always exists: against Surrender, Continue
        // strictly wins because prizes are positive
        let (r, c) = stage.select(&stage.equilibria()).ok_or(EquilibriumError::UnsupportedVariant)?;
        rows[(t - 1) as usize] = Decision::from_index(r);
        cols[(t - 1) as usize] = Decision::from_index(c);
        value = stage.payoffs[r][c];
    }
    Ok(finish(config, rows, cols, value))
}

/// Every subgame-perfect policy, obtained by branching over all stage
/// equilibria instead of selecting one. Exponential in `terminal_t`; meant
/// for short horizons.
pub fn woa_spe_all(config: &WoAConfig) -> Result<Vec<WoAPolicy>, EquilibriumError> {
    check(config)?;
    let n = config.terminal_t as usize;
    // partial policies for periods t..=terminal_t, stored front-first
    let mut partial: Vec<(Vec<Decision>, Vec<Decision>, [f64; 2])> =
        vec![(vec![Decision::Surrender], vec![Decision::Surrender], terminal_value(config)?)];
    for t in (1..config.terminal_t).rev() {
        let mut next = Vec::new();
        for (rows, cols, value) in &partial {
            let stage = Stage::build(config, t, *value)?;
            for (r, c) in stage.equilibria() {
                let mut rs = vec![Decision::from_index(r)];
                rs.extend_from_slice(rows);
                let mut cs = vec![Decision::from_index(c)];
                cs.extend_from_slice(cols);
                next.push((rs, cs, stage.payoffs[r][c]));
            }
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(rows, cols, value)| {
            debug_assert_eq!(rows.len(), n);
            finish(config, rows, cols, value)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::WoAVariant;
    use Decision::*;

    #[test]
    fn single_period_is_forced_surrender() {
        let p = woa_spe_truncated(&WoAConfig::classic(5.0, 2.0, 0.5, 1)).unwrap();
        assert_eq!(p.decisions, [vec![Surrender], vec![Surrender]]);
        assert_eq!(p.values, [-2.0, -2.0]);
        assert_eq!(p.end_period, 1);
    }

    #[test]
    fn three_period_policy() {
        // terminal value -3.5; at t=2 the stage game has (C,S) and (S,C),
        // lowest index picks (C,S); at t=1 row continues dominantly
        let p = woa_spe_truncated(&WoAConfig::classic(5.0, 2.0, 0.5, 3)).unwrap();
        assert_eq!(p.decisions[0], vec![Continue, Continue, Surrender]);
        assert_eq!(p.decisions[1], vec![Surrender, Surrender, Surrender]);
        assert_eq!(p.values, [3.0, -2.0]);
        assert_eq!(p.end_period, 1);
        assert!(woa_spe_all(&WoAConfig::classic(5.0, 2.0, 0.5, 3)).unwrap().contains(&p));
    }

    #[test]
    fn evolving_is_unsupported() {
        let mut c = WoAConfig::classic(5.0, 2.0, 0.5, 3);
        c.variant = WoAVariant::Evolving(crate::game::EvolvingParams {
            state_dim: 1,
            transition_coeff: 0.5,
            noise_scale: 0.1,
            cost_weights: [vec![1.0], vec![1.0]],
            initial_state: None,
        });
        assert_eq!(woa_spe_truncated(&c), Err(EquilibriumError::UnsupportedVariant));
    }
}
