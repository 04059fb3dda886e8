//! War of Attrition: two players pay a discounted per-period cost until one
//! surrenders; the survivor collects its prize.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::GameError;
use crate::PlayerId;

/// Lower bound on the per-period cost in the evolving variant.
pub const COST_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Surrender,
}

impl Decision {
    pub const LABELS: [&'static str; 2] = ["Continue", "Surrender"];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Decision {
        if i == 0 {
            Decision::Continue
        } else {
            Decision::Surrender
        }
    }

    pub fn label(self) -> &'static str {
        Self::LABELS[self.index()]
    }
}

/// Which loss term is subtracted from the winner's prize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WinnerPayoff {
    /// `V_winner - L_winner(t)`.
    #[default]
    OwnLoss,
    /// `V_surrenderer - L_winner(t)`, the subscripts exactly as printed in
    /// the original model statement.
    Literal,
}

/// Parameters of the evolving variant: `theta` follows a first-order
/// autoregression `theta_t = coeff * theta_{t-1} + noise`, and player `i`
/// pays `max(COST_FLOOR, c_i * (1 + w_i . theta_t))` in period `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvingParams {
    pub state_dim: usize,
    pub transition_coeff: f64,
    pub noise_scale: f64,
    /// One weight vector per player, each of length `state_dim`.
    pub cost_weights: [Vec<f64>; 2],
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WoAVariant {
    #[default]
    Classic,
    Evolving(EvolvingParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoAConfig {
    /// Prize `V_i` per player.
    pub values: [f64; 2],
    /// Per-period cost `c_i` per player.
    pub costs: [f64; 2],
    pub gamma: f64,
    /// Period at which the war ends in forced mutual surrender.
    pub terminal_t: u32,
    #[serde(default)]
    pub variant: WoAVariant,
    #[serde(default)]
    pub winner_payoff: WinnerPayoff,
}

impl WoAConfig {
    /// Symmetric classic war.
    pub fn classic(value: f64, cost: f64, gamma: f64, terminal_t: u32) -> Self {
        WoAConfig {
            values: [value, value],
            costs: [cost, cost],
            gamma,
            terminal_t,
            variant: WoAVariant::Classic,
            winner_payoff: WinnerPayoff::OwnLoss,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: String| Err(GameError::InvalidConfig(m));
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad(format!("values must be positive, got {:?}", self.values));
        }
        if self.costs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return bad(format!("costs must be positive, got {:?}", self.costs));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.terminal_t < 1 {
            return bad("terminal_t must be >= 1".into());
        }
        if let WoAVariant::Evolving(p) = &self.variant {
            if p.state_dim == 0 || p.cost_weights.iter().any(|w| w.len() != p.state_dim) {
                return bad("evolving cost weights must match state_dim".into());
            }
            if p.initial_state.as_ref().is_some_and(|s| s.len() != p.state_dim) {
                return bad("initial state must match state_dim".into());
            }
            if !(p.noise_scale >= 0.0) {
                return bad("noise_scale must be nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn is_classic(&self) -> bool {
        matches!(self.variant, WoAVariant::Classic)
    }

    pub(crate) fn winner_payoff_value(&self, winner: PlayerId, loss: &[f64; 2]) -> f64 {
        let loser = winner.opponent();
        match self.winner_payoff {
            WinnerPayoff::OwnLoss => self.values[winner.index()] - loss[winner.index()],
            WinnerPayoff::Literal => self.values[loser.index()] - loss[winner.index()],
        }
    }
}

/// Compounded loss `c_i (1 + gamma + ... + gamma^(t-1))` of the classic war.
pub fn woa_loss(config: &WoAConfig, player: PlayerId, t: u32) -> Result<f64, GameError> {
    if !config.is_classic() {
        return Err(GameError::UnsupportedVariant);
    }
    if t < 1 {
        return Err(GameError::InvalidPeriod(t));
    }
    let c = config.costs[player.index()];
    let mut discount = 1.0;
    let mut total = 0.0;
    for _ in 0..t {
        total += c * discount;
        discount *= config.gamma;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoAState {
    /// Period about to be played, starting at 1.
    pub t: u32,
    /// Public state (evolving variant only; empty otherwise).
    pub theta: Vec<f64>,
    pub surrendered: [bool; 2],
    pub accumulated_loss: [f64; 2],
    /// Costs charged in the most recent period.
    pub last_cost: [f64; 2],
    pub terminal: bool,
}

impl WoAState {
    pub fn initial(config: &WoAConfig) -> Self {
        let theta = match &config.variant {
            WoAVariant::Classic => Vec::new(),
            WoAVariant::Evolving(p) => p.initial_state.clone().unwrap_or_else(|| vec![0.0; p.state_dim]),
        };
        WoAState {
            t: 1,
            theta,
            surrendered: [false; 2],
            accumulated_loss: [0.0; 2],
            last_cost: [0.0; 2],
            terminal: false,
        }
    }
}

/// How a war ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationClass {
    /// Exactly one player surrendered in the first period.
    Concession,
    /// Exactly one player surrendered in a later period.
    AsymmetricResolution,
    /// Both surrendered, voluntarily or at the terminal period.
    MutualSurrender,
}

impl TerminationClass {
    pub const ALL: [TerminationClass; 3] =
        [TerminationClass::Concession, TerminationClass::AsymmetricResolution, TerminationClass::MutualSurrender];

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationClass::Concession => "concession",
            TerminationClass::AsymmetricResolution => "asymmetric_resolution",
            TerminationClass::MutualSurrender => "mutual_surrender",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WoAOutcome {
    pub period: u32,
    pub class: TerminationClass,
    pub winner: Option<PlayerId>,
    pub payoffs: [f64; 2],
    /// Whether the terminal rule ended the war.
    pub forced: bool,
}

fn period_rng(seed: u64, t: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (u64::from(t)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Advance the war by one period.
pub fn woa_step(
    state: &WoAState,
    config: &WoAConfig,
    decisions: [Decision; 2],
    seed: u64,
) -> Result<(WoAState, Option<WoAOutcome>), GameError> {
    if state.terminal || state.t > config.terminal_t {
        return Err(GameError::SteppedTerminalGame);
    }
    let t = state.t;
    let mut next = state.clone();

    let cost = match &config.variant {
        WoAVariant::Classic => config.costs,
        WoAVariant::Evolving(p) => {
            let mut rng = period_rng(seed, t);
            let noise = Normal::new(0.0, p.noise_scale.max(0.0))
                .map_err(|e| GameError::InvalidConfig(e.to_string()))?;
            for x in next.theta.iter_mut() {
                *x = p.transition_coeff * *x + noise.sample(&mut rng);
            }
            let mut cost = [0.0; 2];
            for (i, c) in cost.iter_mut().enumerate() {
                let tilt: f64 = p.cost_weights[i].iter().zip(&next.theta).map(|(w, th)| w * th).sum();
                *c = (config.costs[i] * (1.0 + tilt)).max(COST_FLOOR);
            }
            cost
        }
    };
    let discount = config.gamma.powi(t as i32 - 1);
    for i in 0..2 {
        next.accumulated_loss[i] += discount * cost[i];
    }
    next.last_cost = cost;

    let loss = next.accumulated_loss;
    let mutual = |forced| WoAOutcome {
        period: t,
        class: TerminationClass::MutualSurrender,
        winner: None,
        payoffs: [-loss[0], -loss[1]],
        forced,
    };
    let outcome = if t >= config.terminal_t {
        Some(mutual(true))
    } else {
        match decisions {
            [Decision::Surrender, Decision::Surrender] => Some(mutual(false)),
            [Decision::Continue, Decision::Continue] => None,
            [d0, _] => {
                let winner = if d0 == Decision::Surrender { PlayerId::B } else { PlayerId::A };
                let loser = winner.opponent();
                let mut payoffs = [0.0; 2];
                payoffs[loser.index()] = -loss[loser.index()];
                payoffs[winner.index()] = config.winner_payoff_value(winner, &loss);
                let class =
                    if t == 1 { TerminationClass::Concession } else { TerminationClass::AsymmetricResolution };
                Some(WoAOutcome { period: t, class, winner: Some(winner), payoffs, forced: false })
            }
        }
    };

    match &outcome {
        Some(o) => {
            next.terminal = true;
            next.surrendered = match o.winner {
                None => [true, true],
                Some(w) => {
                    let mut s = [true, true];
                    s[w.index()] = false;
                    s
                }
            };
        }
        None => next.t = t + 1,
    }
    Ok((next, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Decision::*;

    fn cfg() -> WoAConfig {
        WoAConfig::classic(5.0, 2.0, 0.5, 30)
    }

    #[test]
    fn loss_examples() {
        let c = cfg();
        assert_eq!(woa_loss(&c, PlayerId::A, 1).unwrap(), 2.0);
        assert_eq!(woa_loss(&c, PlayerId::A, 3).unwrap(), 3.5);
        let undiscounted = WoAConfig::classic(5.0, 2.0, 1.0, 30);
        assert_eq!(woa_loss(&undiscounted, PlayerId::B, 4).unwrap(), 8.0);
        assert_eq!(woa_loss(&c, PlayerId::A, 0), Err(GameError::InvalidPeriod(0)));
    }

    #[test]
    fn loss_is_increasing_and_bounded() {
        let c = cfg();
        let mut prev = 0.0;
        for t in 1..=30 {
            let l = woa_loss(&c, PlayerId::A, t).unwrap();
            assert!(l > prev);
            assert!(l < 2.0 / (1.0 - 0.5));
            prev = l;
        }
        assert!((4.0 - prev).abs() < 1e-8);
    }

    #[test]
    fn asymmetric_resolution_at_period_two() {
        let c = cfg();
        let s0 = WoAState::initial(&c);
        let (s1, o) = woa_step(&s0, &c, [Continue, Continue], 1).unwrap();
        assert!(o.is_none());
        assert_eq!(s1.t, 2);
        let (s2, o) = woa_step(&s1, &c, [Surrender, Continue], 1).unwrap();
        let o = o.unwrap();
        assert_eq!(o.payoffs, [-3.0, 2.0]);
        assert_eq!(o.class, TerminationClass::AsymmetricResolution);
        assert_eq!(o.winner, Some(PlayerId::B));
        assert!(s2.terminal);
        assert_eq!(woa_step(&s2, &c, [Continue, Continue], 1), Err(GameError::SteppedTerminalGame));
    }

    #[test]
    fn mutual_surrender_first_period() {
        let c = cfg();
        let (_, o) = woa_step(&WoAState::initial(&c), &c, [Surrender, Surrender], 0).unwrap();
        assert_eq!(o.unwrap().payoffs, [-2.0, -2.0]);
    }

    #[test]
    fn forced_mutual_surrender_at_terminal_period() {
        let c = cfg();
        let mut s = WoAState::initial(&c);
        let mut last = None;
        for _ in 0..30 {
            let (n, o) = woa_step(&s, &c, [Continue, Continue], 0).unwrap();
            s = n;
            last = o;
        }
        let o = last.unwrap();
        let l30 = woa_loss(&c, PlayerId::A, 30).unwrap();
        assert_eq!(o.period, 30);
        assert!(o.forced);
        assert_eq!(o.class, TerminationClass::MutualSurrender);
        assert!((o.payoffs[0] + l30).abs() < 1e-12 && (o.payoffs[1] + l30).abs() < 1e-12);
    }

    #[test]
    fn literal_winner_payoff_reading() {
        let mut c = cfg();
        c.values = [5.0, 7.0];
        c.winner_payoff = WinnerPayoff::Literal;
        let (_, o) = woa_step(&WoAState::initial(&c), &c, [Surrender, Continue], 0).unwrap();
        // winner B collects the surrenderer's value minus its own loss
        assert_eq!(o.unwrap().payoffs, [-2.0, 3.0]);
        c.winner_payoff = WinnerPayoff::OwnLoss;
        let (_, o) = woa_step(&WoAState::initial(&c), &c, [Surrender, Continue], 0).unwrap();
        assert_eq!(o.unwrap().payoffs, [-2.0, 5.0]);
    }

    fn evolving() -> WoAConfig {
        WoAConfig {
            variant: WoAVariant::Evolving(EvolvingParams {
                state_dim: 2,
                transition_coeff: 0.8,
                noise_scale: 0.3,
                cost_weights: [vec![1.0, -0.5], vec![-1.0, 0.5]],
                initial_state: None,
            }),
            ..cfg()
        }
    }

    #[test]
    fn evolving_is_seed_deterministic() {
        let c = evolving();
        c.validate().unwrap();
        let run = |seed| {
            let mut s = WoAState::initial(&c);
            let mut trace = Vec::new();
            for _ in 0..10 {
                let (n, _) = woa_step(&s, &c, [Continue, Continue], seed).unwrap();
                trace.push((n.theta.clone(), n.accumulated_loss));
                s = n;
            }
            trace
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
        for (_, loss) in run(5).windows(2).map(|w| (w[0].1, w[1].1)) {
            assert!(loss.iter().all(|l| *l > 0.0));
        }
    }

    #[test]
    fn evolving_loss_is_nondecreasing_with_floor() {
        let c = evolving();
        let mut s = WoAState::initial(&c);
        for _ in 0..29 {
            let (n, _) = woa_step(&s, &c, [Continue, Continue], 9).unwrap();
            for i in 0..2 {
                assert!(n.accumulated_loss[i] >= s.accumulated_loss[i]);
                assert!(n.last_cost[i] >= COST_FLOOR);
            }
            s = n;
        }
    }

    #[test]
    fn loss_unsupported_for_evolving() {
        assert_eq!(woa_loss(&evolving(), PlayerId::A, 1), Err(GameError::UnsupportedVariant));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.gamma = 1.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.costs = [0.0, 1.0];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.terminal_t = 0;
        assert!(c.validate().is_err());
    }
}
