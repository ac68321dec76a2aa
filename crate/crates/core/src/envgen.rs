//! Experiment environments: random Dirichlet MDPs and the hard two-armed
//! bandit pair.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{RewardModel, TabularMdp};
use crate::rng::{self, Prng};

fn default_alpha() -> f64 {
    0.1
}

fn default_zero_reward_prob() -> f64 {
    0.85
}

/// Parameters of a random sparse-reward MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "default_zero_reward_prob")]
    pub zero_reward_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RandomMdpSpec {
    /// Spec with the default concentration (0.1) and reward sparsity (0.85).
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, seed: u64) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            dirichlet_alpha: default_alpha(),
            zero_reward_prob: default_zero_reward_prob(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 || self.horizon == 0 {
            return Err(Error::InvalidArgument(
                "num_states, num_actions and horizon must be at least 1".into(),
            ));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dirichlet_alpha must be positive, got {}",
                self.dirichlet_alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.zero_reward_prob) {
            return Err(Error::InvalidArgument(format!(
                "zero_reward_prob must lie in [0, 1], got {}",
                self.zero_reward_prob
            )));
        }
        Ok(())
    }
}

/// Draw a Dirichlet(alpha, ..., alpha) vector by normalizing Gamma(alpha, 1)
/// draws. Rows whose draws all underflow to zero are redrawn.
pub fn dirichlet_row<R: Rng + ?Sized>(gamma: &Gamma<f64>, len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            row.iter_mut().for_each(|x| *x /= sum);
            return row;
        }
    }
}

/// Random MDP: Dirichlet transition rows, deterministic sparse rewards and a
/// uniform initial distribution. Transitions are drawn in `[s][a][t]` order,
/// followed by rewards in the same order, from a stream keyed by `spec.seed`.
pub fn random_mdp(spec: &RandomMdpSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let (ns, na, h) = (spec.num_states, spec.num_actions, spec.horizon);
    let mut rng: Prng = rng::stream(spec.seed, &["envgen", "random_mdp"]);
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("gamma shape: {e}")))?;

    let mut rows = Vec::with_capacity(ns * na * h);
    for _ in 0..ns * na * h {
        rows.push(dirichlet_row(&gamma, ns, &mut rng));
    }
    let mut means = Vec::with_capacity(ns * na * h);
    for _ in 0..ns * na * h {
        let zero = rng.random::<f64>() < spec.zero_reward_prob;
        means.push(if zero { 0.0 } else { rng.random::<f64>() });
    }

    let idx = |s: usize, a: usize, t: usize| (s * na + a) * h + t;
    TabularMdp::from_fn(
        ns,
        na,
        h,
        vec![1.0 / ns as f64; ns],
        |s, a, t| rows[idx(s, a, t)].clone(),
        |s, a, t| RewardModel::deterministic(means[idx(s, a, t)]),
    )
}

/// The pair of one-state, one-step bandits that are hard to tell apart.
///
/// Arm 0 pays Bernoulli(1/2 + alpha/2) in both. Arm 1 pays Bernoulli(1/2) in
/// the first MDP and Bernoulli(1/2 + alpha) in the second.
pub fn hard_bandit_pair(alpha: f64) -> Result<(TabularMdp, TabularMdp)> {
    if !(alpha > 0.0 && alpha < 0.25) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1/4), got {alpha}"
        )));
    }
    let build = |second_arm: f64| {
        TabularMdp::from_fn(
            1,
            2,
            1,
            vec![1.0],
            |_, _, _| vec![1.0],
            |_, a, _| RewardModel::bernoulli(if a == 0 { 0.5 + alpha / 2.0 } else { second_arm }),
        )
    };
    Ok((build(0.5)?, build(0.5 + alpha)?))
}
