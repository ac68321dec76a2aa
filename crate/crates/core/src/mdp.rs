//! Episodic fixed-horizon tabular MDPs with time-dependent dynamics.
//!
//! Steps are indexed from zero: `t = 0` is the first decision of an episode
//! and `t = H - 1` the last. Value tables have `H + 1` rows, the last one being
//! the all-zero terminal row.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    Deterministic,
    Bernoulli,
}

/// Reward distribution of one (s, a, t) triple, supported on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub kind: RewardKind,
    pub mean: f64,
}

impl RewardModel {
    pub fn deterministic(mean: f64) -> Self {
        Self {
            kind: RewardKind::Deterministic,
            mean,
        }
    }

    pub fn bernoulli(mean: f64) -> Self {
        Self {
            kind: RewardKind::Bernoulli,
            mean,
        }
    }

    /// Draw a reward. Deterministic rewards consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            RewardKind::Deterministic => self.mean,
            RewardKind::Bernoulli => {
                if rng.random::<f64>() < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Full description of an episodic MDP.
///
/// Transition rows are stored for every step including the last one so that
/// indexing stays uniform; the row at `t = H - 1` never affects a return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_dist: Vec<f64>,
    // [s][a][t][s']
    transitions: Vec<f64>,
    // [s][a][t]
    rewards: Vec<RewardModel>,
}

impl TabularMdp {
    /// Assemble an MDP from flat row-major tables (`[s][a][t][s']` and
    /// `[s][a][t]`). Only shapes are checked here; call [`validate`] for the
    /// probabilistic invariants.
    pub fn from_parts(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_dist: Vec<f64>,
        transitions: Vec<f64>,
        rewards: Vec<RewardModel>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidMdp(format!(
                "S, A, H must be positive (got S={num_states}, A={num_actions}, H={horizon})"
            )));
        }
        let triples = num_states * num_actions * horizon;
        if initial_dist.len() != num_states {
            return Err(Error::DimensionMismatch(format!(
                "initial_dist has length {}, expected {num_states}",
                initial_dist.len()
            )));
        }
        if transitions.len() != triples * num_states {
            return Err(Error::DimensionMismatch(format!(
                "transitions has {} entries, expected {}",
                transitions.len(),
                triples * num_states
            )));
        }
        if rewards.len() != triples {
            return Err(Error::DimensionMismatch(format!(
                "rewards has {} entries, expected {triples}",
                rewards.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            initial_dist,
            transitions,
            rewards,
        })
    }

    /// Build and validate an MDP from per-triple closures.
    pub fn from_fn<P, R>(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_dist: Vec<f64>,
        mut transition: P,
        mut reward: R,
    ) -> Result<Self>
    where
        P: FnMut(usize, usize, usize) -> Vec<f64>,
        R: FnMut(usize, usize, usize) -> RewardModel,
    {
        let mut transitions = Vec::with_capacity(num_states * num_actions * horizon * num_states);
        let mut rewards = Vec::with_capacity(num_states * num_actions * horizon);
        for s in 0..num_states {
            for a in 0..num_actions {
                for t in 0..horizon {
                    let row = transition(s, a, t);
                    if row.len() != num_states {
                        return Err(Error::DimensionMismatch(format!(
                            "transition row (s={s}, a={a}, t={t}) has length {}, expected {num_states}",
                            row.len()
                        )));
                    }
                    transitions.extend_from_slice(&row);
                    rewards.push(reward(s, a, t));
                }
            }
        }
        let mdp = Self::from_parts(
            num_states,
            num_actions,
            horizon,
            initial_dist,
            transitions,
            rewards,
        )?;
        validate(&mdp)?;
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    #[inline]
    fn triple(&self, s: usize, a: usize, t: usize) -> usize {
        (s * self.num_actions + a) * self.horizon + t
    }

    /// Distribution of the next state after taking `a` in `s` at step `t`.
    #[inline]
    pub fn transition(&self, s: usize, a: usize, t: usize) -> &[f64] {
        let start = self.triple(s, a, t) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, t: usize) -> &RewardModel {
        &self.rewards[self.triple(s, a, t)]
    }

    #[inline]
    pub fn mean_reward(&self, s: usize, a: usize, t: usize) -> f64 {
        self.rewards[self.triple(s, a, t)].mean
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("MDP serialization is infallible");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Check every probability vector and reward mean.
pub fn validate(mdp: &TabularMdp) -> Result<()> {
    check_distribution(mdp.initial_dist())
        .map_err(|reason| Error::InvalidMdp(format!("initial_dist is not a distribution: {reason}")))?;
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            for t in 0..mdp.horizon {
                check_distribution(mdp.transition(s, a, t)).map_err(|reason| Error::InvalidTransition {
                    state: s,
                    action: a,
                    step: t,
                    reason,
                })?;
                let mean = mdp.mean_reward(s, a, t);
                if !(0.0..=1.0).contains(&mean) {
                    return Err(Error::InvalidReward {
                        state: s,
                        action: a,
                        step: t,
                        mean,
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some((i, x)) = p.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {i} is {x}"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Deterministic time-dependent policy, `action(s, t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    num_states: usize,
    horizon: usize,
    // [t][s]
    actions: Vec<usize>,
}

impl Policy {
    pub fn from_fn(num_states: usize, horizon: usize, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let mut actions = Vec::with_capacity(num_states * horizon);
        for t in 0..horizon {
            for s in 0..num_states {
                actions.push(f(s, t));
            }
        }
        Self {
            num_states,
            horizon,
            actions,
        }
    }

    /// Policy playing the same action everywhere.
    pub fn constant(num_states: usize, horizon: usize, action: usize) -> Self {
        Self::from_fn(num_states, horizon, |_, _| action)
    }

    #[inline]
    pub fn action(&self, s: usize, t: usize) -> usize {
        self.actions[t * self.num_states + s]
    }

    pub(crate) fn set(&mut self, s: usize, t: usize, action: usize) {
        self.actions[t * self.num_states + s] = action;
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Table `V[t][s]` for `t = 0..=H`; row `H` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    num_states: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(num_states: usize, horizon: usize) -> Self {
        Self {
            num_states,
            horizon,
            values: vec![0.0; num_states * (horizon + 1)],
        }
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.values[t * self.num_states + s]
    }

    #[inline]
    pub(crate) fn set(&mut self, t: usize, s: usize, v: f64) {
        self.values[t * self.num_states + s] = v;
    }

    /// The row `V[t][·]`.
    #[inline]
    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_states..(t + 1) * self.num_states]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
}

/// One recorded transition of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// State-action visitation probabilities `w[t][s][a]` of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyWeights {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    weights: Vec<f64>,
}

impl OccupancyWeights {
    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.weights[(t * self.num_states + s) * self.num_actions + a]
    }

    /// All weights of step `t`, laid out `[s][a]`.
    pub fn step(&self, t: usize) -> &[f64] {
        let width = self.num_states * self.num_actions;
        &self.weights[t * width..(t + 1) * width]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

#[inline]
fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Exact value of `policy` by backward induction.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &Policy) -> ValueFunction {
    let (ns, h) = (mdp.num_states, mdp.horizon);
    let mut v = ValueFunction::zeros(ns, h);
    for t in (0..h).rev() {
        for s in 0..ns {
            let a = policy.action(s, t);
            let next = dot(mdp.transition(s, a, t), v.step(t + 1));
            v.set(t, s, mdp.mean_reward(s, a, t) + next);
        }
    }
    v
}

/// Optimal values and a greedy optimal policy; ties go to the lowest action.
pub fn optimal_values(mdp: &TabularMdp) -> (ValueFunction, Policy) {
    let (ns, na, h) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut v = ValueFunction::zeros(ns, h);
    let mut policy = Policy::constant(ns, h, 0);
    for t in (0..h).rev() {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let q = mdp.mean_reward(s, a, t) + dot(mdp.transition(s, a, t), v.step(t + 1));
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            v.set(t, s, best);
            policy.set(s, t, best_a);
        }
    }
    (v, policy)
}

/// `p0ᵀ V^π_1`.
pub fn expected_return(mdp: &TabularMdp, policy: &Policy) -> f64 {
    dot(mdp.initial_dist(), evaluate_policy(mdp, policy).step(0))
}

/// The optimal return `p0ᵀ V*_1`.
pub fn optimal_return(mdp: &TabularMdp) -> f64 {
    dot(mdp.initial_dist(), optimal_values(mdp).0.step(0))
}

/// Forward recursion for the state-action occupancy of `policy`.
pub fn occupancy_weights(mdp: &TabularMdp, policy: &Policy) -> OccupancyWeights {
    let (ns, na, h) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut weights = vec![0.0; h * ns * na];
    let mut state_dist = mdp.initial_dist().to_vec();
    for t in 0..h {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let a = policy.action(s, t);
            let mass = state_dist[s];
            weights[(t * ns + s) * na + a] = mass;
            if mass != 0.0 {
                for (n, p) in next.iter_mut().zip(mdp.transition(s, a, t)) {
                    *n += mass * p;
                }
            }
        }
        state_dist = next;
    }
    OccupancyWeights {
        num_states: ns,
        num_actions: na,
        horizon: h,
        weights,
    }
}

/// The two expectation terms of the value difference identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDifference {
    pub total: f64,
    pub reward_term: f64,
    pub transition_term: f64,
}

/// Decompose `p0ᵀ(V'_1 - V''_1)` for a shared policy, with `V'` the values in
/// `mdp_a` and the expectation taken along trajectories of `mdp_b` (including
/// its initial distribution).
pub fn value_difference(mdp_a: &TabularMdp, mdp_b: &TabularMdp, policy: &Policy) -> Result<ValueDifference> {
    if (mdp_a.num_states, mdp_a.num_actions, mdp_a.horizon)
        != (mdp_b.num_states, mdp_b.num_actions, mdp_b.horizon)
    {
        return Err(Error::DimensionMismatch(format!(
            "(S, A, H) = ({}, {}, {}) vs ({}, {}, {})",
            mdp_a.num_states,
            mdp_a.num_actions,
            mdp_a.horizon,
            mdp_b.num_states,
            mdp_b.num_actions,
            mdp_b.horizon
        )));
    }
    let values_a = evaluate_policy(mdp_a, policy);
    let occupancy = occupancy_weights(mdp_b, policy);
    let mut reward_term = 0.0;
    let mut transition_term = 0.0;
    for t in 0..mdp_a.horizon {
        let next = values_a.step(t + 1);
        for s in 0..mdp_a.num_states {
            let a = policy.action(s, t);
            let w = occupancy.get(t, s, a);
            if w == 0.0 {
                continue;
            }
            reward_term += w * (mdp_a.mean_reward(s, a, t) - mdp_b.mean_reward(s, a, t));
            let diff: f64 = mdp_a
                .transition(s, a, t)
                .iter()
                .zip(mdp_b.transition(s, a, t))
                .zip(next)
                .map(|((pa, pb), v)| (pa - pb) * v)
                .sum();
            transition_term += w * diff;
        }
    }
    Ok(ValueDifference {
        total: reward_term + transition_term,
        reward_term,
        transition_term,
    })
}

/// Inverse-CDF draw from a probability vector. Falls back to the last index
/// with positive mass when rounding leaves `u` beyond the cumulative sum.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Roll out one episode of `policy`.
pub fn sample_episode<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &Policy, rng: &mut R) -> Trajectory {
    let mut steps = Vec::with_capacity(mdp.horizon);
    let mut state = sample_index(mdp.initial_dist(), rng);
    for t in 0..mdp.horizon {
        let action = policy.action(state, t);
        let reward = mdp.reward(state, action, t).sample(rng);
        let next_state = sample_index(mdp.transition(state, action, t), rng);
        steps.push(Step {
            step: t,
            state,
            action,
            reward,
            next_state,
        });
        state = next_state;
    }
    Trajectory { steps }
}

/// JSON wire format: nested arrays indexed `[s][a][t][s']`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub initial_dist: Vec<f64>,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<RewardModel>>>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let shape_err = |what: &str| {
            Error::DimensionMismatch(format!(
                "{what} does not have shape implied by S={}, A={}, H={}",
                doc.num_states, doc.num_actions, doc.horizon
            ))
        };
        let (ns, na, h) = (doc.num_states, doc.num_actions, doc.horizon);
        if doc.transitions.len() != ns
            || doc
                .transitions
                .iter()
                .any(|x| x.len() != na || x.iter().any(|y| y.len() != h || y.iter().any(|z| z.len() != ns)))
        {
            return Err(shape_err("transitions"));
        }
        if doc.rewards.len() != ns
            || doc
                .rewards
                .iter()
                .any(|x| x.len() != na || x.iter().any(|y| y.len() != h))
        {
            return Err(shape_err("rewards"));
        }
        let transitions = doc
            .transitions
            .into_iter()
            .flatten()
            .flatten()
            .flatten()
            .collect();
        let rewards = doc.rewards.into_iter().flatten().flatten().collect();
        let mdp = TabularMdp::from_parts(ns, na, h, doc.initial_dist, transitions, rewards)?;
        validate(&mdp)?;
        Ok(mdp)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        let (ns, na, h) = (mdp.num_states, mdp.num_actions, mdp.horizon);
        let transitions = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| (0..h).map(|t| mdp.transition(s, a, t).to_vec()).collect())
                    .collect()
            })
            .collect();
        let rewards = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| (0..h).map(|t| *mdp.reward(s, a, t)).collect())
                    .collect()
            })
            .collect();
        MdpDocument {
            num_states: ns,
            num_actions: na,
            horizon: h,
            initial_dist: mdp.initial_dist,
            transitions,
            rewards,
        }
    }
}
