//! The UBEV agent: optimistic backward induction with per-triple confidence
//! widths, followed by one episode of the greedy policy and a statistics
//! update.

use std::time::Instant;

use rand::Rng;

use crate::confidence::{logn_width, logt_width, ubev_width};
use crate::error::{Error, Result};
use crate::mdp::{sample_episode, Policy, TabularMdp, Trajectory, ValueFunction};
use crate::metrics::{gap_against, EpisodeRecord, RunLog, RunMeta};
use crate::rng::PRNG_ID;

/// Visit statistics `n`, `m` and `l`, indexed by (s, a, t).
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounters {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    // [s][a][t]
    visits: Vec<u64>,
    // [s][a][t][s']
    next_counts: Vec<u64>,
    // [s][a][t]
    reward_sums: Vec<f64>,
    episodes: u64,
}

impl VisitCounters {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let triples = num_states * num_actions * horizon;
        Self {
            num_states,
            num_actions,
            horizon,
            visits: vec![0; triples],
            next_counts: vec![0; triples * num_states],
            reward_sums: vec![0.0; triples],
            episodes: 0,
        }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.num_states(), mdp.num_actions(), mdp.horizon())
    }

    /// Counters from raw tables. `next_counts` is `[s][a][t][s']`; visit
    /// counts are its row sums. Fails if a reward sum lies outside `[0, n]`.
    pub fn from_tables(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        next_counts: Vec<u64>,
        reward_sums: Vec<f64>,
        episodes: u64,
    ) -> Result<Self> {
        let triples = num_states * num_actions * horizon;
        if next_counts.len() != triples * num_states || reward_sums.len() != triples {
            return Err(Error::DimensionMismatch(
                "counter tables do not match (S, A, H)".into(),
            ));
        }
        let visits = next_counts
            .chunks(num_states)
            .map(|row| row.iter().sum())
            .collect();
        let counters = Self {
            num_states,
            num_actions,
            horizon,
            visits,
            next_counts,
            reward_sums,
            episodes,
        };
        counters.check()?;
        Ok(counters)
    }

    #[inline]
    fn triple(&self, s: usize, a: usize, t: usize) -> usize {
        (s * self.num_actions + a) * self.horizon + t
    }

    /// `n(s, a, t)`.
    #[inline]
    pub fn visits(&self, s: usize, a: usize, t: usize) -> u64 {
        self.visits[self.triple(s, a, t)]
    }

    /// `m(·, s, a, t)`.
    #[inline]
    pub fn next_counts(&self, s: usize, a: usize, t: usize) -> &[u64] {
        let start = self.triple(s, a, t) * self.num_states;
        &self.next_counts[start..start + self.num_states]
    }

    /// `l(s, a, t)`.
    #[inline]
    pub fn reward_sum(&self, s: usize, a: usize, t: usize) -> f64 {
        self.reward_sums[self.triple(s, a, t)]
    }

    /// Number of episodes folded in by [`update`](Self::update).
    pub fn episodes(&self) -> u64 {
        self.episodes
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

    /// Verify `sum_s' m = n` and `0 <= l <= n` for every triple.
    pub fn check(&self) -> Result<()> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for t in 0..self.horizon {
                    let n = self.visits(s, a, t);
                    let marginal: u64 = self.next_counts(s, a, t).iter().sum();
                    if marginal != n {
                        return Err(Error::InconsistentCounters(format!(
                            "(s={s}, a={a}, t={t}): next-state counts sum to {marginal}, n = {n}"
                        )));
                    }
                    let l = self.reward_sum(s, a, t);
                    if !(0.0..=n as f64).contains(&l) {
                        return Err(Error::InconsistentCounters(format!(
                            "(s={s}, a={a}, t={t}): reward sum {l} outside [0, {n}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fold one episode into the statistics. The trajectory is checked in full
    /// before any counter changes.
    pub fn update(&mut self, traj: &Trajectory) -> Result<()> {
        if traj.steps.len() != self.horizon {
            return Err(Error::OutOfRange(format!(
                "trajectory has {} steps, horizon is {}",
                traj.steps.len(),
                self.horizon
            )));
        }
        for (t, step) in traj.steps.iter().enumerate() {
            if step.step != t
                || step.state >= self.num_states
                || step.next_state >= self.num_states
                || step.action >= self.num_actions
                || !(0.0..=1.0).contains(&step.reward)
            {
                return Err(Error::OutOfRange(format!("step {t}: {step:?}")));
            }
        }
        for step in &traj.steps {
            let idx = self.triple(step.state, step.action, step.step);
            self.visits[idx] += 1;
            self.next_counts[idx * self.num_states + step.next_state] += 1;
            self.reward_sums[idx] += step.reward;
        }
        self.episodes += 1;
        Ok(())
    }
}

/// Output of optimistic planning.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub policy: Policy,
    /// The optimistic values, row `H` all zero.
    pub values: ValueFunction,
    // [t][s][a]
    q_values: Vec<f64>,
    num_states: usize,
    num_actions: usize,
}

impl PlanResult {
    /// `Q(a)` computed for state `s` at step `t`.
    pub fn q(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q_values[(t * self.num_states + s) * self.num_actions + a]
    }

    /// `p0ᵀ Ṽ_1`.
    pub fn optimistic_return(&self, initial_dist: &[f64]) -> f64 {
        initial_dist
            .iter()
            .zip(self.values.step(0))
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// Optimistic backward induction with an arbitrary width function of the
/// visit count.
///
/// For each triple with `n` visits and width `phi = width(n)`:
///
/// ```text
/// Q(a) = min{1, r̂ + phi} + min{max Ṽ_{t+1}, V̂_next + (H - t) phi}
/// ```
///
/// with `r̂ = l/n`, `V̂_next = m(·)ᵀṼ_{t+1}/n`, both zero when `n = 0`, and
/// `(H - t)` the number of steps left after this one. When `known_rewards` is
/// given its mean replaces the first term.
pub fn plan_with<W>(counters: &VisitCounters, width: W, known_rewards: Option<&TabularMdp>) -> PlanResult
where
    W: Fn(u64) -> f64,
{
    let (ns, na, h) = (counters.num_states, counters.num_actions, counters.horizon);
    let mut values = ValueFunction::zeros(ns, h);
    let mut policy = Policy::constant(ns, h, 0);
    let mut q_values = vec![0.0; h * ns * na];

    for t in (0..h).rev() {
        let next = values.step(t + 1).to_vec();
        let max_next = next.iter().copied().fold(0.0, f64::max);
        let steps_left = (h - t - 1) as f64;
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let n = counters.visits(s, a, t);
                let phi = width(n);
                let (r_hat, v_next) = if n == 0 {
                    (0.0, 0.0)
                } else {
                    let weighted: f64 = counters
                        .next_counts(s, a, t)
                        .iter()
                        .zip(&next)
                        .map(|(&c, v)| c as f64 * v)
                        .sum();
                    (counters.reward_sum(s, a, t) / n as f64, weighted / n as f64)
                };
                let reward_part = match known_rewards {
                    Some(mdp) => mdp.mean_reward(s, a, t),
                    None => (r_hat + phi).min(1.0),
                };
                // 0 * inf is NaN; no steps left means no bonus
                let bonus = if steps_left == 0.0 { 0.0 } else { steps_left * phi };
                let q = reward_part + (v_next + bonus).min(max_next);
                q_values[(t * ns + s) * na + a] = q;
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            values.set(t, s, best);
            policy.set(s, t, best_a);
        }
    }
    PlanResult {
        policy,
        values,
        q_values,
        num_states: ns,
        num_actions: na,
    }
}

/// UBEV planning with the LIL width.
pub fn plan(counters: &VisitCounters, delta: f64) -> Result<PlanResult> {
    check_delta(delta)?;
    counters.check()?;
    let (ns, na, h) = (counters.num_states, counters.num_actions, counters.horizon);
    Ok(plan_with(counters, |n| ubev_width(n, ns, na, h, delta), None))
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )))
    }
}

/// Which confidence rate the optimistic planner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthRule {
    /// `llnp(n)`: UBEV.
    Lil,
    /// `ln(max{T, e})` with `T` the episodes observed so far.
    LogEpisodes,
    /// `ln(max{n, e})`.
    LogVisits,
}

impl WidthRule {
    pub fn width(
        self,
        n: u64,
        episodes: u64,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        delta: f64,
    ) -> f64 {
        match self {
            WidthRule::Lil => ubev_width(n, num_states, num_actions, horizon, delta),
            WidthRule::LogEpisodes => logt_width(n, episodes, num_states, num_actions, horizon, delta),
            WidthRule::LogVisits => logn_width(n, num_states, num_actions, horizon, delta),
        }
    }
}

/// Settings of an optimistic agent run.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub rule: WidthRule,
    pub delta: f64,
    /// Plan with the true reward means; the width's delta is scaled by 9/7.
    pub known_rewards: bool,
    /// Replan every this many episodes (1 = every episode).
    pub plan_every: u64,
}

impl AgentConfig {
    pub fn ubev(delta: f64) -> Self {
        Self {
            rule: WidthRule::Lil,
            delta,
            known_rewards: false,
            plan_every: 1,
        }
    }

    pub fn with_rule(mut self, rule: WidthRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn algorithm_name(&self) -> &'static str {
        match self.rule {
            WidthRule::Lil => "ubev",
            WidthRule::LogEpisodes => "logT",
            WidthRule::LogVisits => "logn",
        }
    }

    /// Delta used inside the width.
    pub fn width_delta(&self) -> f64 {
        if self.known_rewards {
            self.delta * 9.0 / 7.0
        } else {
            self.delta
        }
    }

    /// Plan against the current counters.
    pub fn plan(&self, counters: &VisitCounters, mdp: &TabularMdp) -> PlanResult {
        let (ns, na, h) = (counters.num_states, counters.num_actions, counters.horizon);
        let episodes = counters.episodes;
        let delta = self.width_delta();
        let rule = self.rule;
        plan_with(
            counters,
            |n| rule.width(n, episodes, ns, na, h, delta),
            self.known_rewards.then_some(mdp),
        )
    }
}

/// What an observer sees after each planning step.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeEvent<'a> {
    pub record: &'a EpisodeRecord,
    pub policy: &'a Policy,
}

/// Receives one event per episode, before the episode is played.
pub trait EpisodeObserver {
    fn on_episode(&mut self, event: &EpisodeEvent<'_>);
}

impl EpisodeObserver for () {
    fn on_episode(&mut self, _: &EpisodeEvent<'_>) {}
}

impl<F: FnMut(&EpisodeEvent<'_>)> EpisodeObserver for F {
    fn on_episode(&mut self, event: &EpisodeEvent<'_>) {
        self(event)
    }
}

/// Run an optimistic agent for `num_episodes` episodes.
///
/// Each episode: plan, record `Δ_k` (exact) and `p0ᵀṼ_1`, notify the
/// observer, play one episode, update the counters.
pub fn run_agent<R: Rng>(
    mdp: &TabularMdp,
    num_episodes: u64,
    config: &AgentConfig,
    rng: &mut R,
    observer: &mut dyn EpisodeObserver,
) -> Result<RunLog> {
    check_delta(config.delta)?;
    if config.plan_every == 0 {
        return Err(Error::InvalidArgument("plan_every must be at least 1".into()));
    }
    let rho_star = crate::mdp::optimal_return(mdp);
    let mut log = RunLog::new(RunMeta {
        algorithm: config.algorithm_name().to_string(),
        seed: 0,
        mdp_digest: mdp.digest(),
        delta: config.delta,
        prng: PRNG_ID.to_string(),
        rho_star,
        horizon: mdp.horizon(),
    });
    let mut counters = VisitCounters::for_mdp(mdp);
    let start = Instant::now();
    let mut current: Option<(PlanResult, f64, f64)> = None;

    for k in 1..=num_episodes {
        if current.is_none() || (k - 1) % config.plan_every == 0 {
            let planned = config.plan(&counters, mdp);
            let gap = gap_against(mdp, rho_star, &planned.policy);
            let optimistic = planned.optimistic_return(mdp.initial_dist());
            current = Some((planned, gap, optimistic));
        }
        let (planned, gap, optimistic) = current.as_ref().expect("planned above");
        let record = EpisodeRecord {
            episode: k,
            delta_k: *gap,
            optimistic_value: Some(*optimistic),
            wall_ns: start.elapsed().as_nanos() as u64,
        };
        observer.on_episode(&EpisodeEvent {
            record: &record,
            policy: &planned.policy,
        });
        log.push(record);
        let traj = sample_episode(mdp, &planned.policy, rng);
        counters.update(&traj)?;
    }
    Ok(log)
}
