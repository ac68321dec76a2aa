//! Contrast agents: optimistic planners that differ from UBEV only in the
//! rate term of the confidence width, and a uniformly random agent.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    check_delta, plan_with, run_agent, AgentConfig, EpisodeEvent, EpisodeObserver, PlanResult, VisitCounters,
    WidthRule,
};
use crate::confidence::{logn_width, logt_width};
use crate::error::{Error, Result};
use crate::mdp::{optimal_return, sample_episode, Policy, TabularMdp};
use crate::metrics::{gap_against, EpisodeRecord, RunLog, RunMeta};
use crate::rng::PRNG_ID;

/// Optimistic planning with width `sqrt((2 ln max{T, e} + ln(18SAH/δ)) / n)`.
pub fn plan_logt(counters: &VisitCounters, delta: f64, episodes: u64) -> Result<PlanResult> {
    check_delta(delta)?;
    counters.check()?;
    let (ns, na, h) = (counters.num_states(), counters.num_actions(), counters.horizon());
    Ok(plan_with(
        counters,
        |n| logt_width(n, episodes, ns, na, h, delta),
        None,
    ))
}

/// Optimistic planning with width `sqrt((2 ln max{n, e} + ln(18SAH/δ)) / n)`.
pub fn plan_logn(counters: &VisitCounters, delta: f64) -> Result<PlanResult> {
    check_delta(delta)?;
    counters.check()?;
    let (ns, na, h) = (counters.num_states(), counters.num_actions(), counters.horizon());
    Ok(plan_with(counters, |n| logn_width(n, ns, na, h, delta), None))
}

/// Plays a fresh uniformly random deterministic policy every episode.
pub fn random_agent<R: Rng>(
    mdp: &TabularMdp,
    num_episodes: u64,
    rng: &mut R,
    observer: &mut dyn EpisodeObserver,
) -> RunLog {
    let rho_star = optimal_return(mdp);
    let mut log = RunLog::new(RunMeta {
        algorithm: Algorithm::Random.to_string(),
        seed: 0,
        mdp_digest: mdp.digest(),
        delta: f64::NAN,
        prng: PRNG_ID.to_string(),
        rho_star,
        horizon: mdp.horizon(),
    });
    let start = Instant::now();
    let (ns, na, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    for k in 1..=num_episodes {
        let policy = Policy::from_fn(ns, h, |_, _| rng.random_range(0..na));
        let record = EpisodeRecord {
            episode: k,
            delta_k: gap_against(mdp, rho_star, &policy),
            optimistic_value: None,
            wall_ns: start.elapsed().as_nanos() as u64,
        };
        observer.on_episode(&EpisodeEvent {
            record: &record,
            policy: &policy,
        });
        log.push(record);
        sample_episode(mdp, &policy, rng);
    }
    log
}

/// Agents selectable from an experiment config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ubev")]
    Ubev,
    #[serde(rename = "logT")]
    LogT,
    #[serde(rename = "logn")]
    LogN,
    #[serde(rename = "random")]
    Random,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ubev => "ubev",
            Algorithm::LogT => "logT",
            Algorithm::LogN => "logn",
            Algorithm::Random => "random",
        }
    }

    fn width_rule(self) -> Option<WidthRule> {
        match self {
            Algorithm::Ubev => Some(WidthRule::Lil),
            Algorithm::LogT => Some(WidthRule::LogEpisodes),
            Algorithm::LogN => Some(WidthRule::LogVisits),
            Algorithm::Random => None,
        }
    }

    /// Run this agent. `delta`, `known_rewards` and `plan_every` are ignored by
    /// the random agent.
    pub fn run<R: Rng>(
        self,
        mdp: &TabularMdp,
        num_episodes: u64,
        settings: &AgentConfig,
        rng: &mut R,
        observer: &mut dyn EpisodeObserver,
    ) -> Result<RunLog> {
        match self.width_rule() {
            Some(rule) => {
                let config = settings.clone().with_rule(rule);
                run_agent(mdp, num_episodes, &config, rng, observer)
            }
            None => Ok(random_agent(mdp, num_episodes, rng, observer)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Algorithm::Ubev,
            Algorithm::LogT,
            Algorithm::LogN,
            Algorithm::Random,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}
