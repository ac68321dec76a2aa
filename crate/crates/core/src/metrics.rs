//! Performance criteria computed exactly from run logs: optimality gaps,
//! ε-mistake counts, regret and optimism violations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{expected_return, optimal_return, Policy, TabularMdp};

/// Gaps within this distance of ε are not counted as ε-mistakes.
pub const MISTAKE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: String,
    pub seed: u64,
    pub mdp_digest: String,
    pub delta: f64,
    pub prng: String,
    /// Optimal return of the MDP the run was played on.
    pub rho_star: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode index.
    pub episode: u64,
    pub delta_k: f64,
    /// `p0ᵀṼ_1` for optimistic agents.
    pub optimistic_value: Option<f64>,
    /// Nanoseconds since the run started, taken after planning.
    pub wall_ns: u64,
}

impl EpisodeRecord {
    /// Equality ignoring timing.
    pub fn same_outcome(&self, other: &EpisodeRecord) -> bool {
        self.episode == other.episode
            && self.delta_k.to_bits() == other.delta_k.to_bits()
            && self.optimistic_value.map(f64::to_bits) == other.optimistic_value.map(f64::to_bits)
    }
}

/// Per-episode records of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    records: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn new(meta: RunMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
        }
    }

    /// Append the next episode. Episodes must count up from 1.
    pub fn push(&mut self, record: EpisodeRecord) {
        debug_assert_eq!(record.episode, self.records.len() as u64 + 1);
        self.records.push(record);
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.delta_k)
    }

    /// Expected return of the policy played in each episode, `ρ* - Δ_k`.
    pub fn returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| self.meta.rho_star - r.delta_k)
    }

    /// Same metadata and same outcomes in every episode, timing aside.
    pub fn same_outcomes(&self, other: &RunLog) -> bool {
        self.meta == other.meta
            && self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_outcome(b))
    }

    fn prefix(&self, t: usize) -> Result<&[EpisodeRecord]> {
        self.records.get(..t).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "T = {t} exceeds the {} logged episodes",
                self.records.len()
            ))
        })
    }
}

/// `ρ* - ρ^π` given a precomputed `ρ*`, clamped at zero.
pub fn gap_against(mdp: &TabularMdp, rho_star: f64, policy: &Policy) -> f64 {
    let gap = rho_star - expected_return(mdp, policy);
    debug_assert!(gap >= -1e-10, "negative optimality gap {gap}");
    gap.max(0.0)
}

/// `Δ = ρ* - ρ^π`, always in `[0, H]`.
pub fn optimality_gap(mdp: &TabularMdp, policy: &Policy) -> f64 {
    gap_against(mdp, optimal_return(mdp), policy)
}

/// Number of ε-mistakes for each ε of a grid, over the first `T` episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeCurve {
    pub episodes: u64,
    pub epsilon_grid: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Geometric grid of 16 values from `H / 1000` up to `H`, ascending.
pub fn default_epsilon_grid(horizon: usize) -> Vec<f64> {
    let h = horizon as f64;
    (0..16)
        .rev()
        .map(|i| h * 10f64.powf(-3.0 * i as f64 / 15.0))
        .collect()
}

/// `N_ε(T) = #{k <= T : Δ_k > ε}` for every ε in an ascending grid.
pub fn mistake_counts(log: &RunLog, epsilon_grid: &[f64], t: usize) -> Result<MistakeCurve> {
    if epsilon_grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
    {
        return Err(Error::InvalidArgument(
            "epsilon grid must be strictly increasing".into(),
        ));
    }
    let records = log.prefix(t)?;
    let counts = epsilon_grid
        .iter()
        .map(|&eps| records.iter().filter(|r| r.delta_k > eps + MISTAKE_TOL).count() as u64)
        .collect();
    Ok(MistakeCurve {
        episodes: t as u64,
        epsilon_grid: epsilon_grid.to_vec(),
        counts,
    })
}

/// `R(T) = Σ_{k<=T} Δ_k`.
pub fn regret(log: &RunLog, t: usize) -> Result<f64> {
    Ok(log.prefix(t)?.iter().map(|r| r.delta_k).sum())
}

/// Episodes whose optimistic value fell below `rho_star - tol`.
pub fn optimism_violations(log: &RunLog, rho_star: f64, tol: f64) -> u64 {
    log.records
        .iter()
        .filter(|r| matches!(r.optimistic_value, Some(v) if v < rho_star - tol))
        .count() as u64
}

/// Per-run summary written by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub T: u64,
    pub regret: f64,
    pub mistake_curve: MistakeCurve,
    /// `None` for agents without optimistic values.
    pub optimism_violations: Option<u64>,
}

/// Tolerance used for optimism checks in summaries.
pub const OPTIMISM_TOL: f64 = 1e-9;

pub fn summarize(log: &RunLog, epsilon_grid: &[f64]) -> Result<RunSummary> {
    let t = log.len();
    let has_optimism = log.records.iter().any(|r| r.optimistic_value.is_some());
    Ok(RunSummary {
        algorithm: log.meta.algorithm.clone(),
        seed: log.meta.seed,
        T: t as u64,
        regret: regret(log, t)?,
        mistake_curve: mistake_counts(log, epsilon_grid, t)?,
        optimism_violations: has_optimism.then(|| optimism_violations(log, log.meta.rho_star, OPTIMISM_TOL)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::hard_bandit_pair;

    fn log_of(gaps: &[f64], optimistic: Option<f64>) -> RunLog {
        let mut log = RunLog::new(RunMeta {
            algorithm: "test".into(),
            seed: 0,
            mdp_digest: String::new(),
            delta: 0.1,
            prng: String::new(),
            rho_star: 1.0,
            horizon: 3,
        });
        for (i, &g) in gaps.iter().enumerate() {
            log.push(EpisodeRecord {
                episode: i as u64 + 1,
                delta_k: g,
                optimistic_value: optimistic,
                wall_ns: 0,
            });
        }
        log
    }

    #[test]
    fn mistake_examples() {
        let log = log_of(&[2.0, 0.5, 0.05], None);
        assert_eq!(mistake_counts(&log, &[1.0], 3).unwrap().counts, vec![1]);
        assert_eq!(mistake_counts(&log, &[0.01], 3).unwrap().counts, vec![3]);
        assert_eq!(mistake_counts(&log, &[2.5], 3).unwrap().counts, vec![0]);
        // strict inequality with tolerance
        assert_eq!(mistake_counts(&log, &[0.5], 3).unwrap().counts, vec![1]);
        assert_eq!(mistake_counts(&log, &[0.5 - 1e-11], 3).unwrap().counts, vec![1]);
    }

    #[test]
    fn mistake_errors() {
        let log = log_of(&[2.0, 0.5], None);
        assert!(mistake_counts(&log, &[1.0, 0.5], 2).is_err());
        assert!(mistake_counts(&log, &[0.5], 3).is_err());
        assert!(regret(&log, 3).is_err());
    }

    #[test]
    fn regret_examples() {
        let log = log_of(&[2.0, 0.5, 0.05], None);
        assert!((regret(&log, 3).unwrap() - 2.55).abs() < 1e-15);
        assert_eq!(regret(&log, 0).unwrap(), 0.0);
        assert!(regret(&log, 1).unwrap() <= regret(&log, 2).unwrap());
    }

    #[test]
    fn optimism_examples() {
        let log = log_of(&[0.0; 4], Some(3.0));
        assert_eq!(optimism_violations(&log, 1.0, 1e-9), 0);
        let mut log = log_of(&[0.0; 3], Some(3.0));
        log.push(EpisodeRecord {
            episode: 4,
            delta_k: 0.0,
            optimistic_value: Some(0.0),
            wall_ns: 0,
        });
        assert_eq!(optimism_violations(&log, 1.0, 1e-9), 1);
        assert_eq!(optimism_violations(&log_of(&[0.0], None), 1.0, 0.0), 0);
    }

    #[test]
    fn bandit_gaps() {
        let (m1, _) = hard_bandit_pair(0.2).unwrap();
        assert_eq!(optimality_gap(&m1, &Policy::constant(1, 1, 0)), 0.0);
        assert!((optimality_gap(&m1, &Policy::constant(1, 1, 1)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn default_grid_shape() {
        let grid = default_epsilon_grid(10);
        assert_eq!(grid.len(), 16);
        assert!((grid[0] - 0.01).abs() < 1e-12);
        assert!((grid[15] - 10.0).abs() < 1e-12);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn summary_fields() {
        let log = log_of(&[2.0, 0.5, 0.05], Some(3.0));
        let s = summarize(&log, &[0.1, 1.0]).unwrap();
        assert_eq!(s.T, 3);
        assert_eq!(s.mistake_curve.counts, vec![2, 1]);
        assert_eq!(s.optimism_violations, Some(0));
        let s = summarize(&log_of(&[0.1], None), &[0.1]).unwrap();
        assert_eq!(s.optimism_violations, None);
    }
}
