//! Configuration-driven experiment runner.
//!
//! A run matrix of (algorithm, seed) pairs is executed in parallel; results
//! are collected and written by one thread in sorted key order so the output
//! does not depend on the number of workers.
//!
//! Files written to `output_dir`:
//!
//! - `episodes.csv`: per-episode rows, header
//!   `algorithm,seed,episode,delta_k,cum_regret,optimistic_value,return_window_mean`
//! - `summary.json`: one [`RunSummary`] per run
//! - `metadata.json`: generator id, wall-clock timings, the config
//! - `mdp.json`: the MDP that was played

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, EpisodeObserver, WidthRule};
use crate::baselines::Algorithm;
use crate::envgen::{random_mdp, RandomMdpSpec};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::metrics::{default_epsilon_grid, summarize, RunLog, RunSummary};
use crate::rng::{self, PRNG_ID};

pub const CSV_HEADER: &str = "algorithm,seed,episode,delta_k,cum_regret,optimistic_value,return_window_mean";

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "UBEV_WORKERS";

/// Where the MDP of an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSource {
    Random(RandomMdpSpec),
    /// Path to an MDP JSON document, relative to the working directory.
    File(PathBuf),
}

impl Default for MdpSource {
    fn default() -> Self {
        MdpSource::Random(RandomMdpSpec::new(5, 3, 10, 0))
    }
}

fn default_episodes() -> u64 {
    100_000
}
fn default_delta() -> f64 {
    0.1
}
fn default_one() -> u64 {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_window() -> usize {
    1000
}

/// Experiment description. Only `algorithms` and `seeds` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mdp: MdpSource,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_episodes")]
    pub num_episodes: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Ascending ε values; defaults to a 16-point geometric grid on [H/1000, H].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
    /// Write every `log_every`-th episode (plus the last) to the CSV.
    #[serde(default = "default_one")]
    pub log_every: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Plan with the true reward means instead of learned ones.
    #[serde(default)]
    pub known_rewards: bool,
    #[serde(default = "default_one")]
    pub plan_every: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Episodes averaged in `return_window_mean`.
    #[serde(default = "default_window")]
    pub return_window: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.algorithms.is_empty() {
            return bad("`algorithms` must not be empty");
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must not be empty");
        }
        if self.num_episodes == 0 {
            return bad("`num_episodes` must be at least 1");
        }
        if self.log_every == 0 {
            return bad("`log_every` must be at least 1");
        }
        if self.plan_every == 0 {
            return bad("`plan_every` must be at least 1");
        }
        if self.return_window == 0 {
            return bad("`return_window` must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("`delta` must lie in (0, 1]");
        }
        if let Some(grid) = &self.epsilon_grid {
            let increasing = grid
                .windows(2)
                .all(|w| w[0].partial_cmp(&w[1]) == Some(Ordering::Less));
            if grid.is_empty() || grid[0].partial_cmp(&0.0) != Some(Ordering::Greater) || !increasing {
                return bad("`epsilon_grid` must be nonempty, positive and strictly increasing");
            }
        }
        if let MdpSource::Random(spec) = &self.mdp {
            spec.validate()
                .map_err(|e| Error::Config(format!("`mdp.random`: {e}")))?;
        }
        Ok(())
    }

    /// Agent settings shared by all optimistic algorithms of this config.
    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            rule: WidthRule::Lil,
            delta: self.delta,
            known_rewards: self.known_rewards,
            plan_every: self.plan_every,
        }
    }

    pub fn epsilon_grid_for(&self, horizon: usize) -> Vec<f64> {
        self.epsilon_grid
            .clone()
            .unwrap_or_else(|| default_epsilon_grid(horizon))
    }

    /// (algorithm, seed) pairs in output order, duplicates removed.
    pub fn run_keys(&self) -> Vec<(Algorithm, u64)> {
        let mut keys: Vec<(Algorithm, u64)> = self
            .algorithms
            .iter()
            .flat_map(|&a| self.seeds.iter().map(move |&s| (a, s)))
            .collect();
        keys.sort_by(|x, y| (x.0.name(), x.1).cmp(&(y.0.name(), y.1)));
        keys.dedup();
        keys
    }
}

/// Parse and validate a JSON experiment config. Unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_mdp(source: &MdpSource) -> Result<TabularMdp> {
    match source {
        MdpSource::Random(spec) => random_mdp(spec),
        MdpSource::File(path) => read_mdp(path),
    }
}

pub fn read_mdp(path: &Path) -> Result<TabularMdp> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Play one (algorithm, seed) run of an experiment.
pub fn run_one(
    config: &ExperimentConfig,
    mdp: &TabularMdp,
    algorithm: Algorithm,
    seed: u64,
    observer: &mut dyn EpisodeObserver,
) -> Result<RunLog> {
    let mut rng = rng::run_stream(config.master_seed, algorithm.name(), seed);
    let mut log = algorithm.run(
        mdp,
        config.num_episodes,
        &config.agent_config(),
        &mut rng,
        observer,
    )?;
    log.meta.seed = seed;
    Ok(log)
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunLog>,
    pub summaries: Vec<RunSummary>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub metadata_path: PathBuf,
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Run an experiment with the worker count from `UBEV_WORKERS` (or all cores).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_workers(config, worker_count())
}

pub fn run_experiment_with_workers(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let mdp = load_mdp(&config.mdp)?;
    let keys = config.run_keys();
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<(RunLog, u128)>> = pool.install(|| {
        keys.par_iter()
            .map(|&(algorithm, seed)| {
                let clock = Instant::now();
                let log = run_one(config, &mdp, algorithm, seed, &mut ())?;
                Ok((log, clock.elapsed().as_nanos()))
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let (log, ns) = r?;
        timings.push(serde_json::json!({
            "algorithm": log.meta.algorithm,
            "seed": log.meta.seed,
            "wall_ns": ns as u64,
        }));
        runs.push(log);
    }

    let grid = config.epsilon_grid_for(mdp.horizon());
    let summaries = runs
        .iter()
        .map(|log| summarize(log, &grid))
        .collect::<Result<Vec<_>>>()?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("episodes.csv");
    let summary_path = dir.join("summary.json");
    let metadata_path = dir.join("metadata.json");
    write(
        &csv_path,
        &render_csv(&runs, config.log_every, config.return_window),
    )?;
    write(&summary_path, &serde_json::to_string_pretty(&summaries)?)?;
    write(&dir.join("mdp.json"), &serde_json::to_string(&mdp)?)?;
    let metadata = serde_json::json!({
        "prng": PRNG_ID,
        "master_seed": config.master_seed,
        "mdp_digest": mdp.digest(),
        "rho_star": runs.first().map(|r| r.meta.rho_star),
        "plan_every": config.plan_every,
        "known_rewards": config.known_rewards,
        "workers": workers.unwrap_or_else(rayon::current_num_threads),
        "started_unix": started,
        "runs": timings,
        "config": config,
    });
    write(&metadata_path, &serde_json::to_string_pretty(&metadata)?)?;

    Ok(ExperimentReport {
        runs,
        summaries,
        csv_path,
        summary_path,
        metadata_path,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// CSV body for a set of runs (already in output order). Episode `k` is
/// written when `k % log_every == 0` or it is the last episode.
pub fn render_csv(runs: &[RunLog], log_every: u64, window: usize) -> String {
    let mut out = String::with_capacity(64 * runs.iter().map(RunLog::len).sum::<usize>() + 80);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for log in runs {
        let returns: Vec<f64> = log.returns().collect();
        let mut prefix = Vec::with_capacity(returns.len() + 1);
        prefix.push(0.0);
        for r in &returns {
            prefix.push(prefix.last().unwrap() + r);
        }
        let mut cum_regret = 0.0;
        let last = log.len() as u64;
        for (i, rec) in log.records().iter().enumerate() {
            cum_regret += rec.delta_k;
            if rec.episode % log_every != 0 && rec.episode != last {
                continue;
            }
            let lo = (i + 1).saturating_sub(window);
            let window_mean = (prefix[i + 1] - prefix[lo]) / (i + 1 - lo) as f64;
            let optimistic = rec.optimistic_value.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                log.meta.algorithm,
                log.meta.seed,
                rec.episode,
                rec.delta_k,
                cum_regret,
                optimistic,
                window_mean
            );
        }
    }
    out
}

/// Load `summary.json` from an output directory.
pub fn summarize_dir(dir: &Path) -> Result<Vec<RunSummary>> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"algorithms": ["ubev"], "seeds": [3]}"#).unwrap();
        assert_eq!(c.num_episodes, 100_000);
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.log_every, 1);
        assert_eq!(c.plan_every, 1);
        assert_eq!(c.return_window, 1000);
        assert!(!c.known_rewards);
        assert_eq!(c.mdp, MdpSource::Random(RandomMdpSpec::new(5, 3, 10, 0)));
        assert_eq!(c.epsilon_grid_for(10), default_epsilon_grid(10));
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse_config(r#"{"seeds": [1]}"#).unwrap_err().to_string();
        assert!(err.contains("algorithms"), "{err}");
        let err = parse_config(r#"{"algorithms": ["ubev"]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("seeds"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected_with_position() {
        let err = parse_config("{\"algorithms\": [\"ubev\"],\n \"seeds\": [1],\n \"bogus\": 2}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus") && err.contains("line 3"), "{err}");
        let err = parse_config(r#"{"algorithms": ["ucrl"], "seeds": [1]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("ucrl"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for doc in [
            r#"{"algorithms": [], "seeds": [1]}"#,
            r#"{"algorithms": ["ubev"], "seeds": []}"#,
            r#"{"algorithms": ["ubev"], "seeds": [1], "num_episodes": 0}"#,
            r#"{"algorithms": ["ubev"], "seeds": [1], "log_every": 0}"#,
            r#"{"algorithms": ["ubev"], "seeds": [1], "delta": 0}"#,
            r#"{"algorithms": ["ubev"], "seeds": [1], "epsilon_grid": [0.5, 0.1]}"#,
            r#"{"algorithms": ["ubev"], "seeds": [1], "mdp": {"random": {"num_states": 0, "num_actions": 1, "horizon": 1}}}"#,
        ] {
            assert!(matches!(parse_config(doc), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn run_keys_sorted_and_deduped() {
        let c =
            parse_config(r#"{"algorithms": ["random", "ubev", "logT", "ubev"], "seeds": [2, 1]}"#).unwrap();
        let names: Vec<(String, u64)> = c
            .run_keys()
            .into_iter()
            .map(|(a, s)| (a.name().to_string(), s))
            .collect();
        assert_eq!(
            names,
            vec![
                ("logT".into(), 1),
                ("logT".into(), 2),
                ("random".into(), 1),
                ("random".into(), 2),
                ("ubev".into(), 1),
                ("ubev".into(), 2)
            ]
        );
    }
}
