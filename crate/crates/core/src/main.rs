use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ubev::confidence::{monte_carlo_failure_rate, BoundKind, BoundSpec};
use ubev::envgen::{random_mdp, RandomMdpSpec};
use ubev::harness::{parse_config, run_experiment, summarize_dir};
use ubev::Error;

#[derive(Parser)]
#[command(
    name = "ubev",
    version,
    about = "Episodic tabular RL with LIL confidence bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random Dirichlet MDP and write it as JSON.
    GenMdp {
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Dirichlet concentration of each transition row.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.85)]
        zero_reward_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte-Carlo check of a confidence bound's failure probability.
    VerifyBounds {
        /// uniform-hoeffding, uniform-bernoulli, uniform-l1, visitation-lower,
        /// fixed-time-hoeffding or logt-width
        #[arg(long)]
        bound: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        max_t: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Mean of the Bernoulli data.
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Number of categories for uniform-l1.
        #[arg(long, default_value_t = 2)]
        support_size: u32,
        /// Slack W for visitation-lower (default ln 100).
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Print the per-run summaries of an output directory as JSON.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::GenMdp {
            states,
            actions,
            horizon,
            alpha,
            zero_reward_prob,
            seed,
            out,
        } => {
            let spec = RandomMdpSpec {
                num_states: states,
                num_actions: actions,
                horizon,
                dirichlet_alpha: alpha,
                zero_reward_prob,
                seed,
            };
            let mdp = random_mdp(&spec)?;
            let json = serde_json::to_string_pretty(&mdp)?;
            std::fs::write(&out, json).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            eprintln!("wrote {} (digest {})", out.display(), mdp.digest());
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
                path: config.clone(),
                source,
            })?;
            let report = run_experiment(&parse_config(&text)?)?;
            for s in &report.summaries {
                println!("{} seed={} T={} regret={}", s.algorithm, s.seed, s.T, s.regret);
            }
            eprintln!("wrote {}", report.csv_path.display());
        }
        Command::VerifyBounds {
            bound,
            delta,
            max_t,
            trials,
            seed,
            sigma,
            mu,
            support_size,
            slack,
        } => {
            let kind: BoundKind = bound.parse()?;
            let mut spec = BoundSpec::new(kind, delta);
            spec.sigma = sigma;
            spec.mu = mu;
            spec.support_size = support_size;
            if let Some(w) = slack {
                spec.slack = w;
            }
            let result = monte_carlo_failure_rate(&spec, max_t, trials, seed)?;
            let verdict = if result.passes() { "pass" } else { "fail" };
            println!(
                "{kind} {} {} {} {verdict}",
                result.rate, result.stderr, result.budget
            );
            if !result.passes() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Summarize { dir } => {
            let summaries = summarize_dir(&dir)?;
            println!("{}", serde_json::to_string_pretty(&summaries)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
