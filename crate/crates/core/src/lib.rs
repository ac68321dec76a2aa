//! Episodic fixed-horizon tabular reinforcement learning with
//! law-of-iterated-logarithm confidence bounds.
//!
//! - [`mdp`]: exact MDP representation, dynamic programming and simulation
//! - [`envgen`]: random Dirichlet MDPs and the hard two-armed bandit pair
//! - [`confidence`]: anytime confidence radii and a Monte-Carlo coverage check
//! - [`agent`]: the UBEV agent (optimistic planning, statistics, run loop)
//! - [`baselines`]: rate-contrast planners and a random agent
//! - [`metrics`]: optimality gaps, ε-mistake curves, regret
//! - [`harness`]: config-driven parallel experiment runner

pub mod agent;
pub mod baselines;
pub mod confidence;
pub mod envgen;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod metrics;
pub mod rng;

pub use agent::{plan, plan_with, run_agent, AgentConfig, PlanResult, VisitCounters, WidthRule};
pub use baselines::{plan_logn, plan_logt, random_agent, Algorithm};
pub use error::{Error, Result};
pub use mdp::{Policy, RewardKind, RewardModel, TabularMdp, Trajectory, ValueFunction};
pub use metrics::{MistakeCurve, RunLog, RunSummary};
