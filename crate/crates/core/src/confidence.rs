//! Time-uniform confidence bounds and a Monte-Carlo coverage checker.
//!
//! All radius functions are closed forms. `n`/`t` is a sample count; a zero
//! count yields an infinite width.

use std::f64::consts::{E, LN_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `ln(ln(max{x, e}))`.
#[inline]
pub fn llnp(x: f64) -> f64 {
    x.max(E).ln().ln()
}

#[inline]
fn confidence_log(num_states: usize, num_actions: usize, horizon: usize, delta: f64) -> f64 {
    (18.0 * num_states as f64 * num_actions as f64 * horizon as f64 / delta).ln()
}

#[inline]
fn width_from_rate(rate: f64, n: u64, log_term: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    ((2.0 * rate + log_term) / n as f64).sqrt()
}

/// UBEV's LIL width `sqrt((2 llnp(n) + ln(18 S A H / delta)) / n)`.
pub fn ubev_width(n: u64, num_states: usize, num_actions: usize, horizon: usize, delta: f64) -> f64 {
    width_from_rate(
        llnp(n as f64),
        n,
        confidence_log(num_states, num_actions, horizon, delta),
    )
}

/// Width with `llnp(n)` replaced by `ln(max{T, e})`, `T` the episodes so far.
pub fn logt_width(
    n: u64,
    episodes: u64,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    delta: f64,
) -> f64 {
    let rate = (episodes as f64).max(E).ln();
    width_from_rate(rate, n, confidence_log(num_states, num_actions, horizon, delta))
}

/// Width with `llnp(n)` replaced by `ln(max{n, e})` (a delta/n^2 union bound).
pub fn logn_width(n: u64, num_states: usize, num_actions: usize, horizon: usize, delta: f64) -> f64 {
    let rate = (n as f64).max(E).ln();
    width_from_rate(rate, n, confidence_log(num_states, num_actions, horizon, delta))
}

/// Anytime two-sided radius for conditionally sigma^2-subgaussian means:
/// `sqrt(4 sigma^2 / t * (2 llnp(t) + ln(3/delta)))`. Fails w.p. at most 2 delta.
pub fn uniform_hoeffding_radius(t: u64, sigma: f64, delta: f64) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    let t = t as f64;
    (4.0 * sigma * sigma / t * (2.0 * llnp(t) + (3.0 / delta).ln())).sqrt()
}

/// Anytime Bernstein-type radius for Bernoulli(mu) means. Fails w.p. at most
/// 2 delta.
pub fn uniform_bernoulli_radius(t: u64, mu: f64, delta: f64) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    let t = t as f64;
    let g = 2.0 * llnp(t) + (3.0 / delta).ln();
    (2.0 * mu / t * g).sqrt() + g / t
}

/// `ln(3 (2^U - 2) / delta)`. Exact powers up to `U = 60`; beyond that the
/// count is handled in log space as `U ln 2 + ln(1 - 2^(1-U))`.
pub fn l1_log_term(support_size: u32, delta: f64) -> f64 {
    debug_assert!(support_size >= 2);
    if support_size <= 60 {
        let subsets = ((1u64 << support_size) - 2) as f64;
        (3.0 * subsets / delta).ln()
    } else {
        l1_log_term_log_space(support_size, delta)
    }
}

pub(crate) fn l1_log_term_log_space(support_size: u32, delta: f64) -> f64 {
    let u = support_size as f64;
    u * LN_2 + (-(2f64.powf(1.0 - u))).ln_1p() + (3.0 / delta).ln()
}

/// Anytime L1 radius for the empirical distribution on `U` outcomes. Fails
/// w.p. at most delta.
pub fn uniform_l1_radius(t: u64, support_size: u32, delta: f64) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    let t = t as f64;
    (4.0 / t * (2.0 * llnp(t) + l1_log_term(support_size, delta))).sqrt()
}

/// Fixed-time two-sided Hoeffding radius `sqrt(2 sigma^2 ln(2/delta) / t)`.
/// Valid at any single `t`, not uniformly over `t`.
pub fn fixed_time_hoeffding_radius(t: u64, sigma: f64, delta: f64) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    (2.0 * sigma * sigma * (2.0 / delta).ln() / t as f64).sqrt()
}

/// Hoeffding radius with `llnp(t)` replaced by `ln(max{T, e})` for a known
/// final sample size `T`.
pub fn logt_hoeffding_radius(t: u64, final_t: u64, sigma: f64, delta: f64) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    let rate = (final_t as f64).max(E).ln();
    (4.0 * sigma * sigma / t as f64 * (2.0 * rate + (3.0 / delta).ln())).sqrt()
}

/// True iff `sum_{i<=n} X_i >= sum_{i<=n} P_i / 2 - W` for every prefix `n`.
pub fn visitation_lower_bound_holds(counts: &[bool], probs: &[f64], w: f64) -> Result<bool> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indicators vs {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let mut hits = 0.0;
    let mut mass = 0.0;
    for (&x, &p) in counts.iter().zip(probs) {
        hits += if x { 1.0 } else { 0.0 };
        mass += p;
        if hits < mass / 2.0 - w {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundKind {
    UniformHoeffding,
    UniformBernoulli,
    UniformL1,
    VisitationLower,
    FixedTimeHoeffding,
    LogTWidth,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::UniformHoeffding,
        BoundKind::UniformBernoulli,
        BoundKind::UniformL1,
        BoundKind::VisitationLower,
        BoundKind::FixedTimeHoeffding,
        BoundKind::LogTWidth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::UniformHoeffding => "uniform-hoeffding",
            BoundKind::UniformBernoulli => "uniform-bernoulli",
            BoundKind::UniformL1 => "uniform-l1",
            BoundKind::VisitationLower => "visitation-lower",
            BoundKind::FixedTimeHoeffding => "fixed-time-hoeffding",
            BoundKind::LogTWidth => "logt-width",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name().replace('-', "") == key)
            .ok_or_else(|| Error::UnknownBound(s.to_string()))
    }
}

/// A bound together with the parameters of its nominal data distribution.
///
/// Subgaussian bounds are exercised on Bernoulli(`mu`) data, for which
/// `sigma = 1/2` is valid by Hoeffding's lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub delta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub support_size: u32,
    /// Slack `W` of the visitation bound.
    pub slack: f64,
    /// Replace the bound's radius by this constant (test hook).
    pub constant_radius: Option<f64>,
}

impl BoundSpec {
    pub fn new(kind: BoundKind, delta: f64) -> Self {
        Self {
            kind,
            delta,
            sigma: 0.5,
            mu: 0.5,
            support_size: 2,
            slack: 100f64.ln(),
            constant_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if self.kind == BoundKind::UniformL1 && self.support_size < 2 {
            return bad(format!("support size must be >= 2, got {}", self.support_size));
        }
        if self.slack.is_nan() || self.slack < 0.0 {
            return bad(format!("W must be nonnegative, got {}", self.slack));
        }
        Ok(())
    }

    /// Failure probability the bound promises.
    pub fn budget(&self) -> f64 {
        match self.kind {
            BoundKind::UniformHoeffding | BoundKind::UniformBernoulli | BoundKind::LogTWidth => {
                2.0 * self.delta
            }
            BoundKind::UniformL1 | BoundKind::FixedTimeHoeffding => self.delta,
            BoundKind::VisitationLower => (-self.slack).exp(),
        }
    }

    /// Radius at sample count `t` when the data run to `max_t`.
    pub fn radius(&self, t: u64, max_t: u64) -> f64 {
        if let Some(r) = self.constant_radius {
            return r;
        }
        match self.kind {
            BoundKind::UniformHoeffding => uniform_hoeffding_radius(t, self.sigma, self.delta),
            BoundKind::UniformBernoulli => uniform_bernoulli_radius(t, self.mu, self.delta),
            BoundKind::UniformL1 => uniform_l1_radius(t, self.support_size, self.delta),
            BoundKind::FixedTimeHoeffding => fixed_time_hoeffding_radius(t, self.sigma, self.delta),
            BoundKind::LogTWidth => logt_hoeffding_radius(t, max_t, self.sigma, self.delta),
            // the slack W plays the role of a radius here
            BoundKind::VisitationLower => self.slack,
        }
    }
}

/// Outcome of a Monte-Carlo coverage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureRate {
    pub rate: f64,
    pub stderr: f64,
    pub budget: f64,
    pub trials: u64,
}

impl FailureRate {
    /// `rate <= budget + 3 stderr`.
    pub fn passes(&self) -> bool {
        self.rate <= self.budget + 3.0 * self.stderr
    }
}

/// Fraction of `trials` i.i.d. sample paths of length `max_t` on which the
/// bound is violated at some `t <= max_t`, with its binomial standard error.
///
/// Trial `i` draws from stream `i` of a generator keyed by `seed` and the
/// bound kind, so the result does not depend on scheduling.
pub fn monte_carlo_failure_rate(
    bound: &BoundSpec,
    max_t: u64,
    trials: u64,
    seed: u64,
) -> Result<FailureRate> {
    bound.validate()?;
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    if max_t == 0 {
        return Err(Error::InvalidArgument("max_t must be positive".into()));
    }
    let radii: Vec<f64> = (1..=max_t).map(|t| bound.radius(t, max_t)).collect();
    let base = rng::stream(seed, &["confidence", "monte_carlo", bound.kind.name()]);
    let violations = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = base.clone();
            rng.set_stream(i);
            path_violates(bound, &radii, &mut rng)
        })
        .count();
    let rate = violations as f64 / trials as f64;
    Ok(FailureRate {
        rate,
        stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        budget: bound.budget(),
        trials,
    })
}

fn path_violates<R: Rng>(bound: &BoundSpec, radii: &[f64], rng: &mut R) -> bool {
    match bound.kind {
        BoundKind::UniformL1 => {
            let u = bound.support_size as usize;
            let p = 1.0 / u as f64;
            let mut counts = vec![0u64; u];
            for (i, &r) in radii.iter().enumerate() {
                counts[rng.random_range(0..u)] += 1;
                let t = (i + 1) as f64;
                let l1: f64 = counts.iter().map(|&c| (c as f64 / t - p).abs()).sum();
                if l1 >= r {
                    return true;
                }
            }
            false
        }
        BoundKind::VisitationLower => {
            let coin = Bernoulli::new(bound.mu).expect("mu validated");
            let mut hits = 0.0;
            let mut mass = 0.0;
            for &w in radii {
                hits += if coin.sample(rng) { 1.0 } else { 0.0 };
                mass += bound.mu;
                if hits < mass / 2.0 - w {
                    return true;
                }
            }
            false
        }
        _ => {
            let coin = Bernoulli::new(bound.mu).expect("mu validated");
            let mut sum = 0.0;
            for (i, &r) in radii.iter().enumerate() {
                if coin.sample(rng) {
                    sum += 1.0;
                }
                if (sum / (i + 1) as f64 - bound.mu).abs() >= r {
                    return true;
                }
            }
            false
        }
    }
}
