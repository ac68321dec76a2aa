#![allow(dead_code)]

use rand::Rng;

use ubev::confidence::ubev_width;
use ubev::mdp::{Policy, RewardModel, TabularMdp};
use ubev::rng::{stream, Prng};
use ubev::VisitCounters;

pub fn rng(seed: u64, label: &str) -> Prng {
    stream(seed, &["tests", label])
}

/// Probability vector with some exact zeros, never all zero.
pub fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    -rng.random::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

/// MDP with a random initial distribution; each reward is Bernoulli with
/// probability `bernoulli_share`, deterministic otherwise.
pub fn random_mdp<R: Rng>(rng: &mut R, ns: usize, na: usize, h: usize, bernoulli_share: f64) -> TabularMdp {
    let p0 = random_simplex(rng, ns);
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..ns * na * h {
        transitions.extend(random_simplex(rng, ns));
        let mean = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random::<f64>()
        };
        rewards.push(if rng.random_bool(bernoulli_share) {
            RewardModel::bernoulli(mean)
        } else {
            RewardModel::deterministic(mean)
        });
    }
    let mdp = TabularMdp::from_parts(ns, na, h, p0, transitions, rewards).unwrap();
    ubev::mdp::validate(&mdp).unwrap();
    mdp
}

pub fn random_policy<R: Rng>(rng: &mut R, ns: usize, na: usize, h: usize) -> Policy {
    Policy::from_fn(ns, h, |_, _| rng.random_range(0..na))
}

/// Counter tables mixing unvisited triples, small counts and very large ones.
pub fn random_counters<R: Rng>(rng: &mut R, ns: usize, na: usize, h: usize) -> VisitCounters {
    let mut next = Vec::new();
    let mut rewards = Vec::new();
    let mut max_n = 0;
    for _ in 0..ns * na * h {
        let scale: u64 = match rng.random_range(0..4) {
            0 => 0,
            1 => 5,
            2 => 1000,
            _ => 10_000_000,
        };
        let row: Vec<u64> = (0..ns)
            .map(|_| {
                if scale == 0 {
                    0
                } else {
                    rng.random_range(0..=scale)
                }
            })
            .collect();
        let n: u64 = row.iter().sum();
        max_n = max_n.max(n);
        let l = match rng.random_range(0..4) {
            0 => 0.0,
            1 => n as f64,
            _ => rng.random::<f64>() * n as f64,
        };
        rewards.push(l);
        next.extend(row);
    }
    VisitCounters::from_tables(ns, na, h, next, rewards, max_n).unwrap()
}

/// Maximum of `vᵀP` over the simplex intersected with `lo <= vᵀP <= hi`,
/// by enumerating the vertices of the feasible polytope: simplex corners
/// inside the slab and edge points where the slab boundary is attained.
pub fn max_linear_over_slab(v: &[f64], lo: f64, hi: f64) -> f64 {
    const EPS: f64 = 1e-12;
    let mut best = f64::NEG_INFINITY;
    for &vi in v {
        if vi >= lo - EPS && vi <= hi + EPS {
            best = best.max(vi);
        }
    }
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] == v[j] {
                continue;
            }
            for bound in [lo, hi] {
                if !bound.is_finite() {
                    continue;
                }
                // λ v_i + (1 - λ) v_j = bound
                let lambda = (bound - v[j]) / (v[i] - v[j]);
                if (-EPS..=1.0 + EPS).contains(&lambda) {
                    let lambda = lambda.clamp(0.0, 1.0);
                    best = best.max(lambda * v[i] + (1.0 - lambda) * v[j]);
                }
            }
        }
    }
    assert!(best.is_finite(), "empty feasible set");
    best
}

/// Maximum of `r'` over `[0, 1]` intersected with `|r' - r̂| <= φ`, from the
/// interval endpoints.
pub fn max_reward_in_interval(r_hat: f64, phi: f64) -> f64 {
    [0.0, 1.0, r_hat - phi, r_hat + phi]
        .into_iter()
        .filter(|c| c.is_finite() && (0.0..=1.0).contains(c) && (c - r_hat).abs() <= phi + 1e-12)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Q-values `[t][s][a]` of the constrained optimistic planning problem,
/// solved step by step with the oracles above. Steps are 0-based, so the
/// transition slack at step `t` is `(H - 1 - t) φ`.
pub fn oracle_q_values(counters: &VisitCounters, delta: f64) -> Vec<f64> {
    let (ns, na, h) = (counters.num_states(), counters.num_actions(), counters.horizon());
    let mut q = vec![0.0; h * ns * na];
    let mut next_v = vec![0.0; ns];
    for t in (0..h).rev() {
        let mut v = vec![0.0; ns];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let n = counters.visits(s, a, t);
                let phi = ubev_width(n, ns, na, h, delta);
                let (r_hat, centre) = if n == 0 {
                    (0.0, 0.0)
                } else {
                    let p_hat: Vec<f64> = counters
                        .next_counts(s, a, t)
                        .iter()
                        .map(|&c| c as f64 / n as f64)
                        .collect();
                    let centre = p_hat.iter().zip(&next_v).map(|(p, x)| p * x).sum();
                    (counters.reward_sum(s, a, t) / n as f64, centre)
                };
                let steps_left = (h - 1 - t) as f64;
                let slack = if steps_left == 0.0 { 0.0 } else { steps_left * phi };
                let value = max_reward_in_interval(r_hat, phi)
                    + max_linear_over_slab(&next_v, centre - slack, centre + slack);
                q[(t * ns + s) * na + a] = value;
                best = best.max(value);
            }
            v[s] = best;
        }
        next_v = v;
    }
    q
}
