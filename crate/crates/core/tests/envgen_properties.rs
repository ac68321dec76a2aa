mod common;

use proptest::prelude::*;
use rand_distr::Gamma;

use ubev::envgen::{dirichlet_row, hard_bandit_pair, random_mdp, RandomMdpSpec};
use ubev::mdp::{optimal_return, validate, RewardKind};

#[test]
fn zero_reward_fraction_near_configured_rate() {
    let (mut zeros, mut total) = (0usize, 0usize);
    for seed in 0..100 {
        let mdp = random_mdp(&RandomMdpSpec::new(5, 3, 10, seed)).unwrap();
        for s in 0..5 {
            for a in 0..3 {
                for t in 0..10 {
                    let r = mdp.reward(s, a, t);
                    assert_eq!(r.kind, RewardKind::Deterministic);
                    assert!((0.0..=1.0).contains(&r.mean));
                    zeros += usize::from(r.mean == 0.0);
                    total += 1;
                }
            }
        }
    }
    let frac = zeros as f64 / total as f64;
    assert!((0.83..=0.87).contains(&frac), "zero fraction {frac}");
}

#[test]
fn sparse_dirichlet_rows_concentrate() {
    let gamma = Gamma::new(0.1, 1.0).unwrap();
    let mut rng = common::rng(0, "dirichlet");
    let draws = 10_000;
    let mut max_sum = 0.0;
    for _ in 0..draws {
        let row = dirichlet_row(&gamma, 5, &mut rng);
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        max_sum += row.iter().copied().fold(0.0, f64::max);
    }
    assert!(max_sum / draws as f64 > 0.5);
}

#[test]
fn uniform_dirichlet_rows_have_uniform_means() {
    let gamma = Gamma::new(1.0, 1.0).unwrap();
    let mut rng = common::rng(1, "dirichlet-flat");
    let draws = 20_000;
    let mut sums = [0.0; 4];
    for _ in 0..draws {
        for (acc, x) in sums.iter_mut().zip(dirichlet_row(&gamma, 4, &mut rng)) {
            *acc += x;
        }
    }
    // each coordinate is Beta(1, 3): mean 1/4, variance 3/80
    let sd = (3.0f64 / 80.0 / draws as f64).sqrt();
    for acc in sums {
        assert!((acc / draws as f64 - 0.25).abs() <= 4.0 * sd);
    }
}

#[test]
fn same_seed_same_mdp() {
    let spec = RandomMdpSpec::new(4, 2, 6, 11);
    assert_eq!(random_mdp(&spec).unwrap(), random_mdp(&spec).unwrap());
    let other = RandomMdpSpec::new(4, 2, 6, 12);
    assert_ne!(
        random_mdp(&spec).unwrap().digest(),
        random_mdp(&other).unwrap().digest()
    );
}

#[test]
fn invalid_specs_rejected() {
    let mut spec = RandomMdpSpec::new(0, 2, 3, 0);
    assert!(random_mdp(&spec).is_err());
    spec = RandomMdpSpec::new(2, 2, 3, 0);
    spec.dirichlet_alpha = 0.0;
    assert!(random_mdp(&spec).is_err());
    spec.dirichlet_alpha = 0.1;
    spec.zero_reward_prob = 1.5;
    assert!(random_mdp(&spec).is_err());
}

#[test]
fn bandit_pair_gap_is_half_alpha() {
    for alpha in [0.01, 0.1, 0.2] {
        let (m1, m2) = hard_bandit_pair(alpha).unwrap();
        assert!((optimal_return(&m1) - (0.5 + alpha / 2.0)).abs() <= 1e-15);
        assert!((optimal_return(&m2) - (0.5 + alpha)).abs() <= 1e-15);
        assert_eq!(m1.reward(0, 0, 0), m2.reward(0, 0, 0));
    }
    assert!(hard_bandit_pair(0.25).is_err());
    assert!(hard_bandit_pair(0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_mdps_validate(
        seed in any::<u64>(),
        ns in 1usize..8,
        na in 1usize..4,
        h in 1usize..8,
        alpha in 0.05f64..3.0,
        zero in 0.0f64..=1.0,
    ) {
        let mut spec = RandomMdpSpec::new(ns, na, h, seed);
        spec.dirichlet_alpha = alpha;
        spec.zero_reward_prob = zero;
        let mdp = random_mdp(&spec).unwrap();
        prop_assert!(validate(&mdp).is_ok());
        let p0_sum: f64 = mdp.initial_dist().iter().sum();
        prop_assert!((p0_sum - 1.0).abs() <= 1e-12);
    }
}
