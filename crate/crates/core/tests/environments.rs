use mtrl_core::coin_lab::{flip_coins, Allocation, FlipBudget};
use mtrl_core::environments::{
    make_coin_instance, make_counterexample_pair, make_gridworld_set, make_jao_set, make_noncommunicating_two_jao_set,
    make_two_jao_set, two_jao_capital_delta, JaoSpec,
};
use mtrl_core::mdp::{diameter, hitting_time_upper_bound, optimal_value_and_policy};
use mtrl_core::separability::{separation_level, ModelSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_valid(set: &ModelSet) {
    for m in set.models() {
        for row in m.kernel().rows() {
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)), "{}", m.label());
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{}", m.label());
        }
        assert_eq!(m.reward(), set.reward());
    }
}

#[test]
fn every_family_builds_valid_kernels() {
    assert_valid(&make_gridworld_set().unwrap());
    for lam in [0.0, 0.3, 1.0] {
        assert_valid(&make_jao_set(4, 0.2, lam, &[0, 1, 3]).unwrap());
    }
    for lam in [0.1, 0.5, 1.0] {
        for q in [1, 3, 8] {
            assert_valid(&make_two_jao_set(q, lam, 20.0, 1e4).unwrap());
            assert_valid(&make_noncommunicating_two_jao_set(q, lam, 20.0, 1e4).unwrap());
        }
        if lam < 1.0 {
            assert_valid(&make_counterexample_pair(lam).unwrap());
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(make_jao_set(2, 0.9, 0.4, &[0]).is_err());
    assert!(make_jao_set(2, 0.1, 0.2, &[2]).is_err());
    assert!(make_two_jao_set(0, 0.5, 20.0, 1e4).is_err());
    assert!(make_two_jao_set(2, 1.5, 20.0, 1e4).is_err());
    assert!(make_counterexample_pair(1.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(make_coin_instance(4, 0.6, 0.25, 1000, None, &mut rng).is_err());
    assert!(make_coin_instance(4, 0.2, 0.3, 1000, None, &mut rng).is_err());
}

#[test]
fn gridworld_models_communicate() {
    let set = make_gridworld_set().unwrap();
    assert_eq!((set.len(), set.num_states(), set.num_actions()), (4, 16, 4));
    for m in set.models() {
        let d = diameter(m).unwrap();
        assert!(d.is_finite() && d > 1.0 && d < 20.0, "{}: D = {d}", m.label());
    }
}

#[test]
fn jao_models_follow_the_gain_formula() {
    for d in [10.0, 20.0, 40.0] {
        let spec = JaoSpec::with_diameter(3, d, 0.2, 1);
        let model = mtrl_core::environments::make_jao(&spec).unwrap();
        let horizon = 20_000;
        let v = optimal_value_and_policy(&model, horizon).unwrap().0.get(0, 0);
        assert!((v / horizon as f64 - spec.optimal_gain()).abs() < 1e-3);
        assert!((v - spec.optimal_gain() * horizon as f64).abs() <= d / 2.0);
    }
}

#[test]
fn two_jao_models_differ_only_at_their_best_rows() {
    let (q, lam, d, h) = (3, 0.4, 20.0, 1e4);
    let set = make_two_jao_set(q, lam, d, h).unwrap();
    let gap = two_jao_capital_delta(q, d, h);
    assert!((gap - (36.0 / (3.0 * h * d)).sqrt() / 20.0).abs() < 1e-15);
    for i in 0..q {
        for j in i + 1..q {
            let (mi, mj) = (set.model(i), set.model(j));
            for s in 0..3 {
                for a in 0..2 * q {
                    let dist: f64 = mi.kernel().row(s, a).iter().zip(mj.kernel().row(s, a)).map(|(x, y)| (x - y).abs()).sum();
                    let expected = match (s, a) {
                        (0, a) if a == i || a == j => 2.0 * gap,
                        (0, a) if a == q + i || a == q + j => lam,
                        _ => 0.0,
                    };
                    assert!((dist - expected).abs() < 1e-12, "models {i},{j} at ({s},{a}): {dist}");
                }
            }
        }
    }
    assert!((separation_level(&set).unwrap() - lam).abs() < 1e-12);
}

#[test]
fn noncommunicating_two_jao_never_reaches_the_side_state() {
    let set = make_noncommunicating_two_jao_set(3, 0.5, 20.0, 1e4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in set.models() {
        assert!(hitting_time_upper_bound(m).unwrap().is_infinite());
        let mut s = 0;
        for _ in 0..20_000 {
            s = m.step(s, rng.gen_range(0..m.num_actions()), &mut rng);
            assert_ne!(s, 2);
        }
    }
}

#[test]
fn counterexample_trajectories_carry_no_information() {
    let set = make_counterexample_pair(0.4).unwrap();
    let (m1, m2) = (set.model(0), set.model(1));
    let row_gap: f64 = m1.kernel().row(0, 0).iter().zip(m2.kernel().row(0, 0)).map(|(x, y)| (x - y).abs()).sum();
    assert!((row_gap - 0.4).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..10_000 {
        let truth = if t % 2 == 0 { m1 } else { m2 };
        let mut s = 0;
        let mut diff = 0.0;
        for _ in 0..20 {
            let a = if s == 0 { 1 } else { rng.gen_range(0..2) };
            let next = truth.step(s, a, &mut rng);
            diff += m1.kernel().prob(s, a, next).ln() - m2.kernel().prob(s, a, next).ln();
            s = next;
        }
        assert_eq!(diff, 0.0);
    }
}

#[test]
fn coin_head_rates_converge_to_the_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q = 6;
    let instance = make_coin_instance(q, 0.25, 0.25, 1000, Some(2), &mut rng).unwrap();
    assert_eq!(instance.means[2], [0.75, 0.25 + instance.epsilon]);
    assert!(instance.means.iter().enumerate().all(|(r, m)| r == 2 || *m == [0.5, 0.25]));
    let per_coin = 100_000;
    let budget = FlipBudget {
        total: 2 * q as u64 * per_coin,
        allocation: Allocation::UniformBoth,
    };
    let record = flip_coins(&instance, budget, &mut rng).unwrap();
    for row in 0..q {
        for col in 0..2 {
            assert_eq!(record.flips[row][col], per_coin);
            let rate = record.heads[row][col] as f64 / per_coin as f64;
            assert!((rate - instance.means[row][col]).abs() < 0.02);
        }
    }
}
