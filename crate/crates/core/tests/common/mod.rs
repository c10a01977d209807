#![allow(dead_code)]

use mtrl_core::mdp::{MdpModel, RewardTable, TransitionKernel};
use proptest::prelude::*;

/// Random model with `S, A <= max`, kernel rows drawn from positive
/// weights (some zeroed) and rewards in `[0, 1]`.
pub fn model(max: usize) -> impl Strategy<Value = MdpModel> {
    (1..=max, 1..=max).prop_flat_map(|(ns, na)| {
        (
            prop::collection::vec((0u8..4, 0.05f64..1.0), ns * na * ns),
            prop::collection::vec(0.0f64..=1.0, ns * na),
        )
            .prop_map(move |(weights, rewards)| build(ns, na, &weights, rewards))
    })
}

fn build(ns: usize, na: usize, weights: &[(u8, f64)], rewards: Vec<f64>) -> MdpModel {
    let mut probs: Vec<f64> = weights.iter().map(|(z, w)| if *z == 0 { 0.0 } else { *w }).collect();
    for row in probs.chunks_mut(ns) {
        if row.iter().all(|p| *p == 0.0) {
            row[0] = 1.0;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    let kernel = TransitionKernel::normalized(ns, na, probs).unwrap();
    MdpModel::new(kernel, RewardTable::new(ns, na, rewards).unwrap(), "random").unwrap()
}

/// Probability vector of length `n` with exact rational entries `q / denom`.
pub fn rational_row(n: usize, denom: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..=100, n).prop_map(move |mut q| {
        q[0] += 1;
        let sum: u64 = q.iter().sum();
        let mut scaled: Vec<u64> = q.iter().map(|x| x * denom / sum).collect();
        scaled[0] += denom - scaled.iter().sum::<u64>();
        scaled
    })
}

/// `sum_i |c_i D - q_i n|`, the l1 error of counts `c` against `q / D`
/// scaled by `n D`.
pub fn scaled_error(counts: &[u64], q: &[u64], denom: u64) -> u128 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(q)
        .map(|(&c, &qi)| (c as i128 * denom as i128 - qi as i128 * n as i128).unsigned_abs())
        .sum()
}
