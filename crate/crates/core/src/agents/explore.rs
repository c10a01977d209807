//! Clustering-phase exploration: drive the walk toward distinguishing
//! pairs that still lack samples.

use crate::separability::{EmpiricalCounts, StateActionSet};

/// Picks the exploration action at `current`.
///
/// If some action at `current` forms an undersampled pair of `gamma`, the
/// most-sampled such action is returned. Otherwise the action with the
/// highest estimated probability of reaching a state that still has an
/// undersampled pair. Ties go to the smallest action index.
pub fn explore_id(current: usize, gamma: &StateActionSet, counts: &EmpiricalCounts, n_target: u64) -> usize {
    let num_states = counts.num_states();
    let num_actions = counts.num_actions();
    let pending: Vec<bool> = (0..num_states)
        .map(|s| {
            gamma
                .iter()
                .any(|(gs, ga)| gs == s && counts.pair_count(gs, ga) < n_target)
        })
        .collect();
    let mut best: Option<(usize, u64)> = None;
    for a in 0..num_actions {
        if gamma.contains(current, a) {
            let n = counts.pair_count(current, a);
            if n < n_target && best.is_none_or(|(_, bn)| n > bn) {
                best = Some((a, n));
            }
        }
    }
    if let Some((a, _)) = best {
        return a;
    }
    let pending_states: Vec<usize> = (0..num_states).filter(|s| pending[*s]).collect();
    reach_score_argmax(current, &pending_states, counts)
}

/// `argmax_a sum_{s' pending} N(s,a,s') / N(s,a)`; the sum is taken over
/// integer counts so that both implementations below agree bit for bit.
fn reach_score_argmax(current: usize, pending_states: &[usize], counts: &EmpiricalCounts) -> usize {
    let mut best_action = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..counts.num_actions() {
        let n = counts.pair_count(current, a);
        let score = if n == 0 {
            0.0
        } else {
            let row = counts.triple_row(current, a);
            let hits: u64 = pending_states.iter().map(|s| row[*s]).sum();
            hits as f64 / n as f64
        };
        if score > best_score {
            best_score = score;
            best_action = a;
        }
    }
    best_action
}

/// Incremental [`explore_id`] for long clustering phases. Tracks which
/// states still have undersampled pairs instead of rescanning `gamma`.
#[derive(Clone, Debug)]
pub struct Explorer {
    gamma_actions: Vec<Vec<usize>>,
    in_gamma: Vec<bool>,
    num_actions: usize,
    open_pairs: Vec<usize>,
    pending_states: Vec<usize>,
    n_target: u64,
}

impl Explorer {
    pub fn new(gamma: &StateActionSet, num_states: usize, num_actions: usize, n_target: u64) -> Self {
        let mut gamma_actions = vec![Vec::new(); num_states];
        let mut in_gamma = vec![false; num_states * num_actions];
        for (s, a) in gamma.iter() {
            gamma_actions[s].push(a);
            in_gamma[s * num_actions + a] = true;
        }
        gamma_actions.iter_mut().for_each(|v| v.sort_unstable());
        let mut explorer = Explorer {
            gamma_actions,
            in_gamma,
            num_actions,
            open_pairs: vec![0; num_states],
            pending_states: Vec::new(),
            n_target,
        };
        explorer.reset();
        explorer
    }

    /// Forget all progress; call at the start of each clustering phase.
    pub fn reset(&mut self) {
        for (s, actions) in self.gamma_actions.iter().enumerate() {
            self.open_pairs[s] = if self.n_target > 0 { actions.len() } else { 0 };
        }
        self.pending_states = (0..self.open_pairs.len()).filter(|s| self.open_pairs[*s] > 0).collect();
    }

    /// Whether every pair reached the visit target.
    pub fn done(&self) -> bool {
        self.pending_states.is_empty()
    }

    pub fn choose(&self, current: usize, counts: &EmpiricalCounts) -> usize {
        if self.pending_states.is_empty() {
            return 0;
        }
        if self.open_pairs[current] > 0 {
            let mut best: Option<(usize, u64)> = None;
            for &a in &self.gamma_actions[current] {
                let n = counts.pair_count(current, a);
                if n < self.n_target && best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((a, n));
                }
            }
            if let Some((a, _)) = best {
                return a;
            }
        }
        reach_score_argmax(current, &self.pending_states, counts)
    }

    /// Update after `(s, a)` was recorded into `counts`.
    #[inline]
    pub fn observe(&mut self, s: usize, a: usize, counts: &EmpiricalCounts) {
        if self.in_gamma[s * self.num_actions + a] && counts.pair_count(s, a) == self.n_target {
            self.open_pairs[s] -= 1;
            if self.open_pairs[s] == 0 {
                self.pending_states.retain(|x| *x != s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn undersampled_gamma_action_first() {
        let gamma = StateActionSet::new(vec![(0, 2)], 2, 3).unwrap();
        let counts = EmpiricalCounts::new(2, 3);
        assert_eq!(explore_id(0, &gamma, &counts, 5), 2);
    }

    #[test]
    fn prefers_most_sampled_undersampled_action() {
        let gamma = StateActionSet::new(vec![(0, 0), (0, 1)], 2, 2).unwrap();
        let mut counts = EmpiricalCounts::new(2, 2);
        counts.record_many(0, 0, 1, 3);
        counts.record_many(0, 1, 1, 5);
        assert_eq!(explore_id(0, &gamma, &counts, 10), 1);
        // once action 1 is saturated, action 0 is the only candidate
        assert_eq!(explore_id(0, &gamma, &counts, 5), 0);
    }

    #[test]
    fn heads_for_states_with_work_left() {
        // G(0) empty, G(1) non-empty; action 1 reaches state 1 w.p. 0.9
        let gamma = StateActionSet::new(vec![(1, 0)], 2, 2).unwrap();
        let mut counts = EmpiricalCounts::new(2, 2);
        counts.record_many(0, 0, 0, 9);
        counts.record_many(0, 0, 1, 1);
        counts.record_many(0, 1, 0, 1);
        counts.record_many(0, 1, 1, 9);
        assert_eq!(explore_id(0, &gamma, &counts, 4), 1);
    }

    #[test]
    fn nothing_left_defaults_to_action_zero() {
        let gamma = StateActionSet::new(vec![(1, 1)], 2, 2).unwrap();
        let mut counts = EmpiricalCounts::new(2, 2);
        counts.record_many(1, 1, 0, 4);
        counts.record_many(0, 1, 1, 4);
        assert_eq!(explore_id(0, &gamma, &counts, 4), 0);
        let explorer = Explorer::new(&gamma, 2, 2, 0);
        assert!(explorer.done());
    }

    proptest! {
        #[test]
        fn incremental_explorer_matches_reference(
            gamma_mask in proptest::collection::vec(any::<bool>(), 12),
            draws in proptest::collection::vec((0usize..4, 0usize..3, 0usize..4), 0..200),
            n_target in 1u64..6,
        ) {
            let (ns, na) = (4, 3);
            let pairs: Vec<(usize, usize)> = (0..ns * na)
                .filter(|i| gamma_mask[*i])
                .map(|i| (i / na, i % na))
                .collect();
            let gamma = StateActionSet::new(pairs, ns, na).unwrap();
            let mut counts = EmpiricalCounts::new(ns, na);
            let mut explorer = Explorer::new(&gamma, ns, na, n_target);
            for (s, a, next) in draws {
                counts.record(s, a, next);
                explorer.observe(s, a, &counts);
                for current in 0..ns {
                    prop_assert_eq!(
                        explorer.choose(current, &counts),
                        explore_id(current, &gamma, &counts, n_target)
                    );
                }
            }
        }
    }
}
