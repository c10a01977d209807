//! l1 separation between transition kernels, empirical count stores and
//! distinguishing sets of state-action pairs.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::mdp::{MdpModel, RewardTable};

/// Slack absorbed when comparing a distance against a separation threshold
/// so that values computed by different summation orders still compare equal.
pub const SEPARATION_SLACK: f64 = 1e-12;

/// Optional analytics carried with a model set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSetMeta {
    pub lambda: Option<f64>,
    pub diameter: Option<f64>,
    pub hitting_time: Option<f64>,
}

/// Models sharing states, actions and reward.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSet {
    models: Vec<MdpModel>,
    pub meta: ModelSetMeta,
}

impl ModelSet {
    pub fn new(models: Vec<MdpModel>) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::Domain("a model set needs at least one model".into()))?;
        for m in &models[1..] {
            if m.num_states() != first.num_states() || m.num_actions() != first.num_actions() {
                return Err(Error::Shape(format!(
                    "model '{}' is {}x{}, expected {}x{}",
                    m.label(),
                    m.num_states(),
                    m.num_actions(),
                    first.num_states(),
                    first.num_actions()
                )));
            }
            if m.reward() != first.reward() {
                return Err(Error::Domain(format!(
                    "model '{}' does not share the reward of '{}'",
                    m.label(),
                    first.label()
                )));
            }
        }
        Ok(ModelSet {
            models,
            meta: ModelSetMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ModelSetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[MdpModel] {
        &self.models
    }

    pub fn model(&self, i: usize) -> &MdpModel {
        &self.models[i]
    }

    pub fn num_states(&self) -> usize {
        self.models[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.models[0].num_actions()
    }

    pub fn reward(&self) -> &RewardTable {
        self.models[0].reward()
    }
}

/// Ordered set of distinct `(state, action)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateActionSet {
    pairs: Vec<(usize, usize)>,
}

impl StateActionSet {
    pub fn new(pairs: Vec<(usize, usize)>, num_states: usize, num_actions: usize) -> Result<Self> {
        let mut set = StateActionSet::default();
        for (s, a) in pairs {
            check_index("state", s, num_states)?;
            check_index("action", a, num_actions)?;
            if set.contains(s, a) {
                return Err(Error::Domain(format!("duplicate pair ({s}, {a})")));
            }
            set.pairs.push((s, a));
        }
        Ok(set)
    }

    /// Every pair, lexicographic order.
    pub fn full(num_states: usize, num_actions: usize) -> Self {
        StateActionSet {
            pairs: (0..num_states)
                .flat_map(|s| (0..num_actions).map(move |a| (s, a)))
                .collect(),
        }
    }

    /// Adds a pair unless already present; returns whether it was new.
    pub fn insert(&mut self, s: usize, a: usize) -> bool {
        if self.contains(s, a) {
            false
        } else {
            self.pairs.push((s, a));
            true
        }
    }

    pub fn contains(&self, s: usize, a: usize) -> bool {
        self.pairs.contains(&(s, a))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// `N(s,a,s')` and `N(s,a)` tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalCounts {
    num_states: usize,
    num_actions: usize,
    triple: Vec<u64>,
    pair: Vec<u64>,
}

impl EmpiricalCounts {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        EmpiricalCounts {
            num_states,
            num_actions,
            triple: vec![0; num_states * num_actions * num_states],
            pair: vec![0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn record(&mut self, s: usize, a: usize, next: usize) {
        let sa = s * self.num_actions + a;
        self.pair[sa] += 1;
        self.triple[sa * self.num_states + next] += 1;
    }

    /// Adds `n` observations of one transition.
    pub fn record_many(&mut self, s: usize, a: usize, next: usize, n: u64) {
        let sa = s * self.num_actions + a;
        self.pair[sa] += n;
        self.triple[sa * self.num_states + next] += n;
    }

    /// Pools another store into this one.
    pub fn merge(&mut self, other: &EmpiricalCounts) {
        debug_assert_eq!(self.triple.len(), other.triple.len());
        self.triple.iter_mut().zip(&other.triple).for_each(|(x, y)| *x += y);
        self.pair.iter_mut().zip(&other.pair).for_each(|(x, y)| *x += y);
    }

    #[inline]
    pub fn pair_count(&self, s: usize, a: usize) -> u64 {
        self.pair[s * self.num_actions + a]
    }

    #[inline]
    pub fn triple_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.triple[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn triple_row(&self, s: usize, a: usize) -> &[u64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.triple[start..start + self.num_states]
    }

    pub fn total(&self) -> u64 {
        self.pair.iter().sum()
    }

    /// Writes `P_hat(.|s,a)` into `out`; zeros when `(s,a)` is unvisited.
    pub fn estimate_into(&self, s: usize, a: usize, out: &mut [f64]) {
        let n = self.pair_count(s, a);
        let row = self.triple_row(s, a);
        if n == 0 {
            out.iter_mut().for_each(|x| *x = 0.0);
        } else {
            let n = n as f64;
            for (x, c) in out.iter_mut().zip(row) {
                *x = *c as f64 / n;
            }
        }
    }

    /// Flat `S*A*S` table of empirical rows.
    pub fn estimate_table(&self) -> Vec<f64> {
        let mut table = vec![0.0; self.triple.len()];
        for (sa, chunk) in table.chunks_mut(self.num_states).enumerate() {
            self.estimate_into(sa / self.num_actions, sa % self.num_actions, chunk);
        }
        table
    }
}

/// `sum |p - q|`.
pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("rows of length {} and {}", p.len(), q.len())));
    }
    Ok(l1(p, q))
}

#[inline]
pub(crate) fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum()
}

/// Empirical row for `(s, a)`, all-zero if unvisited.
pub fn empirical_estimate(counts: &EmpiricalCounts, s: usize, a: usize) -> Result<Vec<f64>> {
    check_index("state", s, counts.num_states())?;
    check_index("action", a, counts.num_actions())?;
    let mut row = vec![0.0; counts.num_states()];
    counts.estimate_into(s, a, &mut row);
    Ok(row)
}

fn check_lambda(lam: f64) -> Result<()> {
    if lam > 0.0 && lam <= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("separation threshold {lam} outside (0, 2]")))
    }
}

#[inline]
fn pair_distance(mi: &MdpModel, mj: &MdpModel, s: usize, a: usize) -> f64 {
    l1(mi.kernel().row(s, a), mj.kernel().row(s, a))
}

/// Pairs whose rows differ by at least `lam` between two models.
pub fn pairwise_distinguishing_pairs(mi: &MdpModel, mj: &MdpModel, lam: f64) -> Result<StateActionSet> {
    check_lambda(lam)?;
    if mi.num_states() != mj.num_states() || mi.num_actions() != mj.num_actions() {
        return Err(Error::Shape("models have different shapes".into()));
    }
    let mut set = StateActionSet::default();
    for s in 0..mi.num_states() {
        for a in 0..mi.num_actions() {
            if pair_distance(mi, mj, s, a) >= lam - SEPARATION_SLACK {
                set.insert(s, a);
            }
        }
    }
    Ok(set)
}

/// Largest `lambda` for which the set is `lambda`-separable.
pub fn separation_level(set: &ModelSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::Domain("separation level needs at least two models".into()));
    }
    let mut level = f64::INFINITY;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let mut best: f64 = 0.0;
            for s in 0..set.num_states() {
                for a in 0..set.num_actions() {
                    best = best.max(pair_distance(set.model(i), set.model(j), s, a));
                }
            }
            level = level.min(best);
        }
    }
    Ok(level)
}

/// Whether `gamma` hits a `lam`-separated pair for every pair of models.
pub fn is_distinguishing(set: &ModelSet, gamma: &StateActionSet, lam: f64) -> bool {
    (0..set.len()).all(|i| {
        (i + 1..set.len()).all(|j| {
            gamma
                .iter()
                .any(|(s, a)| pair_distance(set.model(i), set.model(j), s, a) >= lam - SEPARATION_SLACK)
        })
    })
}

/// Greedy set cover over model pairs; ties go to the lexicographically
/// smallest `(s, a)`.
pub fn greedy_distinguishing_set(set: &ModelSet, lam: f64) -> Result<StateActionSet> {
    check_lambda(lam)?;
    let model_pairs: Vec<(usize, usize)> = (0..set.len())
        .flat_map(|i| (i + 1..set.len()).map(move |j| (i, j)))
        .collect();
    let candidates: Vec<((usize, usize), Vec<usize>)> = StateActionSet::full(set.num_states(), set.num_actions())
        .iter()
        .map(|(s, a)| {
            let covers = model_pairs
                .iter()
                .enumerate()
                .filter(|(_, (i, j))| pair_distance(set.model(*i), set.model(*j), s, a) >= lam - SEPARATION_SLACK)
                .map(|(k, _)| k)
                .collect();
            ((s, a), covers)
        })
        .collect();
    let mut uncovered = vec![true; model_pairs.len()];
    for (k, _) in model_pairs.iter().enumerate() {
        if !candidates.iter().any(|(_, covers)| covers.contains(&k)) {
            return Err(Error::NotSeparable(lam));
        }
    }
    let mut chosen = StateActionSet::default();
    while uncovered.iter().any(|u| *u) {
        let mut best: Option<((usize, usize), usize)> = None;
        for (pair, covers) in &candidates {
            let gain = covers.iter().filter(|k| uncovered[**k]).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((*pair, gain));
            }
        }
        let ((s, a), _) = best.expect("every model pair is coverable");
        chosen.insert(s, a);
        for (pair, covers) in &candidates {
            if *pair == (s, a) {
                covers.iter().for_each(|k| uncovered[*k] = false);
            }
        }
    }
    debug_assert!(is_distinguishing(set, &chosen, lam));
    Ok(chosen)
}

/// Per-pair visit target `ceil(256 / lam^2 * max(S, ln(K |Gamma| / p1)))`.
pub fn required_visits(lam: f64, num_states: usize, failure: f64, episodes: u64, gamma_size: usize) -> Result<u64> {
    check_lambda(lam)?;
    if !(failure > 0.0 && failure < 1.0) {
        return Err(Error::Domain(format!("failure probability {failure} outside (0, 1)")));
    }
    if episodes == 0 || gamma_size == 0 || num_states == 0 {
        return Err(Error::Domain("episodes, |Gamma| and S must be positive".into()));
    }
    let log_term = (episodes as f64 * gamma_size as f64 / failure).ln();
    let n = 256.0 / (lam * lam) * (num_states as f64).max(log_term);
    Ok(n.ceil() as u64)
}

/// Clustering-phase length `ceil(12 * D_tilde * |Gamma| * N)`.
pub fn clustering_horizon(dtilde: f64, gamma_size: usize, n: u64) -> Result<u64> {
    if !(dtilde > 0.0) || gamma_size == 0 || n == 0 {
        return Err(Error::Domain("D_tilde, |Gamma| and N must be positive".into()));
    }
    Ok((12.0 * dtilde * gamma_size as f64 * n as f64).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TransitionKernel;

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(l1_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        let lam = 0.3;
        let d = l1_distance(&[0.0, lam, 1.0 - lam], &[0.0, lam / 2.0, 1.0 - lam / 2.0]).unwrap();
        assert!((d - lam).abs() < 1e-15);
        assert!(l1_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn estimates() {
        let mut counts = EmpiricalCounts::new(3, 1);
        assert_eq!(empirical_estimate(&counts, 0, 0).unwrap(), vec![0.0; 3]);
        counts.record_many(0, 0, 0, 3);
        counts.record(0, 0, 1);
        assert_eq!(empirical_estimate(&counts, 0, 0).unwrap(), vec![0.75, 0.25, 0.0]);
        assert_eq!(counts.pair_count(0, 0), 4);
        assert!(empirical_estimate(&counts, 3, 0).is_err());
    }

    #[test]
    fn pair_counts_stay_consistent_after_merge() {
        let mut a = EmpiricalCounts::new(2, 2);
        let mut b = EmpiricalCounts::new(2, 2);
        a.record(0, 1, 1);
        b.record(0, 1, 0);
        b.record(1, 0, 1);
        a.merge(&b);
        for s in 0..2 {
            for act in 0..2 {
                let row: u64 = a.triple_row(s, act).iter().sum();
                assert_eq!(row, a.pair_count(s, act));
            }
        }
        assert_eq!(a.total(), 3);
    }

    #[test]
    fn visit_and_horizon_formulas() {
        assert_eq!(required_visits(0.5, 16, 0.01, 200, 3).unwrap(), 16384);
        assert_eq!(required_visits(2.0, 1, (-1.0f64).exp(), 1, 1).unwrap(), 64);
        // S dominates the log term, so K is irrelevant
        assert_eq!(
            required_visits(0.5, 16, 0.01, 1, 3).unwrap(),
            required_visits(0.5, 16, 0.01, 50, 3).unwrap()
        );
        assert_eq!(required_visits(1.2999, 16, 0.01, 200, 3).unwrap(), 2425);
        assert_eq!(clustering_horizon(7.0, 3, 2425).unwrap(), 611_100);
        assert_eq!(clustering_horizon(1.0, 1, 1).unwrap(), 12);
        assert_eq!(clustering_horizon(7.0, 3, 2 * 2425).unwrap(), 2 * 611_100);
        assert!(required_visits(0.0, 16, 0.01, 1, 1).is_err());
        assert!(required_visits(0.5, 16, 1.0, 1, 1).is_err());
        assert!(clustering_horizon(0.0, 1, 1).is_err());
    }

    #[test]
    fn state_action_set_rejects_duplicates_and_range() {
        assert!(StateActionSet::new(vec![(0, 0), (0, 0)], 2, 2).is_err());
        assert!(StateActionSet::new(vec![(2, 0)], 2, 2).is_err());
        assert_eq!(StateActionSet::full(2, 3).len(), 6);
    }

    fn two_state(p: f64) -> MdpModel {
        let kernel = TransitionKernel::new(2, 1, vec![1.0 - p, p, 0.5, 0.5]).unwrap();
        let reward = RewardTable::new(2, 1, vec![0.0, 1.0]).unwrap();
        MdpModel::new(kernel, reward, format!("p{p}")).unwrap()
    }

    #[test]
    fn identical_models() {
        let set = ModelSet::new(vec![two_state(0.3), two_state(0.3)]).unwrap();
        assert_eq!(separation_level(&set).unwrap(), 0.0);
        assert!(pairwise_distinguishing_pairs(set.model(0), set.model(1), 0.1)
            .unwrap()
            .is_empty());
        assert!(matches!(greedy_distinguishing_set(&set, 0.1), Err(Error::NotSeparable(_))));
        assert!(separation_level(&ModelSet::new(vec![two_state(0.3)]).unwrap()).is_err());
    }

    #[test]
    fn two_models_need_one_pair() {
        let set = ModelSet::new(vec![two_state(0.1), two_state(0.6)]).unwrap();
        let lam = separation_level(&set).unwrap();
        assert!((lam - 1.0).abs() < 1e-12);
        let gamma = greedy_distinguishing_set(&set, lam).unwrap();
        assert_eq!(gamma.as_slice(), &[(0, 0)]);
    }

    #[test]
    fn mismatched_rewards_rejected() {
        let kernel = TransitionKernel::new(2, 1, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let other = MdpModel::new(kernel, RewardTable::new(2, 1, vec![1.0, 0.0]).unwrap(), "x").unwrap();
        assert!(ModelSet::new(vec![two_state(0.1), other]).is_err());
        assert!(ModelSet::new(vec![]).is_err());
    }
}
