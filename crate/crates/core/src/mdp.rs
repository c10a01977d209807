//! Tabular finite-horizon MDPs: kernels, rewards, sampling, backward
//! induction, exact policy evaluation and first-passage analytics.
//!
//! Steps are 0-based throughout: `h = 0` is the first step of an episode and
//! a [`ValueTable`] of horizon `H` stores `H + 1` rows, the last one being the
//! all-zero terminal boundary.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// Tolerance on `sum_{s'} P(s'|s,a) = 1`.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Dense `S x A x S` transition table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel from a flat `S*A*S` table, checking every row.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Shape("kernel needs at least one state and one action".into()));
        }
        if probs.len() != num_states * num_actions * num_states {
            return Err(Error::Shape(format!(
                "expected {} entries for S={num_states}, A={num_actions}, got {}",
                num_states * num_actions * num_states,
                probs.len()
            )));
        }
        let kernel = TransitionKernel {
            num_states,
            num_actions,
            probs,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Like [`TransitionKernel::new`] but first rescales every row to sum to
    /// one, removing accumulated construction drift.
    pub fn normalized(num_states: usize, num_actions: usize, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() == num_states * num_actions * num_states && num_states > 0 {
            for row in probs.chunks_mut(num_states) {
                let total: f64 = row.iter().sum();
                if total > 0.0 && (total - 1.0).abs() <= 1e-6 {
                    row.iter_mut().for_each(|p| *p /= total);
                }
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    /// Builds a kernel from rows indexed by `s * A + a`.
    pub fn from_rows(num_states: usize, num_actions: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != num_states * num_actions {
            return Err(Error::Shape(format!(
                "expected {} rows, got {}",
                num_states * num_actions,
                rows.len()
            )));
        }
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for row in rows {
            if row.len() != num_states {
                return Err(Error::Shape(format!("row of length {} for S={num_states}", row.len())));
            }
            probs.extend_from_slice(row);
        }
        Self::new(num_states, num_actions, probs)
    }

    fn validate(&self) -> Result<()> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let row = self.row(s, a);
                if let Some(p) = row.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
                    return Err(Error::Probability(format!("P(.|{s},{a}) has entry {p}")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::Probability(format!("P(.|{s},{a}) sums to {total}")));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    /// Rows in `s * A + a` order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.num_states)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Deterministic reward `r(s, a)` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Shape(format!(
                "reward table needs {} entries, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::Domain(format!("reward {v} outside [0, 1]")));
        }
        Ok(RewardTable {
            num_states,
            num_actions,
            values,
        })
    }

    /// Reward that depends on the state only.
    pub fn from_state_rewards(num_actions: usize, state_rewards: &[f64]) -> Result<Self> {
        let values = state_rewards
            .iter()
            .flat_map(|r| std::iter::repeat_n(*r, num_actions))
            .collect();
        Self::new(state_rewards.len(), num_actions, values)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A kernel, its reward and a label. Caches per-row CDFs for sampling.
#[derive(Clone, Debug)]
pub struct MdpModel {
    kernel: TransitionKernel,
    reward: RewardTable,
    label: String,
    cdf: Vec<f64>,
}

impl PartialEq for MdpModel {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel && self.reward == other.reward && self.label == other.label
    }
}

impl MdpModel {
    pub fn new(kernel: TransitionKernel, reward: RewardTable, label: impl Into<String>) -> Result<Self> {
        if kernel.num_states() != reward.num_states() || kernel.num_actions() != reward.num_actions() {
            return Err(Error::Shape(format!(
                "kernel is {}x{} but reward is {}x{}",
                kernel.num_states(),
                kernel.num_actions(),
                reward.num_states(),
                reward.num_actions()
            )));
        }
        let mut cdf = Vec::with_capacity(kernel.as_slice().len());
        for row in kernel.rows() {
            let mut acc = 0.0;
            for p in row {
                acc += p;
                cdf.push(acc);
            }
        }
        Ok(MdpModel {
            kernel,
            reward,
            label: label.into(),
            cdf,
        })
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn reward(&self) -> &RewardTable {
        &self.reward
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.num_actions()
    }

    /// Draws `s' ~ P(.|s,a)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        check_index("state", s, self.num_states())?;
        check_index("action", a, self.num_actions())?;
        Ok(self.step(s, a, rng))
    }

    /// Unchecked variant of [`MdpModel::sample_transition`] for hot loops.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let n = self.num_states();
        let start = (s * self.num_actions() + a) * n;
        let cdf = &self.cdf[start..start + n];
        let u: f64 = rng.gen();
        // Skip zero-probability tails so rounding in the last cumulative
        // entry never selects an impossible successor.
        let row = self.kernel.row(s, a);
        let mut last = 0;
        for (next, (&c, &p)) in cdf.iter().zip(row).enumerate() {
            if p > 0.0 {
                last = next;
                if u < c {
                    return next;
                }
            }
        }
        last
    }
}

/// Deterministic nonstationary policy `pi(h, s)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonstationaryPolicy {
    horizon: usize,
    num_states: usize,
    actions: Vec<usize>,
}

impl NonstationaryPolicy {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain("policy horizon must be positive".into()));
        }
        if actions.len() != horizon * num_states {
            return Err(Error::Shape(format!(
                "policy needs {} entries, got {}",
                horizon * num_states,
                actions.len()
            )));
        }
        if let Some(a) = actions.iter().find(|a| **a >= num_actions) {
            return Err(Error::Index {
                what: "action",
                index: *a,
                limit: num_actions,
            });
        }
        Ok(NonstationaryPolicy {
            horizon,
            num_states,
            actions,
        })
    }

    pub(crate) fn from_parts(horizon: usize, num_states: usize, actions: Vec<usize>) -> Self {
        debug_assert_eq!(actions.len(), horizon * num_states);
        NonstationaryPolicy {
            horizon,
            num_states,
            actions,
        }
    }

    /// Same action everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        NonstationaryPolicy {
            horizon,
            num_states,
            actions: vec![action; horizon * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }
}

/// `(H+1) x S` values; row `H` is the terminal boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    horizon: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub(crate) fn from_parts(horizon: usize, num_states: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), (horizon + 1) * num_states);
        ValueTable {
            horizon,
            num_states,
            values,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.num_states + s]
    }

    pub fn row(&self, h: usize) -> &[f64] {
        &self.values[h * self.num_states..(h + 1) * self.num_states]
    }

    /// `max_s V_h(s) - min_s V_h(s)`.
    pub fn span(&self, h: usize) -> f64 {
        let row = self.row(h);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Index of the largest value, smallest index on ties.
#[inline]
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Backward induction with a caller-supplied action value
/// `q(s, a, V_{h+1})`. Used by exact, estimated and optimistic planners.
pub fn backward_induction<F>(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    mut q: F,
) -> (ValueTable, NonstationaryPolicy)
where
    F: FnMut(usize, usize, &[f64]) -> f64,
{
    let mut values = vec![0.0; (horizon + 1) * num_states];
    let mut actions = vec![0; horizon * num_states];
    let mut qs = vec![0.0; num_actions];
    for h in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((h + 1) * num_states);
        let next = &tail[..num_states];
        let current = &mut head[h * num_states..];
        for s in 0..num_states {
            for (a, slot) in qs.iter_mut().enumerate() {
                *slot = q(s, a, next);
            }
            let best = argmax_first(&qs);
            current[s] = qs[best];
            actions[h * num_states + s] = best;
        }
    }
    (
        ValueTable {
            horizon,
            num_states,
            values,
        },
        NonstationaryPolicy {
            horizon,
            num_states,
            actions,
        },
    )
}

#[inline]
pub(crate) fn dot(row: &[f64], values: &[f64]) -> f64 {
    row.iter().zip(values).map(|(p, v)| p * v).sum()
}

/// Optimal `H`-step values and the greedy nonstationary policy.
pub fn optimal_value_and_policy(model: &MdpModel, horizon: usize) -> Result<(ValueTable, NonstationaryPolicy)> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let kernel = model.kernel();
    let reward = model.reward();
    Ok(backward_induction(
        model.num_states(),
        model.num_actions(),
        horizon,
        |s, a, next| reward.get(s, a) + dot(kernel.row(s, a), next),
    ))
}

/// `V_1^*(start)` for horizons too long to tabulate.
///
/// Runs backward induction with two rolling rows. Once the per-step
/// increment `V_{n+1} - V_n` is constant across states to within `1e-13`,
/// the remaining steps are added as that constant gain.
pub fn optimal_start_value(model: &MdpModel, horizon: usize, start: usize) -> Result<f64> {
    check_index("state", start, model.num_states())?;
    let n = model.num_states();
    let kernel = model.kernel();
    let reward = model.reward();
    let mut next = vec![0.0; n];
    let mut current = vec![0.0; n];
    for steps in 1..=horizon {
        for s in 0..n {
            current[s] = (0..model.num_actions())
                .map(|a| reward.get(s, a) + dot(kernel.row(s, a), &next))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let d = current[s] - next[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        std::mem::swap(&mut current, &mut next);
        if steps >= 64 && hi - lo < 1e-13 {
            let gain = 0.5 * (hi + lo);
            return Ok(next[start] + gain * (horizon - steps) as f64);
        }
    }
    Ok(next[start])
}

/// Exact expected return of a fixed policy over its horizon, by forward
/// propagation of the state distribution.
pub fn evaluate_policy(model: &MdpModel, policy: &NonstationaryPolicy, start: usize) -> Result<f64> {
    check_index("state", start, model.num_states())?;
    if policy.num_states() != model.num_states() {
        return Err(Error::Shape(format!(
            "policy covers {} states, model has {}",
            policy.num_states(),
            model.num_states()
        )));
    }
    let n = model.num_states();
    let mut dist = vec![0.0; n];
    let mut next = vec![0.0; n];
    dist[start] = 1.0;
    let mut total = 0.0;
    for h in 0..policy.horizon() {
        next.iter_mut().for_each(|p| *p = 0.0);
        for s in 0..n {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            let a = policy.action(h, s);
            total += mass * model.reward().get(s, a);
            for (slot, p) in next.iter_mut().zip(model.kernel().row(s, a)) {
                *slot += mass * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    Ok(total)
}

/// Limits for the stochastic-shortest-path iteration behind [`diameter`].
#[derive(Clone, Copy, Debug)]
pub struct PassageOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub ceiling: f64,
}

impl Default for PassageOptions {
    fn default() -> Self {
        PassageOptions {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            ceiling: 1e9,
        }
    }
}

/// States that can reach `target` under some action sequence.
fn can_reach(kernel: &TransitionKernel, target: usize, allowed: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let n = kernel.num_states();
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut queue = VecDeque::from([target]);
    while let Some(t) = queue.pop_front() {
        for s in 0..n {
            if reach[s] {
                continue;
            }
            let hits = (0..kernel.num_actions()).any(|a| allowed(s, a) && kernel.prob(s, a, t) > 0.0);
            if hits {
                reach[s] = true;
                queue.push_back(s);
            }
        }
    }
    reach
}

/// Minimal expected first-passage time from every state to `target`.
pub fn min_passage_times(model: &MdpModel, target: usize, opts: &PassageOptions) -> Result<Vec<f64>> {
    check_index("state", target, model.num_states())?;
    let kernel = model.kernel();
    let n = model.num_states();
    let reach = can_reach(kernel, target, |_, _| true);
    if let Some(from) = reach.iter().position(|r| !r) {
        return Err(Error::InfiniteDiameter { from, to: target });
    }
    let mut times = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..opts.max_iterations {
        let mut change: f64 = 0.0;
        for s in 0..n {
            if s == target {
                next[s] = 0.0;
                continue;
            }
            let best = (0..model.num_actions())
                .map(|a| {
                    let row = kernel.row(s, a);
                    1.0 + row
                        .iter()
                        .zip(&times)
                        .enumerate()
                        .filter(|(j, _)| *j != target)
                        .map(|(_, (p, t))| p * t)
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            change = change.max((best - times[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut times, &mut next);
        if let Some(from) = times.iter().position(|t| *t > opts.ceiling) {
            return Err(Error::InfiniteDiameter { from, to: target });
        }
        if change < opts.tolerance {
            return Ok(times);
        }
    }
    Err(Error::Domain(format!(
        "first-passage iteration to state {target} did not converge in {} iterations",
        opts.max_iterations
    )))
}

/// Diameter: max over ordered pairs of the minimal expected travel time.
pub fn diameter(model: &MdpModel) -> Result<f64> {
    diameter_with(model, &PassageOptions::default())
}

pub fn diameter_with(model: &MdpModel, opts: &PassageOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for target in 0..model.num_states() {
        let times = min_passage_times(model, target, opts)?;
        worst = worst.max(times.iter().cloned().fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Upper limit on `A^S` for [`hitting_time_upper_bound`].
pub const MAX_ENUMERATED_POLICIES: f64 = 1e6;

/// Hitting time: max over ordered pairs and deterministic stationary
/// policies of the expected first-passage time. Infinite if some policy
/// cannot reach some state.
pub fn hitting_time_upper_bound(model: &MdpModel) -> Result<f64> {
    let n = model.num_states();
    let na = model.num_actions();
    let count = (na as f64).powi(n as i32);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(Error::EnumerationTooLarge { count });
    }
    let kernel = model.kernel();
    let mut policy = vec![0usize; n];
    let mut worst: f64 = 0.0;
    loop {
        for target in 0..n {
            let reach = can_reach(kernel, target, |s, a| policy[s] == a);
            if reach.iter().any(|r| !r) {
                return Ok(f64::INFINITY);
            }
            match passage_times_under(kernel, &policy, target) {
                Some(times) => worst = worst.max(times.into_iter().fold(0.0, f64::max)),
                None => return Ok(f64::INFINITY),
            }
        }
        // mixed-radix increment
        let mut digit = 0;
        loop {
            if digit == n {
                return Ok(worst);
            }
            policy[digit] += 1;
            if policy[digit] < na {
                break;
            }
            policy[digit] = 0;
            digit += 1;
        }
    }
}

/// Solves `T(s) = 1 + sum_{j != target} P(j|s,pi(s)) T(j)` by Gaussian
/// elimination with partial pivoting.
fn passage_times_under(kernel: &TransitionKernel, policy: &[usize], target: usize) -> Option<Vec<f64>> {
    let n = kernel.num_states();
    let others: Vec<usize> = (0..n).filter(|s| *s != target).collect();
    let m = others.len();
    let mut mat = vec![0.0; m * (m + 1)];
    for (i, &s) in others.iter().enumerate() {
        let row = kernel.row(s, policy[s]);
        for (j, &t) in others.iter().enumerate() {
            mat[i * (m + 1) + j] = if i == j { 1.0 } else { 0.0 } - row[t];
        }
        mat[i * (m + 1) + m] = 1.0;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|a, b| {
            mat[a * (m + 1) + col]
                .abs()
                .total_cmp(&mat[b * (m + 1) + col].abs())
        })?;
        if mat[pivot * (m + 1) + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..=m {
                mat.swap(col * (m + 1) + k, pivot * (m + 1) + k);
            }
        }
        let diag = mat[col * (m + 1) + col];
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = mat[row * (m + 1) + col] / diag;
            if factor != 0.0 {
                for k in col..=m {
                    mat[row * (m + 1) + k] -= factor * mat[col * (m + 1) + k];
                }
            }
        }
    }
    let mut times = vec![0.0; n];
    for (i, &s) in others.iter().enumerate() {
        let t = mat[i * (m + 1) + m] / mat[i * (m + 1) + i];
        if !t.is_finite() || t < 0.0 {
            return None;
        }
        times[s] = t;
    }
    Some(times)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn single_state(reward: f64) -> MdpModel {
        let kernel = TransitionKernel::new(1, 2, vec![1.0, 1.0]).unwrap();
        let reward = RewardTable::new(1, 2, vec![reward; 2]).unwrap();
        MdpModel::new(kernel, reward, "single").unwrap()
    }

    pub(crate) fn cycle(n: usize) -> MdpModel {
        let mut probs = vec![0.0; n * n];
        for s in 0..n {
            probs[s * n + (s + 1) % n] = 1.0;
        }
        let kernel = TransitionKernel::new(n, 1, probs).unwrap();
        let reward = RewardTable::new(n, 1, vec![0.0; n]).unwrap();
        MdpModel::new(kernel, reward, "cycle").unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(TransitionKernel::new(2, 1, vec![0.5, 0.4, 0.0, 1.0]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![1.5, -0.5, 0.0, 1.0]).is_err());
        assert!(TransitionKernel::new(2, 1, vec![1.0]).is_err());
        assert!(RewardTable::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn point_mass_sampling() {
        let model = cycle(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(model.sample_transition(1, 0, &mut rng).unwrap(), 2);
        }
        assert!(model.sample_transition(3, 0, &mut rng).is_err());
        assert!(model.sample_transition(0, 1, &mut rng).is_err());
    }

    #[test]
    fn uniform_row_frequencies() {
        let kernel = TransitionKernel::new(4, 1, vec![0.25; 16]).unwrap();
        let reward = RewardTable::new(4, 1, vec![0.0; 4]).unwrap();
        let model = MdpModel::new(kernel, reward, "u").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = [0usize; 4];
        for _ in 0..100_000 {
            hits[model.step(0, 0, &mut rng)] += 1;
        }
        for h in hits {
            assert!((h as f64 / 1e5 - 0.25).abs() < 0.01, "{hits:?}");
        }
    }

    #[test]
    fn single_state_value_is_horizon() {
        let (values, _) = optimal_value_and_policy(&single_state(1.0), 5).unwrap();
        assert_eq!(values.get(0, 0), 5.0);
        assert_eq!(values.get(5, 0), 0.0);
    }

    #[test]
    fn two_state_chain() {
        // 0 -> 1 deterministically, 1 absorbing, reward only in 1.
        let kernel = TransitionKernel::new(2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let reward = RewardTable::new(2, 1, vec![0.0, 1.0]).unwrap();
        let model = MdpModel::new(kernel, reward, "chain").unwrap();
        let (values, policy) = optimal_value_and_policy(&model, 3).unwrap();
        assert_eq!(values.get(0, 0), 2.0);
        assert_eq!(evaluate_policy(&model, &policy, 0).unwrap(), 2.0);
    }

    #[test]
    fn ties_pick_smallest_action() {
        let (_, policy) = optimal_value_and_policy(&single_state(0.5), 3).unwrap();
        assert!((0..3).all(|h| policy.action(h, 0) == 0));
    }

    #[test]
    fn zero_reward_absorbing_policy() {
        // action 1 in state 0 is absorbing with zero reward
        let kernel = TransitionKernel::new(2, 2, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let reward = RewardTable::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let model = MdpModel::new(kernel, reward, "absorb").unwrap();
        let policy = NonstationaryPolicy::constant(10, 2, 1);
        assert_eq!(evaluate_policy(&model, &policy, 0).unwrap(), 0.0);
    }

    #[test]
    fn cycle_diameter_and_hitting_time() {
        for n in 2..7 {
            let model = cycle(n);
            let d = diameter(&model).unwrap();
            assert!((d - (n - 1) as f64).abs() < 1e-9, "n={n} d={d}");
            let t = hitting_time_upper_bound(&model).unwrap();
            assert!((t - (n - 1) as f64).abs() < 1e-9, "n={n} t={t}");
        }
    }

    #[test]
    fn hitting_time_takes_worst_action() {
        // symmetric two-state chain, exit probability 0.5 or 0.25
        let probs = vec![0.5, 0.5, 0.75, 0.25, 0.5, 0.5, 0.25, 0.75];
        let kernel = TransitionKernel::new(2, 2, probs).unwrap();
        let reward = RewardTable::new(2, 2, vec![0.0; 4]).unwrap();
        let model = MdpModel::new(kernel, reward, "exit").unwrap();
        assert!((hitting_time_upper_bound(&model).unwrap() - 4.0).abs() < 1e-12);
        assert!((diameter(&model).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn disconnected_pair() {
        // state 1 absorbing
        let kernel = TransitionKernel::new(2, 1, vec![0.5, 0.5, 0.0, 1.0]).unwrap();
        let reward = RewardTable::new(2, 1, vec![0.0; 2]).unwrap();
        let model = MdpModel::new(kernel, reward, "abs").unwrap();
        assert!(matches!(diameter(&model), Err(Error::InfiniteDiameter { from: 1, to: 0 })));
        assert_eq!(hitting_time_upper_bound(&model).unwrap(), f64::INFINITY);
    }

    #[test]
    fn enumeration_guard() {
        let n = 11;
        let kernel = TransitionKernel::new(n, 4, vec![1.0 / n as f64; n * 4 * n]).unwrap();
        let reward = RewardTable::new(n, 4, vec![0.0; n * 4]).unwrap();
        let model = MdpModel::new(kernel, reward, "big").unwrap();
        assert!(matches!(
            hitting_time_upper_bound(&model),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn long_horizon_start_value_matches_tabulated() {
        let probs = vec![0.9, 0.1, 0.3, 0.7, 0.2, 0.8, 0.6, 0.4];
        let kernel = TransitionKernel::new(2, 2, probs).unwrap();
        let reward = RewardTable::new(2, 2, vec![0.0, 0.1, 1.0, 0.5]).unwrap();
        let model = MdpModel::new(kernel, reward, "m").unwrap();
        for horizon in [1, 10, 500, 3000] {
            let (values, _) = optimal_value_and_policy(&model, horizon).unwrap();
            let fast = optimal_start_value(&model, horizon, 0).unwrap();
            assert!((fast - values.get(0, 0)).abs() < 1e-8, "H={horizon}");
        }
    }
}
