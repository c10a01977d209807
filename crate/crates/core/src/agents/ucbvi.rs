//! Optimistic value iteration with a Hoeffding bonus, the single-task
//! learner, and its external-samples variant.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, EpisodeEnv, EpisodeReport, EvalPolicy};
use crate::error::{Error, Result};
use crate::mdp::{argmax_first, dot, NonstationaryPolicy, RewardTable, ValueTable};
use crate::separability::EmpiricalCounts;

/// Ceiling on optimistic Q values, which also stands in for pairs never
/// visited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QClip {
    /// The full horizon `H` at every step.
    #[default]
    Horizon,
    /// `H - h`, the steps left from 0-based step `h`. Never below the true
    /// value, and it keeps pairs from tying at the ceiling.
    StepsLeft,
}

/// Which log constant a planner uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogVariant {
    /// `ln(c S A K H / p)`
    SingleTask,
    /// `ln(c S A K H M / p)`
    MultiTask { models: usize },
    /// `ln(c S A K (H + N) / p)`
    External { samples_per_pair: u64 },
}

/// `ln(factor * S * A * K * H' / p)` with `H'` per `variant`. The usual
/// factor is 5.
#[allow(clippy::too_many_arguments)]
pub fn ucbvi_log_constant(
    variant: LogVariant,
    num_states: usize,
    num_actions: usize,
    episodes: u64,
    horizon: usize,
    failure: f64,
    factor: f64,
) -> Result<f64> {
    if !(failure > 0.0 && failure < 1.0) {
        return Err(Error::Domain(format!("failure probability {failure} outside (0, 1)")));
    }
    if num_states == 0 || num_actions == 0 || episodes == 0 || horizon == 0 || !(factor > 0.0) {
        return Err(Error::Domain("log constant arguments must be positive".into()));
    }
    let base = factor * num_states as f64 * num_actions as f64 * episodes as f64;
    let arg = match variant {
        LogVariant::SingleTask => base * horizon as f64,
        LogVariant::MultiTask { models } => base * horizon as f64 * models as f64,
        LogVariant::External { samples_per_pair } => base * (horizon as f64 + samples_per_pair as f64),
    };
    Ok((arg / failure).ln())
}

/// Q tables, values and greedy policy from one planning pass.
#[derive(Clone, Debug)]
pub struct UcbviPlan {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    pub values: ValueTable,
    pub policy: NonstationaryPolicy,
}

impl UcbviPlan {
    pub fn horizon(&self) -> usize {
        self.policy.horizon()
    }

    /// `Q_h(s, a)`, `h` 0-based.
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }
}

/// Backward induction over `P_hat` with `Q = min(cap, r + P_hat V + b)` and
/// `b = bonus_scale * H * L / sqrt(N)`; pairs never visited get `Q = cap`.
pub fn ucbvi_plan(
    counts: &EmpiricalCounts,
    horizon: usize,
    reward: &RewardTable,
    log_constant: f64,
    bonus_scale: f64,
    clip: QClip,
) -> Result<UcbviPlan> {
    if !(log_constant > 0.0) {
        return Err(Error::Domain(format!("log constant {log_constant} must be positive")));
    }
    let scale = bonus_scale * horizon as f64 * log_constant;
    Ok(plan(counts, horizon, reward, Some(clip), |n| {
        (n > 0).then(|| scale * (1.0 / n as f64).sqrt())
    }))
}

/// Greedy plan on the empirical model, without bonus or clipping.
/// Unvisited pairs contribute only their immediate reward.
pub fn estimated_optimal_policy(counts: &EmpiricalCounts, reward: &RewardTable, horizon: usize) -> NonstationaryPolicy {
    plan(counts, horizon, reward, None, |_| Some(0.0)).policy
}

/// Shared backward induction. `bonus(n)` yields the bonus, or `None` for
/// an optimistic entry at the cap.
fn plan<F>(counts: &EmpiricalCounts, horizon: usize, reward: &RewardTable, clip: Option<QClip>, bonus: F) -> UcbviPlan
where
    F: Fn(u64) -> Option<f64>,
{
    let ns = counts.num_states();
    let na = counts.num_actions();
    let p_hat = counts.estimate_table();
    let pair_terms: Vec<Option<f64>> = (0..ns * na)
        .map(|sa| bonus(counts.pair_count(sa / na, sa % na)))
        .collect();
    let mut q = vec![0.0; horizon * ns * na];
    let mut values = vec![0.0; (horizon + 1) * ns];
    let mut actions = vec![0; horizon * ns];
    for h in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((h + 1) * ns);
        let next = &tail[..ns];
        let current = &mut head[h * ns..];
        let cap = match clip {
            Some(QClip::Horizon) => horizon as f64,
            Some(QClip::StepsLeft) => (horizon - h) as f64,
            None => f64::INFINITY,
        };
        for s in 0..ns {
            let qs = &mut q[(h * ns + s) * na..(h * ns + s + 1) * na];
            for (a, slot) in qs.iter_mut().enumerate() {
                let sa = s * na + a;
                *slot = match pair_terms[sa] {
                    None => cap,
                    Some(b) => {
                        let backup = reward.get(s, a) + dot(&p_hat[sa * ns..(sa + 1) * ns], next) + b;
                        backup.min(cap)
                    }
                };
            }
            let best = argmax_first(qs);
            current[s] = qs[best];
            actions[h * ns + s] = best;
        }
    }
    UcbviPlan {
        num_states: ns,
        num_actions: na,
        q,
        values: ValueTable::from_parts(horizon, ns, values),
        policy: NonstationaryPolicy::from_parts(horizon, ns, actions),
    }
}

/// Settings shared by the UCBVI-style learners.
#[derive(Clone, Debug, PartialEq)]
pub struct UcbviSettings {
    pub horizon: usize,
    pub episodes: u64,
    pub failure: f64,
    pub bonus_scale: f64,
    pub clip: QClip,
    pub log_factor: f64,
}

/// Single-task UCBVI-CH. With `external_samples > 0` it also draws that
/// many generative samples per pair before each episode and plans on the
/// pooled counts with the matching log constant.
#[derive(Clone, Debug)]
pub struct UcbviAgent {
    name: String,
    settings: UcbviSettings,
    external_samples: u64,
    counts: Option<EmpiricalCounts>,
    external: Option<EmpiricalCounts>,
}

impl UcbviAgent {
    pub fn new(name: impl Into<String>, settings: UcbviSettings, external_samples: u64) -> Self {
        UcbviAgent {
            name: name.into(),
            settings,
            external_samples,
            counts: None,
            external: None,
        }
    }

    pub fn counts(&self) -> Option<&EmpiricalCounts> {
        self.counts.as_ref()
    }

    fn pooled(&self) -> Option<EmpiricalCounts> {
        let mut pooled = self.counts.clone()?;
        if let Some(external) = &self.external {
            pooled.merge(external);
        }
        Some(pooled)
    }
}

impl Agent for UcbviAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let (ns, na) = (env.num_states(), env.num_actions());
        let counts = self.counts.get_or_insert_with(|| EmpiricalCounts::new(ns, na));
        let mut pooled = counts.clone();
        if self.external_samples > 0 {
            let external = self.external.get_or_insert_with(|| EmpiricalCounts::new(ns, na));
            for s in 0..ns {
                for a in 0..na {
                    for _ in 0..self.external_samples {
                        let next = env.oracle_sample(s, a);
                        external.record(s, a, next);
                    }
                }
            }
            pooled.merge(external);
        }
        let st = &self.settings;
        let log_constant = ucbvi_log_constant(
            LogVariant::External {
                samples_per_pair: self.external_samples,
            },
            ns,
            na,
            st.episodes,
            st.horizon,
            st.failure,
            st.log_factor,
        )?;
        let plan = ucbvi_plan(&pooled, st.horizon, env.reward(), log_constant, st.bonus_scale, st.clip)?;
        let start = env.state();
        let counts = self.counts.as_mut().expect("initialised above");
        for h in 0..st.horizon {
            let s = env.state();
            let a = plan.policy.action(h, s);
            let (_, next) = env.step(a);
            counts.record(s, a, next);
        }
        Ok(EpisodeReport {
            optimistic_value: Some(plan.values.get(0, start)),
            episode_policy: Some(plan.policy),
            ..EpisodeReport::default()
        })
    }

    fn evaluation_policy(&self, reward: &RewardTable, eval_horizon: usize) -> EvalPolicy {
        match self.pooled() {
            Some(counts) => EvalPolicy::Table(estimated_optimal_policy(&counts, reward, eval_horizon)),
            None => EvalPolicy::UniformRandom,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reward(ns: usize, na: usize, v: f64) -> RewardTable {
        RewardTable::new(ns, na, vec![v; ns * na]).unwrap()
    }

    #[test]
    fn log_constant_examples() {
        let l = ucbvi_log_constant(LogVariant::SingleTask, 16, 4, 200, 200, 0.03, 5.0).unwrap();
        assert!((l - (5.0 * 16.0 * 4.0 * 200.0 * 200.0 / 0.03f64).ln()).abs() < 1e-12);
        assert!((l - 19.871).abs() < 1e-3);
        let l4 = ucbvi_log_constant(LogVariant::MultiTask { models: 4 }, 16, 4, 200, 200, 0.03, 5.0).unwrap();
        assert!((l4 - l - 4f64.ln()).abs() < 1e-12);
        let l0 = ucbvi_log_constant(LogVariant::External { samples_per_pair: 0 }, 16, 4, 200, 200, 0.03, 5.0).unwrap();
        assert_eq!(l0, l);
        assert!(ucbvi_log_constant(LogVariant::SingleTask, 16, 4, 200, 200, 1.5, 5.0).is_err());
    }

    #[test]
    fn unvisited_pairs_are_fully_optimistic() {
        let counts = EmpiricalCounts::new(3, 2);
        let plan = ucbvi_plan(&counts, 7, &reward(3, 2, 0.0), 2.0, 7.0, QClip::Horizon).unwrap();
        assert!(plan.q_table().iter().all(|q| *q == 7.0));
        assert_eq!(plan.values.get(0, 1), 7.0);
        let plan = ucbvi_plan(&counts, 7, &reward(3, 2, 0.0), 2.0, 7.0, QClip::StepsLeft).unwrap();
        for h in 0..7 {
            for s in 0..3 {
                assert_eq!(plan.q(h, s, 0), (7 - h) as f64);
                assert_eq!(plan.q(h, s, 1), (7 - h) as f64);
            }
        }
        assert_eq!(plan.values.get(0, 1), 7.0);
    }

    #[test]
    fn bonus_vanishes_with_many_samples() {
        // two states, action 0 stays, action 1 swaps; reward 1 in state 1
        let mut counts = EmpiricalCounts::new(2, 2);
        let n = 1_000_000_000;
        counts.record_many(0, 0, 0, n);
        counts.record_many(0, 1, 1, n);
        counts.record_many(1, 0, 1, n);
        counts.record_many(1, 1, 0, n);
        let r = RewardTable::from_state_rewards(2, &[0.0, 1.0]).unwrap();
        let plan = ucbvi_plan(&counts, 5, &r, 0.1, 7.0, QClip::Horizon).unwrap();
        // exact values: V_h(1) = 5 - h, V_h(0) = 4 - h
        for h in 0..5 {
            assert!((plan.values.get(h, 1) - (5 - h) as f64).abs() < 1e-3);
            assert!((plan.values.get(h, 0) - (4 - h) as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn single_rewarding_state_clips_at_horizon() {
        let mut counts = EmpiricalCounts::new(1, 2);
        counts.record_many(0, 0, 0, 3);
        counts.record_many(0, 1, 0, 1);
        let plan = ucbvi_plan(&counts, 6, &reward(1, 2, 1.0), 1.5, 7.0, QClip::Horizon).unwrap();
        assert!((0..6).all(|h| plan.values.get(h, 0) == 6.0));
        let plan = ucbvi_plan(&counts, 6, &reward(1, 2, 1.0), 1.5, 7.0, QClip::StepsLeft).unwrap();
        assert!((0..6).all(|h| plan.values.get(h, 0) == (6 - h) as f64));
    }

    #[test]
    fn estimated_plan_ignores_unvisited_pairs() {
        let mut counts = EmpiricalCounts::new(2, 2);
        counts.record_many(0, 1, 1, 4);
        let r = RewardTable::from_state_rewards(2, &[0.0, 1.0]).unwrap();
        let policy = estimated_optimal_policy(&counts, &r, 3);
        assert_eq!(policy.action(0, 0), 1);
    }
}
