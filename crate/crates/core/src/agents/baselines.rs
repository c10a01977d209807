//! Reference learners: uniform random, per-episode UCBVI and the oracle.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};

use crate::agents::ucbvi::{estimated_optimal_policy, ucbvi_log_constant, ucbvi_plan, LogVariant, UcbviSettings};
use crate::agents::{Agent, EpisodeEnv, EpisodeReport, EvalPolicy, SimRng};
use crate::error::{Error, Result};
use crate::mdp::{optimal_value_and_policy, NonstationaryPolicy, RewardTable};
use crate::separability::EmpiricalCounts;

/// Uniformly random actions.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    name: String,
    horizon: usize,
    rng: SimRng,
}

impl RandomAgent {
    pub fn new(name: impl Into<String>, horizon: usize, seed: u64) -> Self {
        RandomAgent {
            name: name.into(),
            horizon,
            rng: SimRng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let na = env.num_actions();
        for _ in 0..self.horizon {
            let a = self.rng.gen_range(0..na);
            env.step(a);
        }
        Ok(EpisodeReport::default())
    }

    fn evaluation_policy(&self, _reward: &RewardTable, _eval_horizon: usize) -> EvalPolicy {
        EvalPolicy::UniformRandom
    }
}

/// UCBVI that forgets everything between episodes. Inside an episode it
/// replans every `replan_interval` steps over the remaining horizon.
#[derive(Clone, Debug)]
pub struct OneEpisodeUcbvi {
    name: String,
    settings: UcbviSettings,
    replan_interval: usize,
    counts: Option<EmpiricalCounts>,
}

impl OneEpisodeUcbvi {
    pub fn new(name: impl Into<String>, settings: UcbviSettings, replan_interval: usize) -> Result<Self> {
        if replan_interval == 0 {
            return Err(Error::Config("replan interval must be positive".into()));
        }
        Ok(OneEpisodeUcbvi {
            name: name.into(),
            settings,
            replan_interval,
            counts: None,
        })
    }
}

impl Agent for OneEpisodeUcbvi {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let (ns, na) = (env.num_states(), env.num_actions());
        let st = &self.settings;
        let log_constant = ucbvi_log_constant(
            LogVariant::SingleTask,
            ns,
            na,
            st.episodes,
            st.horizon,
            st.failure,
            st.log_factor,
        )?;
        let mut counts = EmpiricalCounts::new(ns, na);
        let mut single_plan: Option<NonstationaryPolicy> = None;
        let mut optimistic_value = None;
        let mut t = 0;
        while t < st.horizon {
            let remaining = st.horizon - t;
            let plan = ucbvi_plan(&counts, remaining, env.reward(), log_constant, st.bonus_scale, st.clip)?;
            if t == 0 {
                optimistic_value = Some(plan.values.get(0, env.state()));
            }
            let block = self.replan_interval.min(remaining);
            for h in 0..block {
                let s = env.state();
                let a = plan.policy.action(h, s);
                let (_, next) = env.step(a);
                counts.record(s, a, next);
            }
            if block == st.horizon {
                single_plan = Some(plan.policy);
            }
            t += block;
        }
        self.counts = Some(counts);
        Ok(EpisodeReport {
            episode_policy: single_plan,
            optimistic_value,
            ..EpisodeReport::default()
        })
    }

    fn evaluation_policy(&self, reward: &RewardTable, eval_horizon: usize) -> EvalPolicy {
        match &self.counts {
            Some(counts) => EvalPolicy::Table(estimated_optimal_policy(counts, reward, eval_horizon)),
            None => EvalPolicy::UniformRandom,
        }
    }
}

/// Acts optimally on the true episode model.
#[derive(Clone, Debug)]
pub struct OptimalAgent {
    name: String,
    horizon: usize,
    policies: HashMap<String, NonstationaryPolicy>,
}

impl OptimalAgent {
    pub fn new(name: impl Into<String>, horizon: usize) -> Self {
        OptimalAgent {
            name: name.into(),
            horizon,
            policies: HashMap::new(),
        }
    }
}

impl Agent for OptimalAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let model = env.reveal_model();
        let policy = match self.policies.get(model.label()) {
            Some(policy) => policy.clone(),
            None => {
                let (_, policy) = optimal_value_and_policy(model, self.horizon)?;
                self.policies.insert(model.label().to_string(), policy.clone());
                policy
            }
        };
        for h in 0..self.horizon {
            let s = env.state();
            env.step(policy.action(h, s));
        }
        Ok(EpisodeReport {
            episode_policy: Some(policy),
            ..EpisodeReport::default()
        })
    }

    fn evaluation_policy(&self, _reward: &RewardTable, _eval_horizon: usize) -> EvalPolicy {
        EvalPolicy::Optimal
    }
}
