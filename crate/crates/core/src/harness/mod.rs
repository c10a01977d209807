//! Seeded experiment runs: schedules, agents, evaluation and metrics.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::adversary::TaskSchedule;
use crate::agents::{EpisodeEnv, EvalPolicy, SimRng};
use crate::error::Result;
use crate::mdp::{dot, evaluate_policy, optimal_start_value, optimal_value_and_policy, MdpModel};
use crate::separability::ModelSet;

pub mod config;
pub mod metrics;
pub mod model_io;
pub mod output;

pub use config::{AgentConfig, AgentSpec, EnvironmentConfig, ExperimentConfig, PreparedExperiment, ScheduleConfig};
pub use metrics::{
    aper_series, check_good_event, cluster_correctness, compute_regret, EpisodeExtras, GoodEventCheck, MetricsRow,
    RunRecord,
};
pub use model_io::{load_model_set, save_model_set, ModelSetDocument};
pub use output::{aggregate, emit_outputs, read_metrics_csv, write_metrics_csv, write_plot_data, OutputFiles};

/// Independent random streams derived from one seed.
pub const STREAM_SCHEDULE: u64 = 0;
pub const STREAM_ENV: u64 = 1;
pub const STREAM_ORACLE: u64 = 2;
pub const STREAM_AGENT: u64 = 3;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Horizons up to this length get an exact value table; longer ones use
/// the gain-extrapolating solver.
const EXACT_VALUE_HORIZON: usize = 100_000;

/// `V*_H(s)` per (model, start, horizon).
#[derive(Default)]
struct OptimalValues {
    cache: HashMap<(usize, usize, usize), f64>,
}

impl OptimalValues {
    fn get(&mut self, set: &ModelSet, model: usize, start: usize, horizon: usize) -> Result<f64> {
        if horizon == 0 {
            return Ok(0.0);
        }
        if let Some(v) = self.cache.get(&(model, start, horizon)) {
            return Ok(*v);
        }
        let m = set.model(model);
        let v = if horizon <= EXACT_VALUE_HORIZON {
            optimal_value_and_policy(m, horizon)?.0.get(0, start)
        } else {
            optimal_start_value(m, horizon, start)?
        };
        self.cache.insert((model, start, horizon), v);
        Ok(v)
    }
}

/// Expected `horizon`-step return of the uniformly random policy.
pub fn evaluate_uniform_random(model: &MdpModel, start: usize, horizon: usize) -> f64 {
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut mixed = vec![0.0; ns * ns];
    let mut reward = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            reward[s] += model.reward().get(s, a) / na as f64;
            for (x, p) in mixed[s * ns..(s + 1) * ns].iter_mut().zip(model.kernel().row(s, a)) {
                *x += p / na as f64;
            }
        }
    }
    let mut dist = vec![0.0; ns];
    dist[start] = 1.0;
    let mut next = vec![0.0; ns];
    let mut total = 0.0;
    for _ in 0..horizon {
        total += dot(&dist, &reward);
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            for (x, p) in next.iter_mut().zip(&mixed[s * ns..(s + 1) * ns]) {
                *x += dist[s] * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    total
}

/// Runs every agent on every seed. Records come ordered by seed, then by
/// agent as listed in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let prepared = config.prepare()?;
    let per_seed: Vec<Vec<RunRecord>> = config
        .seeds
        .par_iter()
        .map(|seed| run_seed(config, &prepared, *seed))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// All agents on one seed. Every agent sees the same schedule and the
/// same environment random stream.
pub fn run_seed(config: &ExperimentConfig, prepared: &PreparedExperiment, seed: u64) -> Result<Vec<RunRecord>> {
    let schedule = config
        .schedule
        .build(&prepared.set, prepared.default_start, &mut stream_rng(seed, STREAM_SCHEDULE))?;
    prepared
        .agents
        .iter()
        .map(|spec| run_agent(config, prepared, spec, &schedule, seed))
        .collect()
}

fn run_agent(
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    spec: &AgentSpec,
    schedule: &TaskSchedule,
    seed: u64,
) -> Result<RunRecord> {
    let set = &prepared.set;
    let mut agent = spec.instantiate(stream_rng(seed, STREAM_AGENT).next_u64())?;
    let mut env_rng = stream_rng(seed, STREAM_ENV);
    let mut oracle_rng = stream_rng(seed, STREAM_ORACLE);
    let mut values = OptimalValues::default();
    let mut rows = Vec::with_capacity(schedule.episodes());
    let mut extras = Vec::with_capacity(schedule.episodes());
    let mut clusters = Vec::new();
    let mut snapshots = Vec::new();
    let mut explored = Vec::new();
    let mut eval_total = 0.0;
    for (k, task) in schedule.assignments().iter().enumerate() {
        let model = set.model(task.model);
        let mut env = EpisodeEnv::new(model, task.initial_state, &mut env_rng, &mut oracle_rng, false);
        let report = agent.run_episode(&mut env)?;
        let steps = env.steps();
        let realized = env.realized_return();
        drop(env);

        let optimal = values.get(set, task.model, task.initial_state, steps)?;
        let (regret, is_proxy) = match &report.episode_policy {
            Some(policy) if policy.horizon() == steps => {
                (optimal - evaluate_policy(model, policy, task.initial_state)?, false)
            }
            _ => (optimal - realized, true),
        };
        let eval_return = match agent.evaluation_policy(model.reward(), config.eval_horizon) {
            EvalPolicy::Table(policy) => evaluate_policy(model, &policy, task.initial_state)?,
            EvalPolicy::Optimal => values.get(set, task.model, task.initial_state, config.eval_horizon)?,
            EvalPolicy::UniformRandom => evaluate_uniform_random(model, task.initial_state, config.eval_horizon),
        };
        eval_total += eval_return;
        if let Some(c) = report.cluster_id {
            clusters.push(c);
            explored.push(report.explored_ok.unwrap_or(true));
            snapshots.push(report.diagnostics);
        }
        rows.push(MetricsRow {
            run_id: agent.name().to_string(),
            seed,
            episode: k + 1,
            model_true: task.model,
            cluster_id: report.cluster_id,
            cluster_correct: None,
            explored_ok: report.explored_ok,
            realized_return: realized,
            eval_return,
            regret,
            regret_is_proxy: is_proxy,
            aper: eval_total / (k + 1) as f64,
        });
        extras.push(EpisodeExtras {
            steps,
            initial_state: task.initial_state,
            optimal_value: optimal,
            optimistic_value: report.optimistic_value,
        });
    }
    agent.finish()?;

    let mut good_event = None;
    if clusters.len() == rows.len() && !rows.is_empty() {
        let models: Vec<usize> = rows.iter().map(|r| r.model_true).collect();
        for (row, ok) in rows.iter_mut().zip(cluster_correctness(&clusters, &models)) {
            row.cluster_correct = Some(ok);
        }
        if snapshots.iter().any(Option::is_some) {
            good_event = Some(check_good_event(set, &models, &clusters, &snapshots, &explored));
        }
    }
    Ok(RunRecord {
        run_id: agent.name().to_string(),
        seed,
        rows,
        extras,
        summary: agent.summary(),
        good_event,
    })
}
