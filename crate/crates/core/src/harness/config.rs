//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{
    all_models_first_schedule, fixed_schedule_from_list, paper_schedule, uniform_schedule, TaskSchedule,
};
use crate::agents::{
    Agent, AoMultiRl, AomrlConfig, HorizonSpec, OneEpisodeUcbvi, OptimalAgent, QClip, RandomAgent, SimRng, UcbviAgent,
    UcbviSettings, UnknownGammaAgent,
};
use crate::environments::{
    make_counterexample_pair, make_gridworld_set, make_jao_set, make_noncommunicating_two_jao_set, make_two_jao_set,
    GRIDWORLD_START,
};
use crate::error::{Error, Result};
use crate::harness::model_io::load_model_set;
use crate::mdp::{hitting_time_upper_bound, MAX_ENUMERATED_POLICIES};
use crate::separability::{greedy_distinguishing_set, separation_level, ModelSet, StateActionSet};

fn default_name() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_eval_horizon() -> usize {
    200
}

fn default_failure() -> f64 {
    0.03
}

fn default_bonus_scale() -> f64 {
    7.0
}

fn default_log_factor() -> f64 {
    5.0
}

fn default_true() -> bool {
    true
}

fn default_replan_interval() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub environment: EnvironmentConfig,
    pub schedule: ScheduleConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Steps of the post-episode evaluation rollout.
    #[serde(default = "default_eval_horizon")]
    pub eval_horizon: usize,
    /// Output directory; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Keep per-episode clustering snapshots for validation.
    #[serde(default)]
    pub record_diagnostics: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Gridworld,
    Jao {
        num_actions: usize,
        delta: f64,
        lambda: f64,
        best_actions: Vec<usize>,
    },
    TwoJao {
        q: usize,
        lambda: f64,
        diameter: f64,
        horizon: f64,
    },
    NoncommTwoJao {
        q: usize,
        lambda: f64,
        diameter: f64,
        horizon: f64,
    },
    Counterexample {
        lambda: f64,
    },
    File {
        path: PathBuf,
    },
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<ModelSet> {
        match self {
            EnvironmentConfig::Gridworld => make_gridworld_set(),
            EnvironmentConfig::Jao {
                num_actions,
                delta,
                lambda,
                best_actions,
            } => make_jao_set(*num_actions, *delta, *lambda, best_actions),
            EnvironmentConfig::TwoJao {
                q,
                lambda,
                diameter,
                horizon,
            } => make_two_jao_set(*q, *lambda, *diameter, *horizon),
            EnvironmentConfig::NoncommTwoJao {
                q,
                lambda,
                diameter,
                horizon,
            } => make_noncommunicating_two_jao_set(*q, *lambda, *diameter, *horizon),
            EnvironmentConfig::Counterexample { lambda } => make_counterexample_pair(*lambda),
            EnvironmentConfig::File { path } => load_model_set(path),
        }
    }

    fn default_start(&self) -> usize {
        match self {
            EnvironmentConfig::Gridworld => GRIDWORLD_START,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// Uniform over models 0..3 with model 3 in fixed windows.
    Paper { episodes: usize },
    Uniform {
        episodes: usize,
        #[serde(default)]
        models: Option<Vec<usize>>,
    },
    Fixed { assignments: Vec<(usize, usize)> },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    /// Initial state; the environment's default when absent.
    #[serde(default)]
    pub start: Option<usize>,
    /// Prepend one episode of every model, in order.
    #[serde(default)]
    pub enumerate_models_first: bool,
}

impl ScheduleConfig {
    pub fn build(&self, set: &ModelSet, default_start: usize, rng: &mut SimRng) -> Result<TaskSchedule> {
        let start = self.start.unwrap_or(default_start);
        let m = set.len();
        let body = match &self.kind {
            ScheduleKind::Paper { episodes } => {
                if m < 4 {
                    return Err(Error::Config(format!("the paper schedule needs 4 models, the set has {m}")));
                }
                paper_schedule(*episodes, start, rng)
            }
            ScheduleKind::Uniform { episodes, models } => {
                let all: Vec<usize> = (0..m).collect();
                uniform_schedule(models.as_deref().unwrap_or(&all), *episodes, start, rng)?
            }
            ScheduleKind::Fixed { assignments } => fixed_schedule_from_list(assignments, m, set.num_states())?,
            ScheduleKind::File { path } => TaskSchedule::load(path)?,
        };
        let schedule = if self.enumerate_models_first {
            all_models_first_schedule(m, start, body)
        } else {
            body
        };
        schedule
            .validate(m, set.num_states())
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(schedule)
    }
}

/// Interaction budget of a baseline when its `horizon` is not given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Budget {
    /// Same total `H` as the first cluster-then-learn agent.
    #[default]
    Full,
    /// Only that agent's learning-phase length `H1`.
    LearningOnly,
}

/// Parameters shared by both cluster-then-learn agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub name: String,
    /// Learning-phase steps `H1`; the episode lasts `H0 + H1`.
    #[serde(default)]
    pub learning_horizon: Option<usize>,
    /// Total steps `H`, as an alternative to `learning_horizon`.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_failure")]
    pub failure: f64,
    #[serde(default)]
    pub hitting_time: Option<f64>,
    #[serde(default)]
    pub h0_override: Option<u64>,
    #[serde(default = "default_bonus_scale")]
    pub bonus_scale: f64,
    #[serde(default)]
    pub clip: QClip,
    #[serde(default = "default_log_factor")]
    pub log_factor: f64,
    #[serde(default)]
    pub pooled_learning: bool,
    #[serde(default = "default_true")]
    pub exclude_clustering_samples: bool,
    /// Learning-phase replanning period; once per episode when absent.
    #[serde(default)]
    pub replan_interval: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcbviParams {
    pub name: String,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_failure")]
    pub failure: f64,
    #[serde(default = "default_bonus_scale")]
    pub bonus_scale: f64,
    #[serde(default)]
    pub clip: QClip,
    #[serde(default = "default_log_factor")]
    pub log_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentConfig {
    Aomultirl {
        #[serde(flatten)]
        params: ClusteringParams,
        /// Distinguishing pairs `[state, action]`; a greedy cover of the
        /// true models when absent.
        #[serde(default)]
        gamma: Option<Vec<(usize, usize)>>,
    },
    AomultirlUnknownGamma {
        #[serde(flatten)]
        params: ClusteringParams,
        #[serde(default)]
        stage1_learning_horizon: usize,
    },
    Ucbvi {
        #[serde(flatten)]
        params: UcbviParams,
        #[serde(default)]
        external_samples: u64,
    },
    OneEpisodeUcbvi {
        #[serde(flatten)]
        params: UcbviParams,
        #[serde(default = "default_replan_interval")]
        replan_interval: usize,
    },
    Random {
        name: String,
        #[serde(default)]
        horizon: Option<usize>,
        #[serde(default)]
        budget: Budget,
    },
    Optimal {
        name: String,
        #[serde(default)]
        horizon: Option<usize>,
        #[serde(default)]
        budget: Budget,
    },
}

impl AgentConfig {
    pub fn name(&self) -> &str {
        match self {
            AgentConfig::Aomultirl { params, .. } | AgentConfig::AomultirlUnknownGamma { params, .. } => &params.name,
            AgentConfig::Ucbvi { params, .. } | AgentConfig::OneEpisodeUcbvi { params, .. } => &params.name,
            AgentConfig::Random { name, .. } | AgentConfig::Optimal { name, .. } => name,
        }
    }

    fn clustering_params_mut(&mut self) -> Option<&mut ClusteringParams> {
        match self {
            AgentConfig::Aomultirl { params, .. } | AgentConfig::AomultirlUnknownGamma { params, .. } => Some(params),
            _ => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        // relative paths in the file are relative to the file
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvironmentConfig::File { path } = &mut self.environment {
            fix(path);
        }
        if let ScheduleKind::File { path } = &mut self.schedule.kind {
            fix(path);
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies an `H0` override to every cluster-then-learn agent.
    pub fn override_h0(&mut self, h0: u64) {
        for agent in &mut self.agents {
            if let Some(params) = agent.clustering_params_mut() {
                params.h0_override = Some(h0);
            }
        }
    }

    /// Replaces the seed list with `0..n`.
    pub fn set_seed_count(&mut self, n: u64) {
        self.seeds = (0..n).collect();
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("at least one agent is required".into()));
        }
        if self.eval_horizon == 0 {
            return Err(Error::Config("eval_horizon must be positive".into()));
        }
        let mut names: Vec<&str> = self.agents.iter().map(|a| a.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("agent names must be unique".into()));
        }
        Ok(())
    }

    /// Everything a seed run needs, resolved once.
    pub fn prepare(&self) -> Result<PreparedExperiment> {
        self.validate()?;
        let set = self.environment.build()?;
        let default_start = self.environment.default_start();
        let probe_episodes = {
            let mut rng = crate::harness::stream_rng(0, crate::harness::STREAM_SCHEDULE);
            self.schedule.build(&set, default_start, &mut rng)?.episodes()
        };
        if probe_episodes == 0 {
            return Err(Error::Config("the schedule has no episodes".into()));
        }
        let mut agents = Vec::new();
        let mut reference: Option<(usize, usize)> = None;
        for agent in &self.agents {
            let spec = resolve_agent(agent, &set, probe_episodes as u64, reference, self.record_diagnostics)?;
            if reference.is_none() {
                if let AgentSpec::Clustering { config, .. } = &spec {
                    let c = config.constants()?;
                    reference = Some((c.h, c.h1));
                }
            }
            agents.push(spec);
        }
        // baselines listed before the first clustering agent
        let agents = agents
            .into_iter()
            .zip(&self.agents)
            .map(|(spec, cfg)| match spec {
                AgentSpec::Pending => match resolve_agent(cfg, &set, probe_episodes as u64, reference, false)? {
                    AgentSpec::Pending => Err(Error::Config(format!(
                        "agent '{}': horizon is required when no cluster-then-learn agent sets the budget",
                        cfg.name()
                    ))),
                    spec => Ok(spec),
                },
                other => Ok(other),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedExperiment {
            set,
            default_start,
            agents,
        })
    }
}

/// A model set plus agent recipes.
#[derive(Clone, Debug)]
pub struct PreparedExperiment {
    pub set: ModelSet,
    pub default_start: usize,
    pub agents: Vec<AgentSpec>,
}

/// Fully resolved agent recipe; instantiated once per seed.
#[derive(Clone, Debug)]
pub enum AgentSpec {
    Clustering {
        name: String,
        config: AomrlConfig,
        unknown_gamma: Option<usize>,
    },
    Ucbvi {
        name: String,
        settings: UcbviSettings,
        external_samples: u64,
    },
    OneEpisode {
        name: String,
        settings: UcbviSettings,
        replan_interval: usize,
    },
    Random {
        name: String,
        horizon: usize,
    },
    Optimal {
        name: String,
        horizon: usize,
    },
    Pending,
}

impl AgentSpec {
    pub fn instantiate(&self, agent_seed: u64) -> Result<Box<dyn Agent>> {
        Ok(match self {
            AgentSpec::Clustering {
                name,
                config,
                unknown_gamma: None,
            } => Box::new(AoMultiRl::new(name.clone(), config.clone())?),
            AgentSpec::Clustering {
                name,
                config,
                unknown_gamma: Some(stage1),
            } => Box::new(UnknownGammaAgent::new(name.clone(), config.clone(), *stage1)?),
            AgentSpec::Ucbvi {
                name,
                settings,
                external_samples,
            } => Box::new(UcbviAgent::new(name.clone(), settings.clone(), *external_samples)),
            AgentSpec::OneEpisode {
                name,
                settings,
                replan_interval,
            } => Box::new(OneEpisodeUcbvi::new(name.clone(), settings.clone(), *replan_interval)?),
            AgentSpec::Random { name, horizon } => Box::new(RandomAgent::new(name.clone(), *horizon, agent_seed)),
            AgentSpec::Optimal { name, horizon } => Box::new(OptimalAgent::new(name.clone(), *horizon)),
            AgentSpec::Pending => unreachable!("pending agents are resolved in prepare"),
        })
    }
}

fn baseline_horizon(
    name: &str,
    horizon: Option<usize>,
    budget: Budget,
    reference: Option<(usize, usize)>,
) -> Result<Option<usize>> {
    if let Some(h) = horizon {
        if h == 0 {
            return Err(Error::Config(format!("agent '{name}': horizon must be positive")));
        }
        return Ok(Some(h));
    }
    Ok(reference.map(|(h, h1)| match budget {
        Budget::Full => h,
        Budget::LearningOnly => h1,
    }))
}

/// Default hitting-time bound: set metadata, else brute force when the
/// policy space is small enough.
fn default_hitting_time(set: &ModelSet, name: &str) -> Result<f64> {
    if let Some(d) = set.meta.hitting_time {
        return Ok(d);
    }
    let count = (set.num_actions() as f64).powi(set.num_states() as i32);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(Error::Config(format!("agent '{name}': supply hitting_time for this environment")));
    }
    let mut worst: f64 = 0.0;
    for model in set.models() {
        worst = worst.max(hitting_time_upper_bound(model)?);
    }
    if !worst.is_finite() {
        return Err(Error::Config(format!(
            "agent '{name}': some policy never reaches some state; supply hitting_time"
        )));
    }
    Ok(worst)
}

fn resolve_agent(
    agent: &AgentConfig,
    set: &ModelSet,
    episodes: u64,
    reference: Option<(usize, usize)>,
    record_diagnostics: bool,
) -> Result<AgentSpec> {
    let (ns, na) = (set.num_states(), set.num_actions());
    let clustering = |params: &ClusteringParams, gamma: StateActionSet| -> Result<AomrlConfig> {
        let lam = match params.lambda.or(set.meta.lambda) {
            Some(l) => l,
            None => separation_level(set)?,
        };
        let h = match (params.learning_horizon, params.horizon) {
            (Some(h1), None) => HorizonSpec::Learning(h1),
            (None, Some(h)) => HorizonSpec::Total(h),
            _ => {
                return Err(Error::Config(format!(
                    "agent '{}': give exactly one of learning_horizon and horizon",
                    params.name
                )))
            }
        };
        let dtilde = match params.hitting_time {
            Some(d) => d,
            None => default_hitting_time(set, &params.name)?,
        };
        let mut config = AomrlConfig::new(set.len(), episodes, ns, na, h, dtilde, lam, params.failure, gamma);
        config.alpha = params.alpha.unwrap_or(lam);
        config.h0_override = params.h0_override;
        config.bonus_scale = params.bonus_scale;
        config.clip = params.clip;
        config.log_factor = params.log_factor;
        config.pooled_learning = params.pooled_learning;
        config.exclude_clustering_samples = params.exclude_clustering_samples;
        config.replan_interval = params.replan_interval;
        config.record_diagnostics = record_diagnostics;
        Ok(config)
    };
    let ucbvi_settings = |params: &UcbviParams, horizon: usize| UcbviSettings {
        horizon,
        episodes,
        failure: params.failure,
        bonus_scale: params.bonus_scale,
        clip: params.clip,
        log_factor: params.log_factor,
    };
    Ok(match agent {
        AgentConfig::Aomultirl { params, gamma } => {
            let gamma = match gamma {
                Some(pairs) => StateActionSet::new(pairs.clone(), ns, na).map_err(|e| Error::Config(e.to_string()))?,
                None => {
                    let lam = match params.lambda.or(set.meta.lambda) {
                        Some(l) => l,
                        None => separation_level(set)?,
                    };
                    greedy_distinguishing_set(set, lam)?
                }
            };
            let config = clustering(params, gamma)?;
            config.constants()?;
            AgentSpec::Clustering {
                name: params.name.clone(),
                config,
                unknown_gamma: None,
            }
        }
        AgentConfig::AomultirlUnknownGamma {
            params,
            stage1_learning_horizon,
        } => {
            let config = clustering(params, StateActionSet::full(ns, na))?;
            UnknownGammaAgent::new(params.name.clone(), config.clone(), *stage1_learning_horizon)?;
            AgentSpec::Clustering {
                name: params.name.clone(),
                config,
                unknown_gamma: Some(*stage1_learning_horizon),
            }
        }
        AgentConfig::Ucbvi {
            params,
            external_samples,
        } => match baseline_horizon(&params.name, params.horizon, params.budget, reference)? {
            Some(h) => AgentSpec::Ucbvi {
                name: params.name.clone(),
                settings: ucbvi_settings(params, h),
                external_samples: *external_samples,
            },
            None => AgentSpec::Pending,
        },
        AgentConfig::OneEpisodeUcbvi {
            params,
            replan_interval,
        } => match baseline_horizon(&params.name, params.horizon, params.budget, reference)? {
            Some(h) => AgentSpec::OneEpisode {
                name: params.name.clone(),
                settings: ucbvi_settings(params, h),
                replan_interval: *replan_interval,
            },
            None => AgentSpec::Pending,
        },
        AgentConfig::Random { name, horizon, budget } => match baseline_horizon(name, *horizon, *budget, reference)? {
            Some(h) => AgentSpec::Random {
                name: name.clone(),
                horizon: h,
            },
            None => AgentSpec::Pending,
        },
        AgentConfig::Optimal { name, horizon, budget } => match baseline_horizon(name, *horizon, *budget, reference)? {
            Some(h) => AgentSpec::Optimal {
                name: name.clone(),
                horizon: h,
            },
            None => AgentSpec::Pending,
        },
    })
}
