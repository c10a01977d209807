//! Learners and the per-episode interaction interface they run against.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{MdpModel, NonstationaryPolicy, RewardTable};

pub mod aomultirl;
pub mod baselines;
pub mod cluster;
pub mod explore;
pub mod ucbvi;

pub use aomultirl::{extract_distinguishing_pairs, AoMultiRl, AomrlConfig, AomrlConstants, HorizonSpec, UnknownGammaAgent};
pub use baselines::{OneEpisodeUcbvi, OptimalAgent, RandomAgent};
pub use cluster::{identify_cluster, Cluster, ClusterStore};
pub use explore::{explore_id, Explorer};
pub use ucbvi::{estimated_optimal_policy, ucbvi_log_constant, ucbvi_plan, LogVariant, QClip, UcbviAgent, UcbviPlan, UcbviSettings};

/// Random source used by every simulation in the crate.
pub type SimRng = ChaCha8Rng;

/// One logged transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub h: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

/// Per-step log of an episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
}

/// The learner's view of one episode: the current state, the known reward,
/// and a `step` that samples from the hidden model.
pub struct EpisodeEnv<'a> {
    model: &'a MdpModel,
    state: usize,
    initial_state: usize,
    steps: usize,
    realized_return: f64,
    rng: &'a mut SimRng,
    oracle_rng: &'a mut SimRng,
    trace: Option<EpisodeTrace>,
}

impl<'a> EpisodeEnv<'a> {
    pub fn new(
        model: &'a MdpModel,
        initial_state: usize,
        rng: &'a mut SimRng,
        oracle_rng: &'a mut SimRng,
        record_trace: bool,
    ) -> Self {
        EpisodeEnv {
            model,
            state: initial_state,
            initial_state,
            steps: 0,
            realized_return: 0.0,
            rng,
            oracle_rng,
            trace: record_trace.then(EpisodeTrace::default),
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    /// The shared reward function, known to every learner.
    pub fn reward(&self) -> &RewardTable {
        self.model.reward()
    }

    /// Takes `action`, collects `r(s, a)` and moves to a sampled successor.
    #[inline]
    pub fn step(&mut self, action: usize) -> (f64, usize) {
        let s = self.state;
        let r = self.model.reward().get(s, action);
        let next = self.model.step(s, action, self.rng);
        if let Some(trace) = self.trace.as_mut() {
            trace.steps.push(StepRecord {
                h: self.steps,
                state: s,
                action,
                reward: r,
                next,
            });
        }
        self.realized_return += r;
        self.steps += 1;
        self.state = next;
        (r, next)
    }

    /// Independent draw from `P(.|s, a)` on a separate stream; the episode
    /// state does not move. Serves generative-model learners.
    pub fn oracle_sample(&mut self, s: usize, a: usize) -> usize {
        self.model.step(s, a, self.oracle_rng)
    }

    /// Full access to the hidden model. Only the oracle baseline uses this.
    pub fn reveal_model(&self) -> &MdpModel {
        self.model
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn realized_return(&self) -> f64 {
        self.realized_return
    }

    pub fn take_trace(&mut self) -> Option<EpisodeTrace> {
        self.trace.take()
    }
}

/// Snapshot of what the cluster identification step saw in one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringDiagnostics {
    pub gamma: Vec<(usize, usize)>,
    /// Episode estimate at each `gamma` pair.
    pub episode_rows: Vec<Vec<f64>>,
    /// Per existing cluster, its estimate at each `gamma` pair.
    pub cluster_rows: Vec<Vec<Vec<f64>>>,
    pub threshold: f64,
    /// Separation level the learner assumes.
    pub lam: f64,
    /// Identification result: 1-based cluster, 0 for "new".
    pub identified: usize,
}

/// What a learner reports after an episode.
#[derive(Clone, Debug, Default)]
pub struct EpisodeReport {
    /// 0-based index of the cluster the episode was assigned to.
    pub cluster_id: Option<usize>,
    /// Whether every distinguishing pair reached its visit target.
    pub explored_ok: Option<bool>,
    /// Set when one fixed table drove every step of the episode.
    pub episode_policy: Option<NonstationaryPolicy>,
    /// Optimistic planner value at the initial state, if one was planned.
    pub optimistic_value: Option<f64>,
    pub diagnostics: Option<ClusteringDiagnostics>,
}

/// Policy the harness evaluates after an episode.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalPolicy {
    Table(NonstationaryPolicy),
    /// Optimal policy of the episode's true model.
    Optimal,
    UniformRandom,
}

pub trait Agent: Send {
    fn name(&self) -> &str;

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport>;

    /// Policy used for the post-episode evaluation rollout.
    fn evaluation_policy(&self, reward: &RewardTable, eval_horizon: usize) -> EvalPolicy;

    /// Called once after the last episode.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }

    fn summary(&self) -> AgentSummary {
        AgentSummary::default()
    }
}

/// End-of-run facts about a learner's internal state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub clusters: Option<usize>,
    pub failed_explorations: Option<usize>,
    /// Distinguishing set found by the two-stage learner.
    pub discovered_gamma: Option<Vec<(usize, usize)>>,
    pub stage1_episodes: Option<usize>,
    /// Cluster count when stage 1 ended.
    pub stage1_clusters: Option<usize>,
}
