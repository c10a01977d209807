//! Cluster-then-learn: a clustering phase that identifies the episode's
//! model from distinguishing pairs, followed by UCBVI on that cluster's
//! samples. Also the two-stage variant that discovers the distinguishing
//! set itself.

use crate::agents::cluster::{identify_cluster, ClusterStore};
use crate::agents::explore::Explorer;
use crate::agents::ucbvi::{estimated_optimal_policy, ucbvi_log_constant, ucbvi_plan, LogVariant, QClip};
use crate::agents::{Agent, AgentSummary, ClusteringDiagnostics, EpisodeEnv, EpisodeReport, EvalPolicy};
use crate::error::{Error, Result};
use crate::mdp::RewardTable;
use crate::separability::{clustering_horizon, l1, required_visits, EmpiricalCounts, StateActionSet};

/// How the per-episode interaction budget is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonSpec {
    /// Total steps `H`; the learning phase gets `H - H0`.
    Total(usize),
    /// Learning-phase steps `H1`; the episode lasts `H0 + H1`.
    Learning(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AomrlConfig {
    pub m: usize,
    pub k: u64,
    pub s: usize,
    pub a: usize,
    pub h: HorizonSpec,
    pub dtilde: f64,
    pub lam: f64,
    pub alpha: f64,
    pub p: f64,
    pub gamma: StateActionSet,
    pub h0_override: Option<u64>,
    pub bonus_scale: f64,
    pub clip: QClip,
    pub log_factor: f64,
    /// Plan the learning phase on clustering and learning samples together.
    pub pooled_learning: bool,
    /// Evaluate on learning-phase samples only.
    pub exclude_clustering_samples: bool,
    /// Replan the learning phase every this many steps; once per episode
    /// when absent.
    pub replan_interval: Option<usize>,
    pub record_diagnostics: bool,
}

impl AomrlConfig {
    /// Config with the usual defaults: bonus scale 7, log factor 5,
    /// learning on the regret store only, evaluation excluding clustering
    /// samples.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        k: u64,
        s: usize,
        a: usize,
        h: HorizonSpec,
        dtilde: f64,
        lam: f64,
        p: f64,
        gamma: StateActionSet,
    ) -> Self {
        AomrlConfig {
            m,
            k,
            s,
            a,
            h,
            dtilde,
            lam,
            alpha: lam,
            p,
            gamma,
            h0_override: None,
            bonus_scale: 7.0,
            clip: QClip::Horizon,
            log_factor: 5.0,
            pooled_learning: false,
            exclude_clustering_samples: true,
            replan_interval: None,
            record_diagnostics: false,
        }
    }

    /// Derived constants, after validating the config.
    pub fn constants(&self) -> Result<AomrlConstants> {
        if self.m == 0 || self.k == 0 || self.s == 0 || self.a == 0 {
            return Err(Error::Config("M, K, S and A must be positive".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("failure probability {} outside (0, 1)", self.p)));
        }
        if self.alpha < self.lam / 2.0 {
            return Err(Error::Config(format!(
                "alpha {} below lambda / 2 = {}",
                self.alpha,
                self.lam / 2.0
            )));
        }
        if self.gamma.is_empty() {
            return Err(Error::Config("distinguishing set is empty".into()));
        }
        if self.replan_interval == Some(0) {
            return Err(Error::Config("replan_interval must be positive".into()));
        }
        let p1 = self.p / 3.0;
        let n = required_visits(self.lam, self.s, p1, self.k, self.gamma.len())?;
        let h0 = match self.h0_override {
            Some(h0) => h0,
            None => clustering_horizon(self.dtilde, self.gamma.len(), n)?,
        };
        let h0 = usize::try_from(h0).map_err(|_| Error::Config(format!("H0 = {h0} does not fit in memory")))?;
        let (h, h1) = match self.h {
            HorizonSpec::Total(h) => (h, h.saturating_sub(h0)),
            HorizonSpec::Learning(h1) => (h0 + h1, h1),
        };
        if h < h0 {
            return Err(Error::Config(format!("H = {h} is shorter than H0 = {h0}")));
        }
        Ok(AomrlConstants {
            p1,
            n,
            h0,
            h1,
            h,
            delta: self.alpha - self.lam / 4.0,
        })
    }
}

/// Quantities derived from an [`AomrlConfig`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AomrlConstants {
    pub p1: f64,
    /// Visit target per distinguishing pair.
    pub n: u64,
    pub h0: usize,
    pub h1: usize,
    pub h: usize,
    /// Identification threshold `alpha - lambda / 4`.
    pub delta: f64,
}

/// Cluster-then-learn agent with a known distinguishing set.
#[derive(Clone, Debug)]
pub struct AoMultiRl {
    name: String,
    config: AomrlConfig,
    constants: AomrlConstants,
    store: ClusterStore,
    explorer: Explorer,
    last_cluster: Option<usize>,
    failed_explorations: usize,
}

impl AoMultiRl {
    pub fn new(name: impl Into<String>, config: AomrlConfig) -> Result<Self> {
        let constants = config.constants()?;
        if constants.h1 == 0 {
            return Err(Error::Config(format!(
                "H = {} leaves no learning phase after H0 = {}",
                constants.h, constants.h0
            )));
        }
        Ok(Self::with_store(name, config, constants, ClusterStore::new()))
    }

    fn with_store(name: impl Into<String>, config: AomrlConfig, constants: AomrlConstants, store: ClusterStore) -> Self {
        let explorer = Explorer::new(&config.gamma, config.s, config.a, constants.n);
        AoMultiRl {
            name: name.into(),
            config,
            constants,
            store,
            explorer,
            last_cluster: None,
            failed_explorations: 0,
        }
    }

    pub fn constants(&self) -> &AomrlConstants {
        &self.constants
    }

    pub fn config(&self) -> &AomrlConfig {
        &self.config
    }

    pub fn store(&self) -> &ClusterStore {
        &self.store
    }

    pub fn failed_explorations(&self) -> usize {
        self.failed_explorations
    }

    fn diagnostics(&self, episode: &EmpiricalCounts, gamma: &StateActionSet, identified: usize) -> ClusteringDiagnostics {
        let n = self.config.s;
        let rows = |counts: &EmpiricalCounts| -> Vec<Vec<f64>> {
            gamma
                .iter()
                .map(|(s, a)| {
                    let mut row = vec![0.0; n];
                    counts.estimate_into(s, a, &mut row);
                    row
                })
                .collect()
        };
        ClusteringDiagnostics {
            gamma: gamma.as_slice().to_vec(),
            episode_rows: rows(episode),
            cluster_rows: self.store.iter().map(|c| rows(&c.model_counts)).collect(),
            threshold: self.constants.delta,
            lam: self.config.lam,
            identified,
        }
    }

    fn learning_counts(&self, cluster: usize) -> EmpiricalCounts {
        let c = self.store.get(cluster);
        if self.config.pooled_learning {
            c.pooled()
        } else {
            c.regret_counts.clone()
        }
    }
}

impl Agent for AoMultiRl {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let (ns, na) = (self.config.s, self.config.a);
        if env.num_states() != ns || env.num_actions() != na {
            return Err(Error::Shape(format!(
                "agent configured for S={ns}, A={na}; environment has S={}, A={}",
                env.num_states(),
                env.num_actions()
            )));
        }
        let mut batch = EmpiricalCounts::new(ns, na);
        self.explorer.reset();
        for _ in 0..self.constants.h0 {
            let s = env.state();
            let a = self.explorer.choose(s, &batch);
            let (_, next) = env.step(a);
            batch.record(s, a, next);
            self.explorer.observe(s, a, &batch);
        }
        let explored_ok = self.explorer.done();
        let gamma = if explored_ok {
            self.config.gamma.clone()
        } else {
            self.failed_explorations += 1;
            let sampled = self
                .config
                .gamma
                .iter()
                .filter(|(s, a)| batch.pair_count(*s, *a) > 0)
                .collect();
            StateActionSet::new(sampled, ns, na)?
        };
        let identified = identify_cluster(&batch, &gamma, &self.store, self.constants.delta)?;
        let diagnostics = self
            .config
            .record_diagnostics
            .then(|| self.diagnostics(&batch, &gamma, identified));
        let cluster = if identified == 0 {
            self.store.push(batch)
        } else {
            self.store.get_mut(identified - 1).model_counts.merge(&batch);
            identified - 1
        };
        self.last_cluster = Some(cluster);

        let h1 = self.constants.h1;
        if h1 > 0 {
            let log_constant = ucbvi_log_constant(
                LogVariant::MultiTask { models: self.config.m },
                ns,
                na,
                self.config.k,
                h1,
                self.constants.p1,
                self.config.log_factor,
            )?;
            let mut t = 0;
            while t < h1 {
                let remaining = h1 - t;
                let counts = self.learning_counts(cluster);
                let plan = ucbvi_plan(&counts, remaining, env.reward(), log_constant, self.config.bonus_scale, self.config.clip)?;
                let block = self.config.replan_interval.unwrap_or(h1).min(remaining);
                let regret = &mut self.store.get_mut(cluster).regret_counts;
                for h in 0..block {
                    let s = env.state();
                    let a = plan.policy.action(h, s);
                    let (_, next) = env.step(a);
                    regret.record(s, a, next);
                }
                t += block;
            }
        }
        Ok(EpisodeReport {
            cluster_id: Some(cluster),
            explored_ok: Some(explored_ok),
            diagnostics,
            ..EpisodeReport::default()
        })
    }

    fn evaluation_policy(&self, reward: &RewardTable, eval_horizon: usize) -> EvalPolicy {
        let Some(cluster) = self.last_cluster else {
            return EvalPolicy::UniformRandom;
        };
        let c = self.store.get(cluster);
        let counts = if self.config.exclude_clustering_samples {
            c.regret_counts.clone()
        } else {
            c.pooled()
        };
        EvalPolicy::Table(estimated_optimal_policy(&counts, reward, eval_horizon))
    }

    fn summary(&self) -> AgentSummary {
        AgentSummary {
            clusters: Some(self.store.len()),
            failed_explorations: Some(self.failed_explorations),
            ..AgentSummary::default()
        }
    }
}

/// For each pair of clusters, the first `(s, a)` in lexicographic order
/// whose estimates differ by more than `3 lam / 4`. Pairs unvisited in
/// either cluster are skipped.
pub fn extract_distinguishing_pairs(store: &ClusterStore, lam: f64) -> Result<StateActionSet> {
    let Some(first) = store.iter().next() else {
        return Err(Error::Clustering("no clusters to compare".into()));
    };
    let (ns, na) = (first.model_counts.num_states(), first.model_counts.num_actions());
    let mut found = StateActionSet::new(Vec::new(), ns, na)?;
    let mut pi = vec![0.0; ns];
    let mut pj = vec![0.0; ns];
    for i in 0..store.len() {
        for j in i + 1..store.len() {
            let (ci, cj) = (&store.get(i).model_counts, &store.get(j).model_counts);
            'pairs: for s in 0..ns {
                for a in 0..na {
                    if ci.pair_count(s, a) == 0 || cj.pair_count(s, a) == 0 {
                        continue;
                    }
                    ci.estimate_into(s, a, &mut pi);
                    cj.estimate_into(s, a, &mut pj);
                    if l1(&pi, &pj) > 0.75 * lam {
                        found.insert(s, a);
                        break 'pairs;
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Two-stage agent for an unknown distinguishing set. Stage 1 clusters
/// on every pair with `alpha = lam` until `M` clusters exist; stage 2
/// continues with the extracted set and `alpha = lam / 2`, keeping the
/// clusters built so far.
#[derive(Clone, Debug)]
pub struct UnknownGammaAgent {
    name: String,
    stage2_config: AomrlConfig,
    inner: AoMultiRl,
    stage: u8,
    stage1_episodes: usize,
    stage1_clusters: Option<usize>,
    discovered: Option<StateActionSet>,
}

impl UnknownGammaAgent {
    /// `config.gamma` is ignored. Stage 1 lasts `H0 + stage1_learning`
    /// steps per episode; stage 2 uses `config.h`.
    pub fn new(name: impl Into<String>, config: AomrlConfig, stage1_learning: usize) -> Result<Self> {
        if config.m < 2 {
            return Err(Error::Config(format!(
                "an unknown distinguishing set needs M >= 2 models, got {}",
                config.m
            )));
        }
        let mut stage1 = config.clone();
        stage1.gamma = StateActionSet::full(config.s, config.a);
        stage1.alpha = config.lam;
        stage1.h = HorizonSpec::Learning(stage1_learning);
        let mut stage2_config = config;
        stage2_config.alpha = stage2_config.lam / 2.0;
        let constants = stage1.constants()?;
        let name = name.into();
        Ok(UnknownGammaAgent {
            inner: AoMultiRl::with_store(name.clone(), stage1, constants, ClusterStore::new()),
            name,
            stage2_config,
            stage: 1,
            stage1_episodes: 0,
            stage1_clusters: None,
            discovered: None,
        })
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn stage1_episodes(&self) -> usize {
        self.stage1_episodes
    }

    pub fn discovered_gamma(&self) -> Option<&StateActionSet> {
        self.discovered.as_ref()
    }

    pub fn inner(&self) -> &AoMultiRl {
        &self.inner
    }

    fn enter_stage2(&mut self) -> Result<()> {
        let gamma = extract_distinguishing_pairs(&self.inner.store, self.stage2_config.lam)?;
        if gamma.is_empty() {
            return Err(Error::Clustering(format!(
                "stage 1 built {} clusters but no pair separates any two of them",
                self.inner.store.len()
            )));
        }
        let mut config = self.stage2_config.clone();
        config.gamma = gamma.clone();
        let constants = config.constants()?;
        if constants.h1 == 0 {
            return Err(Error::Config(format!(
                "H = {} leaves no learning phase after H0 = {}",
                constants.h, constants.h0
            )));
        }
        self.stage1_clusters = Some(self.inner.store.len());
        let store = std::mem::take(&mut self.inner.store);
        let last = self.inner.last_cluster;
        let failed = self.inner.failed_explorations;
        self.inner = AoMultiRl::with_store(self.name.clone(), config, constants, store);
        self.inner.last_cluster = last;
        self.inner.failed_explorations = failed;
        self.discovered = Some(gamma);
        self.stage = 2;
        Ok(())
    }
}

impl Agent for UnknownGammaAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_episode(&mut self, env: &mut EpisodeEnv<'_>) -> Result<EpisodeReport> {
        let report = self.inner.run_episode(env)?;
        if self.stage == 1 {
            self.stage1_episodes += 1;
            if self.inner.store.len() == self.stage2_config.m {
                self.enter_stage2()?;
            }
        }
        Ok(report)
    }

    fn evaluation_policy(&self, reward: &RewardTable, eval_horizon: usize) -> EvalPolicy {
        self.inner.evaluation_policy(reward, eval_horizon)
    }

    fn finish(&mut self) -> Result<()> {
        if self.stage == 1 {
            return Err(Error::Clustering(format!(
                "stage 1 ended with {} of {} clusters after {} episodes",
                self.inner.store.len(),
                self.stage2_config.m,
                self.stage1_episodes
            )));
        }
        Ok(())
    }

    fn summary(&self) -> AgentSummary {
        AgentSummary {
            discovered_gamma: self.discovered.as_ref().map(|g| g.as_slice().to_vec()),
            stage1_episodes: Some(self.stage1_episodes),
            stage1_clusters: self.stage1_clusters,
            ..self.inner.summary()
        }
    }
}
