//! Per-episode metrics and the post-hoc checks run over them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentSummary, ClusteringDiagnostics};
use crate::separability::{l1, ModelSet};

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    /// 1-based.
    pub episode: usize,
    pub model_true: usize,
    pub cluster_id: Option<usize>,
    pub cluster_correct: Option<bool>,
    pub explored_ok: Option<bool>,
    pub realized_return: f64,
    pub eval_return: f64,
    pub regret: f64,
    pub regret_is_proxy: bool,
    pub aper: f64,
}

/// Per-episode values kept in memory but not written to CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeExtras {
    pub steps: usize,
    pub initial_state: usize,
    /// Optimal value over the steps actually taken.
    pub optimal_value: f64,
    pub optimistic_value: Option<f64>,
}

/// Outcome of checking identification against the good-event implication.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodEventCheck {
    /// Episodes with a snapshot.
    pub inspected: usize,
    /// Episodes where the good event held.
    pub good_events: usize,
    /// Good-event episodes whose identification was not the expected one.
    pub violations: usize,
}

/// All metrics of one agent on one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub extras: Vec<EpisodeExtras>,
    pub summary: AgentSummary,
    pub good_event: Option<GoodEventCheck>,
}

impl RunRecord {
    pub fn final_aper(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.aper)
    }

    /// Fraction of episodes whose cluster assignment is correct.
    pub fn cluster_accuracy(&self) -> Option<f64> {
        let flags: Vec<bool> = self.rows.iter().filter_map(|r| r.cluster_correct).collect();
        (!flags.is_empty()).then(|| flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
    }
}

/// Per-episode and cumulative regret of a record set for one run.
pub fn compute_regret(rows: &[MetricsRow]) -> (Vec<f64>, Vec<f64>) {
    let per: Vec<f64> = rows.iter().map(|r| r.regret).collect();
    let cumulative = per
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    (per, cumulative)
}

/// `APER(k) = sum_{i <= k} eval_i / k`.
pub fn aper_series(eval_returns: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    eval_returns
        .iter()
        .enumerate()
        .map(|(i, v)| {
            total += v;
            total / (i + 1) as f64
        })
        .collect()
}

/// An episode's assignment is correct when its cluster holds only
/// episodes of its model and its model's episodes all sit in that one
/// cluster.
pub fn cluster_correctness(clusters: &[usize], models: &[usize]) -> Vec<bool> {
    let num_clusters = clusters.iter().max().map_or(0, |c| c + 1);
    let num_models = models.iter().max().map_or(0, |m| m + 1);
    let mut models_in = vec![BTreeSet::new(); num_clusters];
    let mut clusters_of = vec![BTreeSet::new(); num_models];
    for (c, m) in clusters.iter().zip(models) {
        models_in[*c].insert(*m);
        clusters_of[*m].insert(*c);
    }
    clusters
        .iter()
        .zip(models)
        .map(|(c, m)| models_in[*c].len() == 1 && clusters_of[*m].len() == 1)
        .collect()
}

/// Which model a cluster's members came from, if they agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Membership {
    Pure(usize),
    Mixed,
}

/// Replays identification snapshots against the true kernels. Where the
/// episode's and every cluster's estimates are within `lam / 8` of the
/// truth at every snapshot pair, the identification must return the first
/// cluster built from the episode's model, or "new" when there is none.
///
/// `snapshots[k]` belongs to the episode with true model `models[k]` that
/// was assigned to `clusters[k]`.
pub fn check_good_event(
    set: &ModelSet,
    models: &[usize],
    clusters: &[usize],
    snapshots: &[Option<ClusteringDiagnostics>],
    explored: &[bool],
) -> GoodEventCheck {
    let mut check = GoodEventCheck::default();
    let mut membership: Vec<Membership> = Vec::new();
    for k in 0..models.len() {
        if let (Some(snap), true) = (&snapshots[k], explored[k]) {
            check.inspected += 1;
            let tol = snap.lam / 8.0;
            let model = set.model(models[k]);
            let close = |row: &[f64], truth: usize, s: usize, a: usize| l1(row, set.model(truth).kernel().row(s, a)) <= tol;
            let episode_ok = snap
                .gamma
                .iter()
                .zip(&snap.episode_rows)
                .all(|(&(s, a), row)| l1(row, model.kernel().row(s, a)) <= tol);
            let clusters_ok = snap.cluster_rows.iter().enumerate().all(|(c, rows)| match membership.get(c) {
                Some(Membership::Pure(m)) => snap.gamma.iter().zip(rows).all(|(&(s, a), row)| close(row, *m, s, a)),
                _ => false,
            });
            if episode_ok && clusters_ok {
                check.good_events += 1;
                let expected = membership
                    .iter()
                    .take(snap.cluster_rows.len())
                    .position(|m| *m == Membership::Pure(models[k]))
                    .map_or(0, |c| c + 1);
                if expected != snap.identified {
                    check.violations += 1;
                }
            }
        }
        let c = clusters[k];
        if c == membership.len() {
            membership.push(Membership::Pure(models[k]));
        } else if membership[c] != Membership::Pure(models[k]) {
            membership[c] = Membership::Mixed;
        }
    }
    check
}
