//! Cluster stores and cluster identification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::separability::{l1, EmpiricalCounts, StateActionSet};

/// Samples attributed to one (presumed) model: clustering-phase samples
/// in `model_counts`, learning-phase samples in `regret_counts`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub model_counts: EmpiricalCounts,
    pub regret_counts: EmpiricalCounts,
}

impl Cluster {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Cluster {
            model_counts: EmpiricalCounts::new(num_states, num_actions),
            regret_counts: EmpiricalCounts::new(num_states, num_actions),
        }
    }

    /// Both stores pooled.
    pub fn pooled(&self) -> EmpiricalCounts {
        let mut all = self.model_counts.clone();
        all.merge(&self.regret_counts);
        all
    }
}

/// Append-only list of clusters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStore {
    clusters: Vec<Cluster>,
}

impl ClusterStore {
    pub fn new() -> Self {
        ClusterStore::default()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, index: usize) -> &Cluster {
        &self.clusters[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Cluster {
        &mut self.clusters[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter()
    }

    /// Appends a cluster seeded with `model_counts`; returns its index.
    pub fn push(&mut self, model_counts: EmpiricalCounts) -> usize {
        let regret_counts = EmpiricalCounts::new(model_counts.num_states(), model_counts.num_actions());
        self.clusters.push(Cluster {
            model_counts,
            regret_counts,
        });
        self.clusters.len() - 1
    }
}

/// Returns the 1-based index of the first cluster whose estimate is within
/// `threshold` (l1) of the episode estimate at every pair of `gamma`, or 0
/// when no cluster qualifies.
///
/// Every pair in `gamma` must have at least one episode sample.
pub fn identify_cluster(
    episode_counts: &EmpiricalCounts,
    gamma: &StateActionSet,
    store: &ClusterStore,
    threshold: f64,
) -> Result<usize> {
    if let Some((state, action)) = gamma.iter().find(|(s, a)| episode_counts.pair_count(*s, *a) == 0) {
        return Err(Error::Undersampled { state, action });
    }
    let n = episode_counts.num_states();
    let episode_rows: Vec<Vec<f64>> = gamma
        .iter()
        .map(|(s, a)| {
            let mut row = vec![0.0; n];
            episode_counts.estimate_into(s, a, &mut row);
            row
        })
        .collect();
    let mut cluster_row = vec![0.0; n];
    for (c, cluster) in store.iter().enumerate() {
        let rejected = gamma.iter().zip(&episode_rows).any(|((s, a), episode_row)| {
            cluster.model_counts.estimate_into(s, a, &mut cluster_row);
            l1(&cluster_row, episode_row) > threshold
        });
        if !rejected {
            return Ok(c + 1);
        }
    }
    Ok(0)
}
