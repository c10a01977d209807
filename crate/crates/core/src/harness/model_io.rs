//! JSON documents for model sets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, RewardTable, TransitionKernel};
use crate::separability::{ModelSet, ModelSetMeta};

/// On-disk form: `kernels[m][s * A + a][s']`, `reward[s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSetDocument {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "M")]
    pub num_models: usize,
    pub reward: Vec<Vec<f64>>,
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitting_time: Option<f64>,
}

impl ModelSetDocument {
    pub fn from_set(set: &ModelSet) -> Self {
        let (ns, na) = (set.num_states(), set.num_actions());
        let reward = (0..ns)
            .map(|s| (0..na).map(|a| set.reward().get(s, a)).collect())
            .collect();
        ModelSetDocument {
            num_states: ns,
            num_actions: na,
            num_models: set.len(),
            reward,
            kernels: set
                .models()
                .iter()
                .map(|m| m.kernel().rows().map(|r| r.to_vec()).collect())
                .collect(),
            labels: set.models().iter().map(|m| m.label().to_string()).collect(),
            lambda: set.meta.lambda,
            diameter: set.meta.diameter,
            hitting_time: set.meta.hitting_time,
        }
    }

    pub fn into_set(self) -> Result<ModelSet> {
        let (ns, na) = (self.num_states, self.num_actions);
        if self.kernels.len() != self.num_models {
            return Err(Error::Shape(format!(
                "M = {} but {} kernels given",
                self.num_models,
                self.kernels.len()
            )));
        }
        if self.reward.len() != ns || self.reward.iter().any(|r| r.len() != na) {
            return Err(Error::Shape(format!("reward must be {ns} rows of {na} entries")));
        }
        let reward = RewardTable::new(ns, na, self.reward.concat())?;
        let mut models = Vec::with_capacity(self.num_models);
        for (i, rows) in self.kernels.iter().enumerate() {
            let kernel = TransitionKernel::from_rows(ns, na, rows)?;
            let label = self.labels.get(i).cloned().unwrap_or_else(|| format!("m{}", i + 1));
            models.push(MdpModel::new(kernel, reward.clone(), label)?);
        }
        Ok(ModelSet::new(models)?.with_meta(ModelSetMeta {
            lambda: self.lambda,
            diameter: self.diameter,
            hitting_time: self.hitting_time,
        }))
    }
}

pub fn save_model_set(set: &ModelSet, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelSetDocument::from_set(set)).expect("document serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model_set(path: &Path) -> Result<ModelSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelSetDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    doc.into_set()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{make_counterexample_pair, make_gridworld_set};

    #[test]
    fn round_trip_through_json() {
        let dir = tempfile::tempdir().unwrap();
        for set in [make_gridworld_set().unwrap(), make_counterexample_pair(0.5).unwrap()] {
            let path = dir.path().join("set.json");
            save_model_set(&set, &path).unwrap();
            assert_eq!(load_model_set(&path).unwrap(), set);
        }
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let set = make_counterexample_pair(0.5).unwrap();
        let mut doc = ModelSetDocument::from_set(&set);
        doc.kernels[0][0][0] += 0.1;
        assert!(doc.clone().into_set().is_err());
        doc.num_models = 3;
        assert!(doc.into_set().is_err());
    }
}
