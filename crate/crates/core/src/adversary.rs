//! Task schedules: which model and initial state the adversary hands the
//! learner in each episode.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One episode's task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub model: usize,
    pub initial_state: usize,
}

/// Fixed, precomputed sequence of assignments.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSchedule {
    assignments: Vec<TaskAssignment>,
}

impl TaskSchedule {
    pub fn episodes(&self) -> usize {
        self.assignments.len()
    }

    /// Assignment of 0-based episode `k`.
    pub fn get(&self, k: usize) -> TaskAssignment {
        self.assignments[k]
    }

    pub fn assignments(&self) -> &[TaskAssignment] {
        &self.assignments
    }

    /// Checks every index against a model set of `m` models and `s` states.
    pub fn validate(&self, m: usize, s: usize) -> Result<()> {
        for (k, t) in self.assignments.iter().enumerate() {
            if t.model >= m || t.initial_state >= s {
                return Err(Error::Domain(format!(
                    "episode {k}: model {} / state {} out of range (M={m}, S={s})",
                    t.model, t.initial_state
                )));
            }
        }
        Ok(())
    }

    /// Concatenates two schedules.
    pub fn then(mut self, tail: TaskSchedule) -> TaskSchedule {
        self.assignments.extend(tail.assignments);
        self
    }

    /// `model_index,initial_state` per line, 0-based.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.assignments {
            let _ = writeln!(out, "{},{}", t.model, t.initial_state);
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<TaskSchedule, String> {
        let mut assignments = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (m, s) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected 'model,state'", i + 1))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("line {}: {e}", i + 1))
            };
            assignments.push(TaskAssignment {
                model: parse(m)?,
                initial_state: parse(s)?,
            });
        }
        Ok(TaskSchedule { assignments })
    }

    pub fn load(path: &Path) -> Result<TaskSchedule> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TaskSchedule::parse(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// Each episode draws a model uniformly from `models`; fixed start state.
pub fn uniform_schedule<R: Rng + ?Sized>(models: &[usize], k: usize, start: usize, rng: &mut R) -> Result<TaskSchedule> {
    if models.is_empty() {
        return Err(Error::Domain("uniform schedule needs a non-empty model subset".into()));
    }
    let assignments = (0..k)
        .map(|_| TaskAssignment {
            model: models[rng.gen_range(0..models.len())],
            initial_state: start,
        })
        .collect();
    Ok(TaskSchedule { assignments })
}

/// 1-based inclusive windows in which only the fourth model appears.
pub const PAPER_M4_WINDOWS: [(usize, usize); 2] = [(100, 150), (180, 200)];

/// Episodes in the two windows use model index 3; all others draw
/// uniformly from models 0..3. Start state is `start`.
pub fn paper_schedule<R: Rng + ?Sized>(k: usize, start: usize, rng: &mut R) -> TaskSchedule {
    let assignments = (1..=k)
        .map(|episode| {
            let in_window = PAPER_M4_WINDOWS
                .iter()
                .any(|(lo, hi)| (*lo..=*hi).contains(&episode));
            let model = if in_window { 3 } else { rng.gen_range(0..3) };
            TaskAssignment {
                model,
                initial_state: start,
            }
        })
        .collect();
    TaskSchedule { assignments }
}

/// Models `0..m` once each, in order, followed by `tail`.
pub fn all_models_first_schedule(m: usize, start: usize, tail: TaskSchedule) -> TaskSchedule {
    let head = TaskSchedule {
        assignments: (0..m)
            .map(|model| TaskAssignment {
                model,
                initial_state: start,
            })
            .collect(),
    };
    head.then(tail)
}

/// Replays a list of `(model, initial_state)` pairs.
pub fn fixed_schedule_from_list(list: &[(usize, usize)], m: usize, s: usize) -> Result<TaskSchedule> {
    let schedule = TaskSchedule {
        assignments: list
            .iter()
            .map(|&(model, initial_state)| TaskAssignment { model, initial_state })
            .collect(),
    };
    schedule.validate(m, s)?;
    Ok(schedule)
}
