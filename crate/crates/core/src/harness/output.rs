//! CSV persistence: per-seed metrics, cross-seed aggregates and the
//! per-agent APER table used for plotting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::metrics::{MetricsRow, RunRecord};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `rows` with a header, even when there are none.
pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    writer.write_record(METRICS_HEADER).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub const METRICS_HEADER: [&str; 12] = [
    "run_id",
    "seed",
    "episode",
    "model_true",
    "cluster_id",
    "cluster_correct",
    "explored_ok",
    "realized_return",
    "eval_return",
    "regret",
    "regret_is_proxy",
    "aper",
];

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// Mean and sample standard deviation across seeds for one agent and
/// episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub run_id: String,
    pub episode: usize,
    pub seeds: usize,
    pub realized_return_mean: f64,
    pub realized_return_std: f64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub aper_mean: f64,
    pub aper_std: f64,
    pub cluster_correct_rate: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Agents in first-appearance order.
fn run_ids(rows: &[MetricsRow]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for row in rows {
        if !ids.contains(&row.run_id) {
            ids.push(row.run_id.clone());
        }
    }
    ids
}

pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for id in run_ids(rows) {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.run_id == id).collect();
        let max_episode = mine.iter().map(|r| r.episode).max().unwrap_or(0);
        for episode in 1..=max_episode {
            let at: Vec<&&MetricsRow> = mine.iter().filter(|r| r.episode == episode).collect();
            if at.is_empty() {
                continue;
            }
            let col = |f: fn(&MetricsRow) -> f64| -> (f64, f64) {
                mean_std(&at.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (realized_return_mean, realized_return_std) = col(|r| r.realized_return);
            let (eval_return_mean, eval_return_std) = col(|r| r.eval_return);
            let (regret_mean, regret_std) = col(|r| r.regret);
            let (aper_mean, aper_std) = col(|r| r.aper);
            let flags: Vec<bool> = at.iter().filter_map(|r| r.cluster_correct).collect();
            out.push(AggregateRow {
                run_id: id.clone(),
                episode,
                seeds: at.len(),
                realized_return_mean,
                realized_return_std,
                eval_return_mean,
                eval_return_std,
                regret_mean,
                regret_std,
                aper_mean,
                aper_std,
                cluster_correct_rate: (!flags.is_empty())
                    .then(|| flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64),
            });
        }
    }
    out
}

/// `episode` followed by one mean-APER column per agent.
pub fn write_plot_data(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let ids = run_ids(rows);
    let agg = aggregate(rows);
    let max_episode = agg.iter().map(|r| r.episode).max().unwrap_or(0);
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["episode".to_string()];
    header.extend(ids.iter().cloned());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for episode in 1..=max_episode {
        let mut record = vec![episode.to_string()];
        for id in &ids {
            let cell = agg
                .iter()
                .find(|r| &r.run_id == id && r.episode == episode)
                .map_or(String::new(), |r| r.aper_mean.to_string());
            record.push(cell);
        }
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Files written by [`emit_outputs`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFiles {
    pub metrics: PathBuf,
    pub per_seed: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub plot_data: PathBuf,
}

/// Writes `metrics.csv` (all rows), `seed_<n>.csv` per seed,
/// `aggregate.csv` and `plot_data.csv` into `dir`.
pub fn emit_outputs(records: &[RunRecord], dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let all: Vec<MetricsRow> = records.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let metrics = dir.join("metrics.csv");
    write_metrics_csv(&all, &metrics)?;
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut per_seed = Vec::new();
    for seed in seeds {
        let rows: Vec<MetricsRow> = all.iter().filter(|r| r.seed == seed).cloned().collect();
        let path = dir.join(format!("seed_{seed}.csv"));
        write_metrics_csv(&rows, &path)?;
        per_seed.push(path);
    }
    let aggregate_path = dir.join("aggregate.csv");
    let mut writer = csv::Writer::from_path(&aggregate_path).map_err(|e| csv_error(&aggregate_path, e))?;
    let agg = aggregate(&all);
    if agg.is_empty() {
        writer
            .write_record([
                "run_id",
                "episode",
                "seeds",
                "realized_return_mean",
                "realized_return_std",
                "eval_return_mean",
                "eval_return_std",
                "regret_mean",
                "regret_std",
                "aper_mean",
                "aper_std",
                "cluster_correct_rate",
            ])
            .map_err(|e| csv_error(&aggregate_path, e))?;
    }
    for row in agg {
        writer.serialize(row).map_err(|e| csv_error(&aggregate_path, e))?;
    }
    writer.flush().map_err(|e| Error::io(&aggregate_path, e))?;
    let plot_data = dir.join("plot_data.csv");
    write_plot_data(&all, &plot_data)?;
    Ok(OutputFiles {
        metrics,
        per_seed,
        aggregate: aggregate_path,
        plot_data,
    })
}
