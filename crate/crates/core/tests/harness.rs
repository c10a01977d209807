use mtrl_core::environments::{make_gridworld_set, GRIDWORLD_START};
use mtrl_core::harness::{
    aggregate, aper_series, cluster_correctness, compute_regret, emit_outputs, read_metrics_csv, run_experiment,
    write_metrics_csv, ExperimentConfig, MetricsRow,
};
use mtrl_core::harness::output::METRICS_HEADER;
use mtrl_core::mdp::optimal_value_and_policy;
use mtrl_core::Error;
use proptest::prelude::*;

const BASELINES: &str = r#"
[environment]
family = "gridworld"
[schedule]
kind = "paper"
episodes = 20
[[agents]]
kind = "optimal"
name = "optimal"
horizon = 100
[[agents]]
kind = "random"
name = "random"
horizon = 100
[[agents]]
kind = "one-episode-ucbvi"
name = "one"
horizon = 100
bonus_scale = 0.001
clip = "steps-left"
"#;

fn config(seeds: &[u64]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(BASELINES).unwrap();
    cfg.seeds = seeds.to_vec();
    cfg.eval_horizon = 60;
    cfg
}

#[test]
fn repeated_runs_are_identical() {
    assert_eq!(run_experiment(&config(&[0, 1])).unwrap(), run_experiment(&config(&[0, 1])).unwrap());
}

#[test]
fn seeds_do_not_influence_each_other() {
    let alone = run_experiment(&config(&[3])).unwrap();
    let crowd = run_experiment(&config(&[0, 1, 3, 7])).unwrap();
    let from_crowd: Vec<_> = crowd.into_iter().filter(|r| r.seed == 3).collect();
    assert_eq!(alone, from_crowd);
}

#[test]
fn optimal_agent_has_no_regret_and_beats_random() {
    let records = run_experiment(&config(&[0, 1, 2])).unwrap();
    let set = make_gridworld_set().unwrap();
    for r in records.iter().filter(|r| r.run_id == "optimal") {
        for row in &r.rows {
            assert!(row.regret.abs() < 1e-9 && !row.regret_is_proxy);
            let v = optimal_value_and_policy(set.model(row.model_true), 60).unwrap().0.get(0, GRIDWORLD_START);
            assert!((row.eval_return - v).abs() < 1e-12);
        }
    }
    let final_of = |name: &str| -> f64 {
        let mine: Vec<_> = records.iter().filter(|r| r.run_id == name).collect();
        mine.iter().map(|r| r.final_aper()).sum::<f64>() / mine.len() as f64
    };
    assert!(final_of("random") < final_of("optimal"));
    for r in records.iter().filter(|r| r.run_id == "random") {
        assert!(r.rows.iter().all(|x| x.regret_is_proxy));
    }
}

#[test]
fn absorbing_zero_reward_behaviour_has_regret_equal_to_the_optimal_value() {
    // action 0 keeps state 0 (reward 0); action 1 reaches the rewarding
    // absorbing state 1. With the literal clip and a large bonus every Q
    // saturates at H, so UCBVI always takes action 0.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trap.json");
    std::fs::write(
        &path,
        r#"{"S": 2, "A": 2, "M": 1, "reward": [[0, 0], [1, 1]],
            "kernels": [[[1, 0], [0, 1], [0, 1], [0, 1]]], "labels": ["trap"]}"#,
    )
    .unwrap();
    let text = format!(
        r#"
        seeds = [0]
        eval_horizon = 10
        [environment]
        family = "file"
        path = "{}"
        [schedule]
        kind = "uniform"
        episodes = 5
        [[agents]]
        kind = "ucbvi"
        name = "stuck"
        horizon = 12
        "#,
        path.display()
    );
    let records = run_experiment(&ExperimentConfig::from_toml(&text).unwrap()).unwrap();
    for row in &records[0].rows {
        assert_eq!(row.realized_return, 0.0);
        assert!(!row.regret_is_proxy);
        assert_eq!(row.regret, 11.0);
    }
}

#[test]
fn aggregates_have_one_row_per_episode() {
    let records = run_experiment(&config(&(0..10).collect::<Vec<_>>())).unwrap();
    let rows: Vec<MetricsRow> = records.iter().flat_map(|r| r.rows.clone()).collect();
    let agg = aggregate(&rows);
    assert_eq!(agg.iter().filter(|a| a.run_id == "one").count(), 20);
    assert!(agg.iter().all(|a| a.seeds == 10));
    for r in &records {
        let evals: Vec<f64> = r.rows.iter().map(|x| x.eval_return).collect();
        let aper = aper_series(&evals);
        assert!(r.rows.iter().zip(&aper).all(|(x, a)| (x.aper - a).abs() < 1e-12 && x.aper >= 0.0));
        let (per, cumulative) = compute_regret(&r.rows);
        assert_eq!(per.len(), 20);
        assert!((cumulative[19] - per.iter().sum::<f64>()).abs() < 1e-9);
    }
}

#[test]
fn csv_round_trip_and_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let records = run_experiment(&config(&[0, 1])).unwrap();
    let files = emit_outputs(&records, dir.path()).unwrap();
    let rows: Vec<MetricsRow> = records.iter().flat_map(|r| r.rows.clone()).collect();
    assert_eq!(read_metrics_csv(&files.metrics).unwrap(), rows);

    let empty = dir.path().join("empty");
    let files = emit_outputs(&[], &empty).unwrap();
    let text = std::fs::read_to_string(&files.metrics).unwrap();
    assert_eq!(text.trim_end(), METRICS_HEADER.join(","));
    assert!(read_metrics_csv(&files.metrics).unwrap().is_empty());

    let one = dir.path().join("one.csv");
    write_metrics_csv(&rows[..1], &one).unwrap();
    assert_eq!(read_metrics_csv(&one).unwrap(), rows[..1].to_vec());
}

#[test]
fn config_errors() {
    let err = ExperimentConfig::from_toml("bogus = 1\n").unwrap_err();
    assert!(!err.is_empty());
    let mut cfg = config(&[]);
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    cfg.seeds = vec![0];
    cfg.agents.push(cfg.agents[0].clone());
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    let missing = ExperimentConfig::load(std::path::Path::new("/nonexistent/config.toml")).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
    let no_budget = ExperimentConfig::from_toml(
        "[environment]\nfamily = \"gridworld\"\n[schedule]\nkind = \"paper\"\nepisodes = 3\n[[agents]]\nkind = \"random\"\nname = \"r\"\n",
    )
    .unwrap();
    assert!(matches!(run_experiment(&no_budget), Err(Error::Config(_))));
    let zero = ExperimentConfig::from_toml(
        "[environment]\nfamily = \"gridworld\"\n[schedule]\nkind = \"paper\"\nepisodes = 3\n[[agents]]\nkind = \"aomultirl\"\nname = \"a\"\nlearning_horizon = 10\nhitting_time = 7.0\nh0_override = 100\nreplan_interval = 0\n",
    )
    .unwrap();
    assert!(matches!(run_experiment(&zero), Err(Error::Config(_))));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.prepare().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}

/// Pairwise reference: an episode is correct when it shares a cluster
/// with exactly the episodes that share its model.
fn brute_force(clusters: &[usize], models: &[usize]) -> Vec<bool> {
    (0..clusters.len())
        .map(|k| (0..clusters.len()).all(|j| (clusters[j] == clusters[k]) == (models[j] == models[k])))
        .collect()
}

proptest! {
    #[test]
    fn cluster_correctness_matches_pairwise_check(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..40)) {
        let (mut clusters, models): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        // relabel clusters in first-appearance order, as the learner does
        let mut seen = Vec::new();
        for c in clusters.iter_mut() {
            let id = match seen.iter().position(|x| x == c) {
                Some(i) => i,
                None => {
                    seen.push(*c);
                    seen.len() - 1
                }
            };
            *c = id;
        }
        prop_assert_eq!(cluster_correctness(&clusters, &models), brute_force(&clusters, &models));
    }
}
