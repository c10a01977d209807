use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mtrl_core::coin_lab::{sweep_sample_complexity, write_sweep_csv, Allocation, Classifier, CoinTrials};
use mtrl_core::harness::{
    emit_outputs, load_model_set, read_metrics_csv, run_experiment, save_model_set, write_plot_data, EnvironmentConfig,
    ExperimentConfig, RunRecord,
};
use mtrl_core::mdp::diameter;
use mtrl_core::separability::{greedy_distinguishing_set, is_distinguishing, separation_level};
use mtrl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mtrl", version, about = "Multi-task episodic RL under l1 model separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gridworld,
    Jao,
    TwoJao,
    NoncommTwoJao,
    Counterexample,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocationArg {
    UniformColumn1,
    UniformBoth,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    MleCol1,
    MleJoint,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model set as JSON.
    GenEnv {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        lambda: Option<f64>,
        /// Rows per side (2-JAO families).
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        diameter: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// JAO action count.
        #[arg(long)]
        num_actions: Option<usize>,
        /// JAO return probability.
        #[arg(long)]
        delta: Option<f64>,
        /// JAO best action per model.
        #[arg(long, value_delimiter = ',')]
        best_actions: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print separability analytics of a model set file.
    Inspect {
        file: PathBuf,
        /// Largest lambda the set satisfies.
        #[arg(long)]
        lambda: bool,
        /// Diameter of every model.
        #[arg(long)]
        diameter: bool,
        /// Greedy distinguishing set at this level.
        #[arg(long, value_name = "LAM")]
        distinguishing_set: Option<f64>,
    },
    /// Run an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use seeds 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        h0_override: Option<u64>,
        /// Output directory, replacing the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimal flip budgets for the coin table over a lambda grid.
    CoinLab {
        #[arg(long)]
        q: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_grid: Vec<f64>,
        #[arg(long, default_value_t = 0.9)]
        target: f64,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform-column1")]
        allocation: AllocationArg,
        #[arg(long, value_enum, default_value = "mle-col1")]
        classifier: ClassifierArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-agent mean APER by episode from a metrics CSV.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required for this family")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenEnv {
            family,
            lambda,
            q,
            diameter,
            horizon,
            num_actions,
            delta,
            best_actions,
            out,
        } => {
            let env = match family {
                Family::Gridworld => EnvironmentConfig::Gridworld,
                Family::Jao => EnvironmentConfig::Jao {
                    num_actions: need(num_actions, "num-actions")?,
                    delta: need(delta, "delta")?,
                    lambda: need(lambda, "lambda")?,
                    best_actions: if best_actions.is_empty() {
                        return Err(Error::Config("--best-actions is required for this family".into()));
                    } else {
                        best_actions
                    },
                },
                Family::TwoJao => EnvironmentConfig::TwoJao {
                    q: need(q, "q")?,
                    lambda: need(lambda, "lambda")?,
                    diameter: need(diameter, "diameter")?,
                    horizon: need(horizon, "horizon")?,
                },
                Family::NoncommTwoJao => EnvironmentConfig::NoncommTwoJao {
                    q: need(q, "q")?,
                    lambda: need(lambda, "lambda")?,
                    diameter: need(diameter, "diameter")?,
                    horizon: need(horizon, "horizon")?,
                },
                Family::Counterexample => EnvironmentConfig::Counterexample {
                    lambda: need(lambda, "lambda")?,
                },
            };
            let set = env.build()?;
            save_model_set(&set, &out)?;
            println!("wrote {} models ({} states, {} actions) to {}", set.len(), set.num_states(), set.num_actions(), out.display());
        }
        Command::Inspect {
            file,
            lambda,
            diameter: show_diameter,
            distinguishing_set,
        } => {
            let set = load_model_set(&file)?;
            println!("S = {}, A = {}, M = {}", set.num_states(), set.num_actions(), set.len());
            let labels: Vec<&str> = set.models().iter().map(|m| m.label()).collect();
            println!("labels: {}", labels.join(", "));
            if lambda {
                println!("separation level: {}", separation_level(&set)?);
            }
            if show_diameter {
                for m in set.models() {
                    match diameter(m) {
                        Ok(d) => println!("diameter {}: {d}", m.label()),
                        Err(e) => println!("diameter {}: {e}", m.label()),
                    }
                }
            }
            if let Some(lam) = distinguishing_set {
                let gamma = greedy_distinguishing_set(&set, lam)?;
                let pairs: Vec<String> = gamma.iter().map(|(s, a)| format!("({s},{a})")).collect();
                println!("distinguishing set at {lam}: {} pairs: {}", gamma.len(), pairs.join(" "));
                println!("covers every model pair: {}", is_distinguishing(&set, &gamma, lam));
            }
        }
        Command::Run {
            config,
            seeds,
            h0_override,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = seeds {
                cfg.set_seed_count(n);
            }
            if let Some(h0) = h0_override {
                cfg.override_h0(h0);
            }
            if out.is_some() {
                cfg.output = out;
            }
            let records = run_experiment(&cfg)?;
            print_summary(&records);
            if let Some(dir) = &cfg.output {
                let files = emit_outputs(&records, dir)?;
                println!("metrics: {}", files.metrics.display());
                println!("aggregate: {}", files.aggregate.display());
                println!("plot data: {}", files.plot_data.display());
            }
        }
        Command::CoinLab {
            q,
            lambda_grid,
            target,
            trials,
            seed,
            allocation,
            classifier,
            out,
        } => {
            let mut lab = CoinTrials::new(q, trials, seed);
            lab.allocation = match allocation {
                AllocationArg::UniformColumn1 => Allocation::UniformColumn1,
                AllocationArg::UniformBoth => Allocation::UniformBoth,
                AllocationArg::Adaptive => Allocation::Adaptive,
            };
            lab.classifier = match classifier {
                ClassifierArg::MleCol1 => Classifier::MleCol1,
                ClassifierArg::MleJoint => Classifier::MleJoint,
            };
            let (rows, slope) = sweep_sample_complexity(&lab, &lambda_grid, target)?;
            for row in &rows {
                println!("lambda {:<8} budget {:<10} success {:.3}", row.lambda, row.budget, row.success_rate);
            }
            if rows.len() >= 2 {
                println!("log-log slope: {slope:.3}");
            }
            write_sweep_csv(&rows, &out)?;
        }
        Command::PlotData { input, out } => {
            let rows = read_metrics_csv(&input)?;
            write_plot_data(&rows, &out)?;
        }
    }
    Ok(())
}

fn print_summary(records: &[RunRecord]) {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.run_id.as_str()) {
            names.push(&r.run_id);
        }
    }
    for name in names {
        let mine: Vec<&RunRecord> = records.iter().filter(|r| r.run_id == name).collect();
        let aper = mine.iter().map(|r| r.final_aper()).sum::<f64>() / mine.len() as f64;
        let accuracy: Vec<f64> = mine.iter().filter_map(|r| r.cluster_accuracy()).collect();
        let mut line = format!("{name:<24} final APER {aper:.4}");
        if !accuracy.is_empty() {
            let mean = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
            line.push_str(&format!("  cluster accuracy {mean:.3}"));
        }
        let checks: Vec<_> = mine.iter().filter_map(|r| r.good_event).collect();
        if !checks.is_empty() {
            let good: usize = checks.iter().map(|c| c.good_events).sum();
            let violations: usize = checks.iter().map(|c| c.violations).sum();
            line.push_str(&format!("  good-event episodes {good} (violations {violations})"));
        }
        println!("{line}");
        let mut sets: Vec<String> = mine
            .iter()
            .filter_map(|r| r.summary.discovered_gamma.as_ref())
            .map(|g| g.iter().map(|(s, a)| format!("({s},{a})")).collect::<Vec<_>>().join(" "))
            .collect();
        sets.sort();
        sets.dedup();
        for set in sets {
            println!("{:<24} discovered set {set}", "");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
