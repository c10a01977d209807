//! Sample-complexity lab: finding the biased row of a `Q x 2` coin table
//! on a fixed flip budget, and identifying a 2-JAO model by sampling its
//! separated side.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::SimRng;
use crate::environments::{make_coin_instance, CoinInstance};
use crate::error::{Error, Result};
use crate::separability::ModelSet;

/// How a flip budget is spread over the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// `floor(H / Q)` flips of every column-1 coin.
    UniformColumn1,
    /// `floor(H / 2Q)` flips of every coin.
    UniformBoth,
    /// Successive elimination on column 1.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipBudget {
    pub total: u64,
    pub allocation: Allocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    /// Most column-1 heads among the surviving rows; ties go to the
    /// smallest row.
    MleCol1,
    /// Largest sum of per-column z-scores against the fair means.
    MleJoint,
}

/// Head and flip counts per coin. Budget left unspent is burnt on a
/// dummy coin that is never recorded here.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipRecord {
    pub heads: Vec<[u64; 2]>,
    pub flips: Vec<[u64; 2]>,
    /// Rows still in contention; all of them unless elimination ran.
    pub active: Vec<bool>,
}

impl FlipRecord {
    fn new(q: usize) -> Self {
        FlipRecord {
            heads: vec![[0; 2]; q],
            flips: vec![[0; 2]; q],
            active: vec![true; q],
        }
    }

    fn flip<R: Rng + ?Sized>(&mut self, instance: &CoinInstance, row: usize, col: usize, times: u64, rng: &mut R) {
        let p = instance.means[row][col];
        let heads = (0..times).filter(|_| rng.gen_bool(p)).count() as u64;
        self.heads[row][col] += heads;
        self.flips[row][col] += times;
    }

    fn rate(&self, row: usize, col: usize) -> Option<f64> {
        let n = self.flips[row][col];
        (n > 0).then(|| self.heads[row][col] as f64 / n as f64)
    }
}

pub fn flip_coins<R: Rng + ?Sized>(instance: &CoinInstance, budget: FlipBudget, rng: &mut R) -> Result<FlipRecord> {
    if budget.total == 0 {
        return Err(Error::Domain("flip budget must be at least 1".into()));
    }
    let q = instance.q;
    let mut record = FlipRecord::new(q);
    match budget.allocation {
        Allocation::UniformColumn1 => {
            let per = budget.total / q as u64;
            for row in 0..q {
                record.flip(instance, row, 0, per, rng);
            }
        }
        Allocation::UniformBoth => {
            let per = budget.total / (2 * q) as u64;
            for row in 0..q {
                record.flip(instance, row, 0, per, rng);
                record.flip(instance, row, 1, per, rng);
            }
        }
        Allocation::Adaptive => {
            let mut left = budget.total;
            let mut round = 0u64;
            loop {
                let alive: Vec<usize> = (0..q).filter(|r| record.active[*r]).collect();
                if alive.len() <= 1 || (alive.len() as u64) > left {
                    break;
                }
                for &row in &alive {
                    record.flip(instance, row, 0, 1, rng);
                }
                left -= alive.len() as u64;
                round += 1;
                let radius = ((4.0 * q as f64 * (round * round) as f64 / 0.1).ln() / (2.0 * round as f64)).sqrt();
                let best = alive
                    .iter()
                    .map(|r| record.rate(*r, 0).unwrap_or(0.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                for &row in &alive {
                    if record.rate(row, 0).unwrap_or(0.0) + radius < best - radius {
                        record.active[row] = false;
                    }
                }
            }
        }
    }
    Ok(record)
}

pub fn classify(instance: &CoinInstance, record: &FlipRecord, classifier: Classifier) -> usize {
    let score = |row: usize| -> f64 {
        match classifier {
            Classifier::MleCol1 => record.heads[row][0] as f64,
            Classifier::MleJoint => {
                let fair = [0.5, instance.delta];
                (0..2)
                    .filter_map(|col| {
                        let n = record.flips[row][col] as f64;
                        record.rate(row, col).map(|r| (r - fair[col]) * n.sqrt() / (fair[col] * (1.0 - fair[col])).sqrt())
                    })
                    .sum()
            }
        }
    };
    let mut best = None;
    for row in (0..instance.q).filter(|r| record.active[*r]) {
        let s = score(row);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((row, s));
        }
    }
    best.map_or(0, |(row, _)| row)
}

/// Flips per the budget and returns the predicted special row.
pub fn run_coin_identification<R: Rng + ?Sized>(
    instance: &CoinInstance,
    budget: FlipBudget,
    classifier: Classifier,
    rng: &mut R,
) -> Result<usize> {
    let record = flip_coins(instance, budget, rng)?;
    Ok(classify(instance, &record, classifier))
}

fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Table shape and strategy shared by every trial of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinTrials {
    pub q: usize,
    pub delta: f64,
    pub allocation: Allocation,
    pub classifier: Classifier,
    pub trials: u64,
    pub seed: u64,
}

impl CoinTrials {
    pub fn new(q: usize, trials: u64, seed: u64) -> Self {
        CoinTrials {
            q,
            delta: 0.25,
            allocation: Allocation::UniformColumn1,
            classifier: Classifier::MleCol1,
            trials,
            seed,
        }
    }

    /// Fraction of trials that recover the special row. Trial `t` uses
    /// stream `t` of the seed whatever the budget, so nearby budgets see
    /// the same special rows.
    pub fn success_rate(&self, lam: f64, budget: u64) -> Result<f64> {
        let budget_spec = FlipBudget {
            total: budget,
            allocation: self.allocation,
        };
        let hits = (0..self.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(self.seed, t);
                let instance = make_coin_instance(self.q, lam, self.delta, budget, None, &mut rng)?;
                let guess = run_coin_identification(&instance, budget_spec, self.classifier, &mut rng)?;
                Ok(u64::from(guess == instance.theta))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<u64>();
        Ok(hits as f64 / self.trials as f64)
    }
}

/// One line of the sweep CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub q: usize,
    pub budget: u64,
    pub success_rate: f64,
    pub trials: u64,
    pub seed: u64,
}

const MAX_SWEEP_BUDGET: u64 = 1 << 40;

/// Smallest budget whose success rate reaches `target`, by doubling then
/// bisection.
pub fn minimal_budget(trials: &CoinTrials, lam: f64, target: f64) -> Result<SweepRow> {
    if !(target > 0.5 && target < 1.0) {
        return Err(Error::Domain(format!("target success {target} outside (1/2, 1)")));
    }
    if trials.trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let row = |budget: u64, success_rate: f64| SweepRow {
        lambda: lam,
        q: trials.q,
        budget,
        success_rate,
        trials: trials.trials,
        seed: trials.seed,
    };
    let first = trials.success_rate(lam, 1)?;
    if first >= target {
        return Ok(row(1, first));
    }
    let (mut lo, mut hi) = (1u64, trials.q.max(2) as u64);
    let mut hi_rate = trials.success_rate(lam, hi)?;
    while hi_rate < target {
        lo = hi;
        hi *= 2;
        if hi > MAX_SWEEP_BUDGET {
            return Err(Error::Domain(format!("no budget up to {MAX_SWEEP_BUDGET} reaches {target}")));
        }
        hi_rate = trials.success_rate(lam, hi)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let rate = trials.success_rate(lam, mid)?;
        if rate >= target {
            hi = mid;
            hi_rate = rate;
        } else {
            lo = mid;
        }
    }
    Ok(row(hi, hi_rate))
}

/// Minimal budgets over a grid of `lambda`, with the least-squares slope
/// of `ln budget` against `ln lambda`.
pub fn sweep_sample_complexity(trials: &CoinTrials, lam_grid: &[f64], target: f64) -> Result<(Vec<SweepRow>, f64)> {
    let rows = lam_grid
        .iter()
        .map(|lam| minimal_budget(trials, *lam, target))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda.ln(), (r.budget as f64).ln())).collect();
    Ok((rows, loglog_slope(&points)))
}

/// Least-squares slope; NaN with fewer than two distinct abscissae.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io)?;
    if rows.is_empty() {
        writer
            .write_record(["lambda", "q", "budget", "success_rate", "trials", "seed"])
            .map_err(io)?;
    }
    for row in rows {
        writer.serialize(row).map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// When 2-JAO identification stops: every row sampled `min_count` times
/// and the leading row's side-transition rate ahead of the runner-up by
/// `margin`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_count: u64,
    pub margin: f64,
    pub max_steps: u64,
}

impl StopRule {
    /// `ceil(8 / lam^2)` samples per row and a `lam / 4` margin.
    pub fn for_lambda(lam: f64) -> Self {
        StopRule {
            min_count: (8.0 / (lam * lam)).ceil() as u64,
            margin: lam / 4.0,
            max_steps: 1 << 34,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoJaoIdentification {
    /// Environment steps, including the walks back from the side state.
    pub steps: u64,
    /// Separated-side actions taken from the hub.
    pub left_samples: u64,
    /// `None` when `max_steps` ran out first.
    pub predicted: Option<usize>,
    pub correct: bool,
}

const HUB: usize = 0;
const SIDE: usize = 2;

/// Samples the separated side of model `model` of a 2-JAO set, rows in
/// round robin from the hub, until `rule` fires.
pub fn run_two_jao_identification<R: Rng + ?Sized>(
    set: &ModelSet,
    model: usize,
    rule: StopRule,
    rng: &mut R,
) -> Result<TwoJaoIdentification> {
    if set.num_states() != 3 || !set.num_actions().is_multiple_of(2) {
        return Err(Error::Shape("expected a 2-JAO model set".into()));
    }
    crate::error::check_index("model", model, set.len())?;
    let q = set.num_actions() / 2;
    if set.len() == 1 {
        return Ok(TwoJaoIdentification {
            steps: 0,
            left_samples: 0,
            predicted: Some(0),
            correct: true,
        });
    }
    let mdp = set.model(model);
    let mut heads = vec![0u64; q];
    let mut pulls = vec![0u64; q];
    let (mut steps, mut samples) = (0u64, 0u64);
    let mut state = HUB;
    let mut row = 0;
    while steps < rule.max_steps {
        if state != HUB {
            state = mdp.step(state, 0, rng);
            steps += 1;
            continue;
        }
        state = mdp.step(HUB, q + row, rng);
        steps += 1;
        samples += 1;
        pulls[row] += 1;
        heads[row] += u64::from(state == SIDE);
        row = (row + 1) % q;
        if row == 0 && pulls.iter().all(|n| *n >= rule.min_count) {
            if let Some(best) = separated_row(&heads, &pulls, rule.margin) {
                return Ok(TwoJaoIdentification {
                    steps,
                    left_samples: samples,
                    predicted: Some(best),
                    correct: best == model,
                });
            }
        }
    }
    Ok(TwoJaoIdentification {
        steps,
        left_samples: samples,
        predicted: None,
        correct: false,
    })
}

fn separated_row(heads: &[u64], pulls: &[u64], margin: f64) -> Option<usize> {
    let rates: Vec<f64> = heads.iter().zip(pulls).map(|(h, n)| *h as f64 / *n as f64).collect();
    let mut best = 0;
    for (i, r) in rates.iter().enumerate() {
        if *r > rates[best] {
            best = i;
        }
    }
    let runner_up = rates
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, r)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    (rates[best] - runner_up >= margin).then_some(best)
}

/// `trials` independent identifications; trial `t` targets model
/// `t mod M` on stream `t` of `seed`.
pub fn two_jao_trials(set: &ModelSet, rule: StopRule, trials: u64, seed: u64) -> Result<Vec<TwoJaoIdentification>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            run_two_jao_identification(set, (t % set.len() as u64) as usize, rule, &mut rng)
        })
        .collect()
}

/// Median of the step counts, averaging the middle pair.
pub fn median_steps(records: &[TwoJaoIdentification]) -> f64 {
    let mut steps: Vec<u64> = records.iter().map(|r| r.steps).collect();
    steps.sort_unstable();
    let n = steps.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        steps[n / 2] as f64
    } else {
        (steps[n / 2 - 1] + steps[n / 2]) as f64 / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::make_two_jao_set;

    fn instance(q: usize, lam: f64, theta: usize) -> CoinInstance {
        make_coin_instance(q, lam, 0.25, 1000, Some(theta), &mut SimRng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn single_row_is_always_found() {
        let inst = instance(1, 0.2, 0);
        let mut rng = SimRng::seed_from_u64(4);
        for allocation in [Allocation::UniformColumn1, Allocation::UniformBoth, Allocation::Adaptive] {
            for classifier in [Classifier::MleCol1, Classifier::MleJoint] {
                let budget = FlipBudget { total: 3, allocation };
                assert_eq!(run_coin_identification(&inst, budget, classifier, &mut rng).unwrap(), 0);
            }
        }
    }

    #[test]
    fn ties_go_to_the_smallest_row() {
        let inst = instance(4, 0.2, 2);
        let mut record = FlipRecord::new(4);
        for row in 0..4 {
            record.flips[row] = [5, 0];
            record.heads[row] = [if row == 1 || row == 3 { 4 } else { 1 }, 0];
        }
        assert_eq!(classify(&inst, &record, Classifier::MleCol1), 1);
    }

    #[test]
    fn uniform_allocation_spends_whole_rows_only() {
        let inst = instance(5, 0.2, 0);
        let rec = flip_coins(
            &inst,
            FlipBudget {
                total: 23,
                allocation: Allocation::UniformColumn1,
            },
            &mut SimRng::seed_from_u64(1),
        )
        .unwrap();
        assert!(rec.flips.iter().all(|f| *f == [4, 0]));
        let rec = flip_coins(
            &inst,
            FlipBudget {
                total: 23,
                allocation: Allocation::UniformBoth,
            },
            &mut SimRng::seed_from_u64(1),
        )
        .unwrap();
        assert!(rec.flips.iter().all(|f| *f == [2, 2]));
    }

    #[test]
    fn adaptive_never_overspends() {
        let inst = instance(6, 0.3, 4);
        for total in [1, 7, 50, 3000] {
            let rec = flip_coins(
                &inst,
                FlipBudget {
                    total,
                    allocation: Allocation::Adaptive,
                },
                &mut SimRng::seed_from_u64(total),
            )
            .unwrap();
            let spent: u64 = rec.flips.iter().map(|f| f[0] + f[1]).sum();
            assert!(spent <= total);
        }
    }

    #[test]
    fn easy_target_needs_one_flip() {
        let trials = CoinTrials::new(1, 50, 9);
        let row = minimal_budget(&trials, 0.2, 0.51).unwrap();
        assert_eq!(row.budget, 1);
        assert_eq!(row.success_rate, 1.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.2, 0.4].iter().map(|l| (l.ln(), (3.0 / (l * l)).ln())).collect();
        assert!((loglog_slope(&pts) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_model_needs_no_samples() {
        let set = make_two_jao_set(1, 0.5, 20.0, 1000.0).unwrap();
        let rec = run_two_jao_identification(&set, 0, StopRule::for_lambda(0.5), &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!((rec.steps, rec.left_samples, rec.predicted), (0, 0, Some(0)));
    }

    #[test]
    fn two_jao_identification_finds_the_model() {
        let set = make_two_jao_set(4, 0.6, 20.0, 10_000.0).unwrap();
        let recs = two_jao_trials(&set, StopRule::for_lambda(0.6), 40, 3).unwrap();
        let correct = recs.iter().filter(|r| r.correct).count();
        assert!(correct >= 36, "{correct}/40");
        assert!(recs.iter().all(|r| r.left_samples >= 4 * StopRule::for_lambda(0.6).min_count));
    }
}
