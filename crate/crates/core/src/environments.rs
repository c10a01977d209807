//! Instance generators: the four-corner gridworld family, JAO and 2-JAO
//! chains, the non-communicating 2-JAO variant, the trajectory-equivalent
//! counterexample pair and the `Q x 2` coin table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::mdp::{MdpModel, RewardTable, TransitionKernel};
use crate::separability::{ModelSet, ModelSetMeta};

/// Gridworld action indices.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;
pub const GRID_ACTIONS: usize = 4;

const MOVES: [(isize, isize); GRID_ACTIONS] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// Separation level reported for the four-corner gridworld set.
pub const GRIDWORLD_LAMBDA: f64 = 1.2999;
/// Hitting-time constant used with the gridworld set.
pub const GRIDWORLD_HITTING_TIME: f64 = 7.0;
/// Start cell (1, 1).
pub const GRIDWORLD_START: usize = 5;

/// Transition parameters of the corner gridworld.
///
/// States are numbered row-major (`state = cols * row + col`), actions are
/// [`LEFT`], [`RIGHT`], [`UP`], [`DOWN`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub rows: usize,
    pub cols: usize,
    pub success_prob: f64,
    /// Success of a move into a hard corner.
    pub reduced_success: f64,
    /// Success of a move into the bottom-right corner when it is hard.
    pub reduced_success_far: f64,
    pub corner_stay: f64,
    pub corner_opposite: f64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        GridworldSpec {
            rows: 4,
            cols: 4,
            success_prob: 0.85,
            reduced_success: 0.2,
            reduced_success_far: 0.3,
            corner_stay: 0.7,
            corner_opposite: 0.3,
        }
    }
}

impl GridworldSpec {
    pub fn num_states(&self) -> usize {
        self.rows * self.cols
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        self.cols * row + col
    }

    /// Corners in model order: top-left, top-right, bottom-left, bottom-right.
    pub fn corners(&self) -> [(usize, usize); 4] {
        let (r, c) = (self.rows - 1, self.cols - 1);
        [(0, 0), (0, c), (r, 0), (r, c)]
    }

    fn inside(&self, r: isize, c: isize) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.rows && (c as usize) < self.cols
    }

    fn neighbours(&self, r: usize, c: usize) -> Vec<(usize, usize)> {
        MOVES
            .iter()
            .map(|(dr, dc)| (r as isize + dr, c as isize + dc))
            .filter(|(nr, nc)| self.inside(*nr, *nc))
            .map(|(nr, nc)| (nr as usize, nc as usize))
            .collect()
    }

    /// Successor distribution of `action` at `(r, c)` when `easy` is the
    /// easy-to-reach corner.
    fn outcome(&self, r: usize, c: usize, action: usize, easy: (usize, usize)) -> Vec<((usize, usize), f64)> {
        let corners = self.corners();
        let (dr, dc) = MOVES[action];
        let (tr, tc) = (r as isize + dr, c as isize + dc);
        let neighbours = self.neighbours(r, c);
        if !self.inside(tr, tc) {
            if corners.contains(&(r, c)) {
                let back = ((r as isize - dr) as usize, (c as isize - dc) as usize);
                return vec![((r, c), self.corner_stay), (back, self.corner_opposite)];
            }
            let share = 1.0 / neighbours.len() as f64;
            return neighbours.into_iter().map(|n| (n, share)).collect();
        }
        let target = (tr as usize, tc as usize);
        let success = if corners.contains(&target) && target != easy {
            if target == corners[3] {
                self.reduced_success_far
            } else {
                self.reduced_success
            }
        } else {
            self.success_prob
        };
        let others: Vec<_> = neighbours.into_iter().filter(|n| *n != target).collect();
        let mut out = vec![(target, success)];
        if others.is_empty() {
            out[0].1 = 1.0;
        } else {
            let share = (1.0 - success) / others.len() as f64;
            out.extend(others.into_iter().map(|n| (n, share)));
        }
        out
    }

    /// Model whose easy corner is `corners()[easy_corner]`.
    pub fn model(&self, easy_corner: usize) -> Result<MdpModel> {
        check_index("corner", easy_corner, 4)?;
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::Domain("gridworld needs at least 2 rows and 2 columns".into()));
        }
        let easy = self.corners()[easy_corner];
        let n = self.num_states();
        let mut probs = vec![0.0; n * GRID_ACTIONS * n];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let s = self.state(r, c);
                for a in 0..GRID_ACTIONS {
                    for ((nr, nc), p) in self.outcome(r, c, a, easy) {
                        probs[(s * GRID_ACTIONS + a) * n + self.state(nr, nc)] += p;
                    }
                }
            }
        }
        let kernel = TransitionKernel::normalized(n, GRID_ACTIONS, probs)?;
        let corners = self.corners();
        let state_rewards: Vec<f64> = (0..n)
            .map(|s| {
                if corners.contains(&(s / self.cols, s % self.cols)) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let reward = RewardTable::from_state_rewards(GRID_ACTIONS, &state_rewards)?;
        MdpModel::new(kernel, reward, format!("m{}", easy_corner + 1))
    }

    /// The four models, one per easy corner.
    pub fn model_set(&self) -> Result<ModelSet> {
        let models = (0..4).map(|i| self.model(i)).collect::<Result<Vec<_>>>()?;
        ModelSet::new(models)
    }
}

/// The 4x4 four-corner gridworld set `m1..m4`.
pub fn make_gridworld_set() -> Result<ModelSet> {
    Ok(GridworldSpec::default().model_set()?.with_meta(ModelSetMeta {
        lambda: Some(GRIDWORLD_LAMBDA),
        diameter: None,
        hitting_time: Some(GRIDWORLD_HITTING_TIME),
    }))
}

/// Two-state JAO chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaoSpec {
    pub num_actions: usize,
    pub delta: f64,
    pub lam: f64,
    pub best_action: usize,
}

impl JaoSpec {
    /// `delta = 4 / d`.
    pub fn with_diameter(num_actions: usize, d: f64, lam: f64, best_action: usize) -> Self {
        JaoSpec {
            num_actions,
            delta: 4.0 / d,
            lam,
            best_action,
        }
    }

    /// Average reward of the optimal policy.
    pub fn optimal_gain(&self) -> f64 {
        (self.delta + self.lam / 2.0) / (2.0 * self.delta + self.lam / 2.0)
    }

    /// Closed-form `V_1^*(0)` over `horizon` steps.
    pub fn closed_form_value(&self, horizon: usize) -> f64 {
        let rate = 2.0 * self.delta + self.lam / 2.0;
        let rho = self.optimal_gain();
        rho * horizon as f64 - rho * (1.0 - (1.0 - rate).powi(horizon as i32)) / rate
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Probability(format!("{name} = {p} is not a probability")))
    }
}

pub fn make_jao(spec: &JaoSpec) -> Result<MdpModel> {
    if !(spec.delta > 0.0 && spec.delta < 1.0) {
        return Err(Error::Domain(format!("delta = {} outside (0, 1)", spec.delta)));
    }
    if spec.lam < 0.0 {
        return Err(Error::Domain(format!("lambda = {} is negative", spec.lam)));
    }
    probability("delta + lambda/2", spec.delta + spec.lam / 2.0)?;
    check_index("best action", spec.best_action, spec.num_actions)?;
    let na = spec.num_actions;
    let mut probs = vec![0.0; 2 * na * 2];
    for a in 0..na {
        let up = if a == spec.best_action {
            spec.delta + spec.lam / 2.0
        } else {
            spec.delta
        };
        probs[a * 2] = 1.0 - up;
        probs[a * 2 + 1] = up;
        probs[(na + a) * 2] = spec.delta;
        probs[(na + a) * 2 + 1] = 1.0 - spec.delta;
    }
    let kernel = TransitionKernel::normalized(2, na, probs)?;
    let reward = RewardTable::from_state_rewards(na, &[0.0, 1.0])?;
    MdpModel::new(kernel, reward, format!("jao-best{}", spec.best_action))
}

/// One JAO model per listed best action.
pub fn make_jao_set(num_actions: usize, delta: f64, lam: f64, best_actions: &[usize]) -> Result<ModelSet> {
    let models = best_actions
        .iter()
        .map(|&best_action| {
            make_jao(&JaoSpec {
                num_actions,
                delta,
                lam,
                best_action,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelSet::new(models)?.with_meta(ModelSetMeta {
        lambda: Some(lam),
        diameter: Some(1.0 / delta),
        hitting_time: None,
    }))
}

/// Three-state 2-JAO chain: hub `0`, rewarding state `1`, side state `2`.
///
/// Actions `0..Q` act on the rewarding side (hub to `1`), actions `Q..2Q`
/// on the separated side (hub to `2`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoJaoSpec {
    pub actions_per_side: usize,
    pub delta: f64,
    pub lam: f64,
    pub capital_delta: f64,
    pub best_row: usize,
}

impl TwoJaoSpec {
    pub fn num_actions(&self) -> usize {
        2 * self.actions_per_side
    }

    /// Action index of row `i` on the separated side.
    pub fn left_action(&self, row: usize) -> usize {
        self.actions_per_side + row
    }

    fn validate(&self) -> Result<()> {
        if self.actions_per_side == 0 {
            return Err(Error::Domain("2-JAO needs at least one action per side".into()));
        }
        check_index("best row", self.best_row, self.actions_per_side)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if self.lam < 0.0 || self.capital_delta < 0.0 {
            return Err(Error::Domain("lambda and Delta must be non-negative".into()));
        }
        probability("delta + Delta", self.delta + self.capital_delta)?;
        probability("1/2 + lambda/2", 0.5 + self.lam / 2.0)
    }
}

const HUB: usize = 0;
const REWARDING: usize = 1;
const SIDE: usize = 2;

fn two_jao_kernel(spec: &TwoJaoSpec, communicating: bool) -> Result<TransitionKernel> {
    spec.validate()?;
    let q = spec.actions_per_side;
    let na = spec.num_actions();
    let mut probs = vec![0.0; 3 * na * 3];
    let mut set = |s: usize, a: usize, next: usize, p: f64| probs[(s * na + a) * 3 + next] += p;
    for row in 0..q {
        let right = row;
        let left = q + row;
        let up = spec.delta + if row == spec.best_row { spec.capital_delta } else { 0.0 };
        let coin = 0.5 + if row == spec.best_row { spec.lam / 2.0 } else { 0.0 };
        set(HUB, right, REWARDING, up);
        set(HUB, right, HUB, 1.0 - up);
        if communicating {
            set(HUB, left, SIDE, coin);
            set(HUB, left, HUB, 1.0 - coin);
            set(SIDE, right, HUB, spec.delta);
            set(SIDE, right, SIDE, 1.0 - spec.delta);
            set(SIDE, left, HUB, spec.delta);
            set(SIDE, left, SIDE, 1.0 - spec.delta);
        } else {
            // the separated side only flows into the hub
            set(HUB, left, HUB, 1.0);
            set(SIDE, left, HUB, coin);
            set(SIDE, left, SIDE, 1.0 - coin);
            set(SIDE, right, SIDE, 1.0);
        }
    }
    for a in 0..na {
        set(REWARDING, a, HUB, spec.delta);
        set(REWARDING, a, REWARDING, 1.0 - spec.delta);
    }
    TransitionKernel::normalized(3, na, probs)
}

pub fn make_two_jao(spec: &TwoJaoSpec) -> Result<MdpModel> {
    let kernel = two_jao_kernel(spec, true)?;
    let reward = RewardTable::from_state_rewards(spec.num_actions(), &[0.0, 1.0, 0.0])?;
    MdpModel::new(kernel, reward, format!("two-jao-row{}", spec.best_row))
}

/// Rewarding-side gap `(1/20) sqrt(SA / (3 H D))` with `SA = 12 Q`.
pub fn two_jao_capital_delta(q: usize, d: f64, horizon: f64) -> f64 {
    let sa = 12.0 * q as f64;
    (sa / (3.0 * horizon * d)).sqrt() / 20.0
}

/// `Q` 2-JAO models with `delta = 4 / d`; model `i` has best row `i`.
pub fn make_two_jao_set(q: usize, lam: f64, d: f64, horizon: f64) -> Result<ModelSet> {
    if !(d > 0.0 && horizon > 0.0) {
        return Err(Error::Domain("D and H must be positive".into()));
    }
    let capital_delta = two_jao_capital_delta(q, d, horizon);
    let models = (0..q)
        .map(|best_row| {
            make_two_jao(&TwoJaoSpec {
                actions_per_side: q,
                delta: 4.0 / d,
                lam,
                capital_delta,
                best_row,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelSet::new(models)?.with_meta(ModelSetMeta {
        lambda: Some(lam),
        diameter: None,
        hitting_time: None,
    }))
}

/// 2-JAO variant where the separated side can only be left, never entered.
pub fn make_noncommunicating_two_jao(spec: &TwoJaoSpec) -> Result<MdpModel> {
    let kernel = two_jao_kernel(spec, false)?;
    let reward = RewardTable::from_state_rewards(spec.num_actions(), &[0.0, 1.0, 0.0])?;
    MdpModel::new(kernel, reward, format!("noncomm-two-jao-row{}", spec.best_row))
}

pub fn make_noncommunicating_two_jao_set(q: usize, lam: f64, d: f64, horizon: f64) -> Result<ModelSet> {
    let capital_delta = two_jao_capital_delta(q, d, horizon);
    let models = (0..q)
        .map(|best_row| {
            make_noncommunicating_two_jao(&TwoJaoSpec {
                actions_per_side: q,
                delta: 4.0 / d,
                lam,
                capital_delta,
                best_row,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelSet::new(models)
}

/// Two 3-state, 2-action models identical except at `(s^1, a^1)`, where
/// the successor split over `(s^2, s^3)` is `(lam, 1 - lam)` versus
/// `(lam/2, 1 - lam/2)`.
///
/// States `0, 1, 2` stand for `s^1, s^2, s^3`; actions `0, 1` for `a^1, a^2`.
/// Elsewhere: `a^2` at `s^1` moves to `s^2`; from `s^2` and `s^3`, `a^1`
/// moves to the other of the two and `a^2` returns to `s^1`. Reward 1 at `s^3`.
pub fn make_counterexample_pair(lam: f64) -> Result<ModelSet> {
    if !(lam > 0.0 && lam < 1.0) {
        return Err(Error::Domain(format!("lambda = {lam} outside (0, 1)")));
    }
    let build = |split: f64, label: &str| -> Result<MdpModel> {
        let rows = vec![
            vec![0.0, split, 1.0 - split],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ];
        let kernel = TransitionKernel::from_rows(3, 2, &rows)?;
        let reward = RewardTable::from_state_rewards(2, &[0.0, 0.0, 1.0])?;
        MdpModel::new(kernel, reward, label)
    };
    let set = ModelSet::new(vec![build(lam, "m1")?, build(lam / 2.0, "m2")?])?;
    Ok(set.with_meta(ModelSetMeta {
        lambda: Some(lam),
        diameter: None,
        hitting_time: None,
    }))
}

/// `Q x 2` coin table with one special row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinInstance {
    pub q: usize,
    pub lam: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: usize,
    /// `means[row] = [column 1, column 2]` head probabilities.
    pub means: Vec<[f64; 2]>,
}

/// `epsilon = (1/20) sqrt(Q delta / H)`.
pub fn coin_epsilon(q: usize, delta: f64, budget: u64) -> f64 {
    (q as f64 * delta / budget as f64).sqrt() / 20.0
}

/// Builds the coin table; `theta = None` draws the special row uniformly.
pub fn make_coin_instance<R: Rng + ?Sized>(
    q: usize,
    lam: f64,
    delta: f64,
    budget: u64,
    theta: Option<usize>,
    rng: &mut R,
) -> Result<CoinInstance> {
    if q == 0 || budget == 0 {
        return Err(Error::Domain("Q and the budget must be positive".into()));
    }
    if !(lam > 0.0 && lam < 0.5) {
        return Err(Error::Domain(format!("lambda = {lam} outside (0, 1/2)")));
    }
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1/4]")));
    }
    let theta = match theta {
        Some(t) => {
            check_index("theta", t, q)?;
            t
        }
        None => rng.gen_range(0..q),
    };
    let epsilon = coin_epsilon(q, delta, budget);
    if delta + epsilon > 0.5 {
        return Err(Error::Probability(format!("delta + epsilon = {} exceeds 1/2", delta + epsilon)));
    }
    let means = (0..q)
        .map(|row| {
            if row == theta {
                [0.5 + lam, delta + epsilon]
            } else {
                [0.5, delta]
            }
        })
        .collect();
    Ok(CoinInstance {
        q,
        lam,
        delta,
        epsilon,
        theta,
        means,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mdp::diameter;
    use crate::separability::{is_distinguishing, separation_level, StateActionSet};

    #[test]
    fn gridworld_rows_and_rewards() {
        let set = make_gridworld_set().unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.num_states(), 16);
        for corner in [0, 3, 12, 15] {
            assert_eq!(set.reward().get(corner, 2), 1.0);
        }
        assert_eq!(set.reward().get(5, 0), 0.0);
        let m1 = set.model(0);
        // (0,2) moving right into a hard corner
        assert!((m1.kernel().prob(2, RIGHT, 3) - 0.2).abs() < 1e-12);
        // (2,3) moving down into the far corner
        assert!((m1.kernel().prob(11, DOWN, 15) - 0.3).abs() < 1e-12);
        // (0,0) up: stay or bounce down
        assert!((m1.kernel().prob(0, UP, 0) - 0.7).abs() < 1e-12);
        assert!((m1.kernel().prob(0, UP, 4) - 0.3).abs() < 1e-12);
        // (0,1) up is off-grid: three adjacent cells
        for next in [0, 2, 5] {
            assert!((m1.kernel().prob(1, UP, next) - 1.0 / 3.0).abs() < 1e-12);
        }
        // interior success
        assert!((m1.kernel().prob(5, RIGHT, 6) - 0.85).abs() < 1e-12);
        assert!((m1.kernel().prob(5, RIGHT, 4) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn gridworld_separation_and_published_sets() {
        let set = make_gridworld_set().unwrap();
        let lam = separation_level(&set).unwrap();
        assert!((lam - 1.2999).abs() < 5e-4, "lambda = {lam}");
        let gamma = StateActionSet::new(vec![(1, 0), (8, 3), (2, 1)], 16, 4).unwrap();
        assert!(is_distinguishing(&set, &gamma, lam));
        let half = StateActionSet::new(vec![(11, 3), (4, 2), (13, 0)], 16, 4).unwrap();
        assert!(is_distinguishing(&set, &half, lam / 2.0));
        assert!(!is_distinguishing(&set, &half, lam));
    }

    #[test]
    fn gridworld_models_communicate() {
        for m in make_gridworld_set().unwrap().models() {
            let d = diameter(m).unwrap();
            assert!(d.is_finite() && d > 1.0);
        }
    }

    #[test]
    fn jao_shapes() {
        let spec = JaoSpec {
            num_actions: 3,
            delta: 0.2,
            lam: 0.4,
            best_action: 1,
        };
        let m = make_jao(&spec).unwrap();
        assert!((m.kernel().prob(0, 1, 1) - 0.4).abs() < 1e-15);
        assert!((m.kernel().prob(0, 0, 1) - 0.2).abs() < 1e-15);
        assert!((m.kernel().prob(1, 2, 0) - 0.2).abs() < 1e-15);
        assert!((spec.optimal_gain() - 2.0 / 3.0).abs() < 1e-15);
        assert!(make_jao(&JaoSpec { lam: 1.8, ..spec }).is_err());
        assert!(make_jao(&JaoSpec { best_action: 3, ..spec }).is_err());
    }

    #[test]
    fn jao_without_gap_is_unseparated() {
        let set = make_jao_set(3, 0.2, 0.0, &[0, 2]).unwrap();
        assert_eq!(separation_level(&set).unwrap(), 0.0);
    }

    #[test]
    fn zero_gap_two_jao_models_coincide() {
        let spec = TwoJaoSpec {
            actions_per_side: 3,
            delta: 0.25,
            lam: 0.0,
            capital_delta: 0.0,
            best_row: 0,
        };
        let a = make_two_jao(&spec).unwrap();
        let b = make_two_jao(&TwoJaoSpec { best_row: 2, ..spec }).unwrap();
        let set = ModelSet::new(vec![a, b]).unwrap();
        assert_eq!(separation_level(&set).unwrap(), 0.0);
        assert!(make_two_jao(&TwoJaoSpec { capital_delta: 0.9, ..spec }).is_err());
    }

    #[test]
    fn coin_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coins = make_coin_instance(12, 0.25, 0.25, 10_000, Some(4), &mut rng).unwrap();
        assert!((coins.epsilon - 0.05 * (3.0f64 / 1e4).sqrt()).abs() < 1e-15);
        assert!((coins.epsilon - 8.66e-4).abs() < 1e-6);
        assert_eq!(coins.means[4], [0.75, 0.25 + coins.epsilon]);
        assert_eq!(coins.means[0], [0.5, 0.25]);
        let single = make_coin_instance(1, 0.25, 0.25, 10, None, &mut rng).unwrap();
        assert_eq!(single.theta, 0);
        assert!(make_coin_instance(12, 0.25, 0.3, 10, None, &mut rng).is_err());
        assert!(make_coin_instance(12, 0.25, 0.25, 10, Some(12), &mut rng).is_err());
    }
}
