//! Foraging grid world: a rectangular board with a predator area and a food cell.
//!
//! States are numbered from 1 at the bottom-left corner, left to right and then
//! bottom to top, so `s = (row - 1) * cols + col`. Internally state `s` is index `s - 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};
use crate::objective::FeatureMap;

/// Action order used by every matrix in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
}

pub const ACTIONS: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

/// Inclusive 1-based rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub col_min: usize,
    pub col_max: usize,
    pub row_min: usize,
    pub row_max: usize,
}

impl Rect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridWorldSpec {
    pub rows: usize,
    pub cols: usize,
    /// 1-based state number of the food cell.
    pub food: usize,
    pub predator: Rect,
    pub step_reward: f64,
    pub predator_reward: f64,
    pub food_reward: f64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        Self {
            rows: 20,
            cols: 20,
            food: 400,
            predator: Rect { col_min: 5, col_max: 20, row_min: 8, row_max: 15 },
            step_reward: -1.0,
            predator_reward: -15.0,
            food_reward: 20.0,
        }
    }
}

impl GridWorldSpec {
    pub fn num_states(&self) -> usize {
        self.rows * self.cols
    }

    /// `(row, col)`, both 1-based, of 0-based index `i`.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.cols + 1, i % self.cols + 1)
    }

    /// 0-based index of `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        (row - 1) * self.cols + (col - 1)
    }

    pub fn food_index(&self) -> usize {
        self.food - 1
    }

    pub fn in_predator(&self, i: usize) -> bool {
        let (r, c) = self.coords(i);
        self.predator.contains(r, c)
    }

    /// Destination of `a` from `i`; moves off the board stay in place.
    pub fn step(&self, i: usize, a: Action) -> usize {
        let (r, c) = self.coords(i);
        let (r2, c2) = match a {
            Action::North if r < self.rows => (r + 1, c),
            Action::South if r > 1 => (r - 1, c),
            Action::East if c < self.cols => (r, c + 1),
            Action::West if c > 1 => (r, c - 1),
            _ => (r, c),
        };
        self.index(r2, c2)
    }

    /// Reward for arriving in `dest`.
    pub fn reward_into(&self, dest: usize) -> f64 {
        if dest == self.food_index() {
            self.food_reward
        } else if self.in_predator(dest) {
            self.predator_reward
        } else {
            self.step_reward
        }
    }

    fn validate(&self) -> Result<()> {
        let p = &self.predator;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGeometry("grid must have at least one row and column".into()));
        }
        if p.col_min < 1 || p.row_min < 1 || p.col_min > p.col_max || p.row_min > p.row_max {
            return Err(Error::InvalidGeometry(format!("malformed predator rectangle {p:?}")));
        }
        if p.col_max > self.cols || p.row_max > self.rows {
            return Err(Error::InvalidGeometry(format!("predator rectangle {p:?} leaves the grid")));
        }
        if self.food < 1 || self.food > self.num_states() {
            return Err(Error::InvalidGeometry(format!("food state {} outside 1..={}", self.food, self.num_states())));
        }
        if self.in_predator(self.food_index()) {
            return Err(Error::InvalidGeometry("food lies inside the predator area".into()));
        }
        Ok(())
    }

    /// Cells outside the predator area with a neighbor inside it.
    pub fn predator_boundary(&self) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&i| !self.in_predator(i) && ACTIONS.iter().any(|&a| self.in_predator(self.step(i, a))))
            .collect()
    }
}

/// Deterministic movement kernel with destination-based rewards.
pub fn build_world(spec: &GridWorldSpec) -> Result<Mdp> {
    spec.validate()?;
    let s = spec.num_states();
    let mut kernel = Vec::with_capacity(4);
    let mut reward = Vec::with_capacity(4);
    for a in ACTIONS {
        let mut p = DMatrix::zeros(s, s);
        let mut r = DMatrix::zeros(s, s);
        for i in 0..s {
            let j = spec.step(i, a);
            p[(i, j)] = 1.0;
            // the reward only matters where the kernel has mass, but filling the row keeps
            // r(s, a, s') a function of s' alone
            for jj in 0..s {
                r[(i, jj)] = spec.reward_into(jj);
            }
        }
        kernel.push(p);
        reward.push(r);
    }
    Mdp::new(kernel, reward)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub markers_per_axis: usize,
    /// Denominator term `w` in `exp(-d^2 / (2 w))`.
    pub width: f64,
    /// Divide each row by its sum.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { markers_per_axis: 8, width: 0.005, normalize: false }
    }
}

/// Cell centers on the unit square: column to `x`, row to `y`.
fn position(world: &GridWorldSpec, i: usize) -> (f64, f64) {
    let (r, c) = world.coords(i);
    ((c as f64 - 0.5) / world.cols as f64, (r as f64 - 0.5) / world.rows as f64)
}

/// Marker `m` sits at `((2 j + 1) / 2K, (2 i + 1) / 2K)` with `m = i K + j`.
pub fn marker_positions(spec: &FeatureSpec) -> Vec<(f64, f64)> {
    let k = spec.markers_per_axis;
    let at = |t: usize| (2 * t + 1) as f64 / (2 * k) as f64;
    (0..k * k).map(|m| (at(m % k), at(m / k))).collect()
}

/// Gaussian radial-basis features over marker positions.
pub fn build_features(spec: &FeatureSpec, world: &GridWorldSpec) -> Result<FeatureMap> {
    if spec.markers_per_axis == 0 || !(spec.width > 0.0) {
        return Err(Error::InvalidParameter("markers_per_axis and width must be positive".into()));
    }
    let markers = marker_positions(spec);
    let s = world.num_states();
    let mut x = DMatrix::from_fn(s, markers.len(), |i, m| {
        let (px, py) = position(world, i);
        let (mx, my) = markers[m];
        let d2 = (px - mx).powi(2) + (py - my).powi(2);
        (-d2 / (2.0 * spec.width)).exp()
    });
    if spec.normalize {
        for i in 0..s {
            let sum: f64 = x.row(i).sum();
            if sum > 0.0 {
                x.row_mut(i).scale_mut(1.0 / sum);
            }
        }
    }
    FeatureMap::new(x).map_err(|e| match e {
        Error::RankDeficient { rank, expected } => {
            Error::InvalidParameter(format!("feature matrix has rank {rank} < {expected}; increase the Gaussian width"))
        }
        other => other,
    })
}

/// `p` split evenly over `preferred`, `1 - p` evenly over the other actions.
fn mix_row(preferred: &[usize], p: f64) -> [f64; 4] {
    let mut row = [0.0; 4];
    let rest = 4 - preferred.len();
    for (a, v) in row.iter_mut().enumerate() {
        *v = if preferred.contains(&a) {
            if rest == 0 {
                0.25
            } else {
                p / preferred.len() as f64
            }
        } else {
            (1.0 - p) / rest as f64
        };
    }
    row
}

fn policy_from_rows(rows: Vec<[f64; 4]>) -> Policy {
    let s = rows.len();
    Policy::new(DMatrix::from_fn(s, 4, |i, a| rows[i][a])).expect("mixture rows are distributions")
}

fn manhattan(world: &GridWorldSpec, a: usize, b: usize) -> usize {
    let (r1, c1) = world.coords(a);
    let (r2, c2) = world.coords(b);
    r1.abs_diff(r2) + c1.abs_diff(c2)
}

/// Actions whose destination is closest to `goal`; ties are kept together.
fn greedy_actions(world: &GridWorldSpec, i: usize, goal: usize) -> Vec<usize> {
    let dists: Vec<usize> = ACTIONS.iter().map(|&a| manhattan(world, world.step(i, a), goal)).collect();
    let best = *dists.iter().min().expect("four actions");
    (0..4).filter(|&a| dists[a] == best).collect()
}

/// Probability `p` on the moves that get closest to `goal`, the rest spread uniformly.
pub fn greedy_policy(world: &GridWorldSpec, goal: usize, p: f64) -> Policy {
    policy_from_rows((0..world.num_states()).map(|i| mix_row(&greedy_actions(world, i, goal), p)).collect())
}

/// Detour action: west along the bottom area to the corridor left of the predator, north
/// up the corridor, then east along the rows above it. Inside the predator area the
/// shorter exit (west or north) is taken.
pub fn detour_action(world: &GridWorldSpec, i: usize) -> Action {
    let (r, c) = world.coords(i);
    let p = &world.predator;
    let (fr, fc) = world.coords(world.food_index());
    if i == world.food_index() {
        return Action::North;
    }
    if r > p.row_max {
        // above the predator: head for the food row, then along it
        if r < fr {
            return Action::North;
        }
        if r > fr {
            return Action::South;
        }
        return if c < fc { Action::East } else { Action::West };
    }
    if p.contains(r, c) {
        let west = c + 1 - p.col_min;
        let north = p.row_max + 1 - r;
        return if west < north { Action::West } else { Action::North };
    }
    if c < p.col_min {
        return Action::North;
    }
    if c > p.col_max {
        // right of the predator area: straight up is safe
        return Action::North;
    }
    Action::West
}

pub fn detour_policy(world: &GridWorldSpec, p: f64) -> Policy {
    policy_from_rows((0..world.num_states()).map(|i| mix_row(&[detour_action(world, i) as usize], p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySpec {
    pub myopic_prob: f64,
    pub detour_prob: f64,
    pub attraction_prob: f64,
    /// 1-based territory-center states, one behavior per entry.
    pub territory_centers: Vec<usize>,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            myopic_prob: 0.8,
            detour_prob: 0.95,
            attraction_prob: 0.8,
            territory_centers: default_territory_centers(15),
        }
    }
}

/// `n` centers spaced evenly from 395 down to 21, rounded to the nearest state.
pub fn default_territory_centers(n: usize) -> Vec<usize> {
    if n == 1 {
        return vec![395];
    }
    (0..n).map(|k| (395.0 - k as f64 * 374.0 / (n - 1) as f64).round() as usize).collect()
}

/// Myopic target, detour target and one attraction behavior per territory.
#[derive(Debug, Clone)]
pub struct GridPolicies {
    pub myopic: Policy,
    pub detour: Policy,
    pub behaviors: Vec<Policy>,
}

pub fn build_policies(world: &GridWorldSpec, spec: &PolicySpec) -> Result<GridPolicies> {
    for p in [spec.myopic_prob, spec.detour_prob, spec.attraction_prob] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("policy probability {p} outside [0, 1]")));
        }
    }
    if spec.territory_centers.is_empty() {
        return Err(Error::InvalidParameter("at least one territory center is required".into()));
    }
    let behaviors = spec
        .territory_centers
        .iter()
        .map(|&c| {
            if c < 1 || c > world.num_states() {
                return Err(Error::InvalidGeometry(format!("territory center {c} outside the grid")));
            }
            Ok(greedy_policy(world, c - 1, spec.attraction_prob))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridPolicies {
        myopic: greedy_policy(world, world.food_index(), spec.myopic_prob),
        detour: detour_policy(world, spec.detour_prob),
        behaviors,
    })
}
