use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::perron_eigenvector;
use crate::error::{Error, Result};
use crate::gtd::{gtd2_step_in_place, importance_table, is_diverged};
use crate::mdp::{
    expected_reward, induced_transition_matrix, stationary_distribution, Mdp, Policy, SamplingMode, TransitionSampler,
    STATIONARY_TOL,
};
use crate::objective::{FeatureMap, ObjectiveContext, PbeEvaluator};

/// Which learner is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Adapt-then-combine over the configured combination matrix.
    Diffusion,
    /// Same agents with `C = I`.
    Noncooperative,
    /// One learner consuming every agent's sample each step with step-size `mu / N`.
    Centralized,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Diffusion => "diffusion",
            Mode::Noncooperative => "noncooperative",
            Mode::Centralized => "centralized",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diffusion" => Ok(Mode::Diffusion),
            "noncooperative" | "non-cooperative" => Ok(Mode::Noncooperative),
            "centralized" => Ok(Mode::Centralized),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Full description of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub mdp: Mdp,
    pub target: Policy,
    pub behaviors: Vec<Policy>,
    pub features: FeatureMap,
    pub combination: DMatrix<f64>,
    pub gamma: f64,
    pub mu: f64,
    pub eta: f64,
    pub sampling: SamplingMode,
    pub horizon: usize,
    pub replicas: usize,
    pub record_every: usize,
    pub seed: u64,
    /// State weighting used to score `J_PB`; defaults to the in-network distribution.
    pub evaluation_weights: Option<DVector<f64>>,
    /// Fraction of the horizon over which per-agent estimates are time-averaged.
    pub tail_fraction: f64,
    /// Stacked `(theta, w)` reference for tail squared deviations.
    pub reference: Option<DVector<f64>>,
}

impl ExperimentSetup {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mdp: Mdp,
        target: Policy,
        behaviors: Vec<Policy>,
        features: FeatureMap,
        combination: DMatrix<f64>,
        gamma: f64,
        mu: f64,
        eta: f64,
    ) -> Self {
        Self {
            mdp,
            target,
            behaviors,
            features,
            combination,
            gamma,
            mu,
            eta,
            sampling: SamplingMode::Trajectory,
            horizon: 1000,
            replicas: 1,
            record_every: 10,
            seed: 0,
            evaluation_weights: None,
            tail_fraction: 0.0,
            reference: None,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.behaviors.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_agents();
        if n == 0 {
            return Err(Error::InvalidParameter("no agents".into()));
        }
        if self.combination.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                context: "combination matrix",
                expected: n,
                found: self.combination.nrows(),
            });
        }
        if !(self.mu > 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidParameter("step-sizes must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tail_fraction) {
            return Err(Error::InvalidParameter("tail_fraction must lie in [0,1]".into()));
        }
        if self.features.num_states() != self.mdp.num_states() {
            return Err(Error::DimensionMismatch {
                context: "feature rows",
                expected: self.mdp.num_states(),
                found: self.features.num_states(),
            });
        }
        if let Some(r) = &self.reference {
            if r.len() != 2 * self.features.dim() {
                return Err(Error::DimensionMismatch {
                    context: "reference length",
                    expected: 2 * self.features.dim(),
                    found: r.len(),
                });
            }
        }
        Ok(())
    }

    /// Stationary distribution of each behavior policy.
    pub fn behavior_distributions(&self) -> Result<Vec<DVector<f64>>> {
        self.behaviors
            .iter()
            .map(|phi| stationary_distribution(&induced_transition_matrix(&self.mdp, phi)?, STATIONARY_TOL))
            .collect()
    }

    /// Default scoring weights: `sum_k tau_k d_k` with `tau` the Perron vector of `C`
    /// (uniform when `C` is not primitive).
    pub fn default_evaluation_weights(&self, dists: &[DVector<f64>]) -> DVector<f64> {
        let n = dists.len();
        let tau = perron_eigenvector(&self.combination).unwrap_or_else(|_| DVector::from_element(n, 1.0 / n as f64));
        let mut d = DVector::zeros(dists[0].len());
        for (t, dk) in tau.iter().zip(dists) {
            d.axpy(*t, dk, 1.0);
        }
        d
    }

    pub fn evaluation_context(&self) -> Result<ObjectiveContext> {
        let dists = self.behavior_distributions()?;
        let d = match &self.evaluation_weights {
            Some(w) => w.clone(),
            None => self.default_evaluation_weights(&dists),
        };
        ObjectiveContext::new(
            self.features.clone(),
            d,
            induced_transition_matrix(&self.mdp, &self.target)?,
            expected_reward(&self.mdp, &self.target)?,
            self.gamma,
        )
    }
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaResult {
    /// Final `(theta, w)` per learner.
    pub final_alpha: Vec<DVector<f64>>,
    /// Final `J_PB` per learner, `+inf` once diverged.
    pub final_jpb: Vec<f64>,
    pub diverged: Vec<bool>,
    /// Time average of `(theta, w)` over the tail window (empty when disabled).
    pub tail_mean: Vec<DVector<f64>>,
    /// Time average of `||alpha - reference||^2` over the tail window.
    pub tail_sq_dev: Vec<f64>,
    /// `J_PB` per learner at every record point.
    pub jpb: Vec<Vec<f64>>,
    /// `||alpha||_2` per learner at every record point.
    pub norms: Vec<Vec<f64>>,
    /// Divergence flag per learner at every record point.
    pub flags: Vec<Vec<bool>>,
}

/// Aggregated Monte Carlo learning curves.
#[derive(Debug, Clone)]
pub struct Trace {
    pub mode: Mode,
    pub iterations: Vec<usize>,
    /// `[record][learner]` mean `J_PB` over replicas where the learner has not diverged.
    pub agent_jpb: Vec<Vec<f64>>,
    /// `[record]` mean over learners and non-diverged replicas.
    pub mean_jpb: Vec<f64>,
    pub mean_norm: Vec<f64>,
    /// `[record]` number of diverged replica-learner pairs.
    pub diverged: Vec<usize>,
    pub replicas: Vec<ReplicaResult>,
}

impl Trace {
    pub fn num_learners(&self) -> usize {
        self.agent_jpb.first().map_or(0, Vec::len)
    }

    /// Median of final `J_PB` over all replica-learner pairs (diverged ones count as `+inf`).
    pub fn median_final_jpb(&self) -> f64 {
        let mut v: Vec<f64> = self.replicas.iter().flat_map(|r| r.final_jpb.iter().copied()).collect();
        median(&mut v)
    }

    pub fn final_diverged_count(&self) -> usize {
        self.diverged.last().copied().unwrap_or(0)
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            a.max(b)
        } else {
            0.5 * (a + b)
        }
    }
}

struct Prepared<'a> {
    setup: &'a ExperimentSetup,
    samplers: Vec<TransitionSampler>,
    weights: Vec<DMatrix<f64>>,
    evaluator: PbeEvaluator,
    /// Column `k` of `C` as `(l, c_lk)` pairs.
    columns: Vec<Vec<(usize, f64)>>,
}

/// Runs `setup.replicas` independent replicas of the chosen mode.
///
/// Every agent draws from its own generator stream, derived from `(seed, replica,
/// agent)`, so all modes see the same sample sequences.
pub fn run_experiment(setup: &ExperimentSetup, mode: Mode) -> Result<Trace> {
    setup.validate()?;
    let dists = setup.behavior_distributions()?;
    let samplers = setup
        .behaviors
        .iter()
        .zip(&dists)
        .map(|(phi, d)| TransitionSampler::new(&setup.mdp, phi, d, setup.sampling))
        .collect::<Result<Vec<_>>>()?;
    let weights = setup.behaviors.iter().map(|phi| importance_table(&setup.target, phi)).collect::<Result<Vec<_>>>()?;
    let evaluator = PbeEvaluator::new(&setup.evaluation_context()?)?;
    let n = setup.num_agents();
    let columns = (0..n)
        .map(|k| {
            (0..n)
                .filter_map(|l| {
                    let c = setup.combination[(l, k)];
                    (c != 0.0).then_some((l, c))
                })
                .collect()
        })
        .collect();
    let prep = Prepared { setup, samplers, weights, evaluator, columns };
    let replicas: Vec<ReplicaResult> =
        (0..setup.replicas).into_par_iter().map(|r| run_replica(&prep, mode, r)).collect();
    Ok(aggregate(setup, mode, replicas))
}

fn record_points(horizon: usize, every: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (0..=horizon).step_by(every).collect();
    if *pts.last().unwrap() != horizon {
        pts.push(horizon);
    }
    pts
}

fn run_replica(prep: &Prepared<'_>, mode: Mode, replica: usize) -> ReplicaResult {
    let setup = prep.setup;
    let n = setup.num_agents();
    let m = setup.features.dim();
    let l2 = 2 * m;
    let learners = if mode == Mode::Centralized { 1 } else { n };
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|k| {
            let mut r = ChaCha8Rng::seed_from_u64(setup.seed);
            r.set_stream((replica * n + k) as u64);
            r
        })
        .collect();
    let mut samplers = prep.samplers.clone();
    let mut alpha = vec![0.0; learners * l2];
    let mut psi = vec![0.0; learners * l2];
    let mut scratch = vec![0.0; l2];
    let mut diverged = vec![false; learners];
    // diffusion and centralized runs are coupled, so one divergence freezes the replica
    let coupled = mode != Mode::Noncooperative;

    let gamma = setup.gamma;
    let (mu_t, mu_w) = match mode {
        Mode::Centralized => (setup.eta * setup.mu / n as f64, setup.mu / n as f64),
        _ => (setup.eta * setup.mu, setup.mu),
    };
    let tail_len = (setup.tail_fraction * setup.horizon as f64).floor() as usize;
    let tail_start = setup.horizon - tail_len;
    let mut tail_sum = vec![0.0; if tail_len > 0 { learners * l2 } else { 0 }];
    let mut tail_dev = vec![0.0; learners];

    let points = record_points(setup.horizon, setup.record_every);
    let mut jpb = Vec::with_capacity(points.len());
    let mut norms = Vec::with_capacity(points.len());
    let mut flags = Vec::with_capacity(points.len());
    let mut next_point = 0;

    let features = &setup.features;
    for t in 0..=setup.horizon {
        if t > 0 && !(coupled && diverged[0]) {
            match mode {
                Mode::Diffusion => {
                    psi.copy_from_slice(&alpha);
                    for k in 0..n {
                        let tr = samplers[k].next(&mut rngs[k]);
                        let xi = prep.weights[k][(tr.s, tr.a)];
                        gtd2_step_in_place(
                            &mut psi[k * l2..(k + 1) * l2],
                            features.row(tr.s),
                            features.row(tr.s_next),
                            tr.reward,
                            xi,
                            gamma,
                            mu_t,
                            mu_w,
                        );
                    }
                    for k in 0..n {
                        let dst = &mut alpha[k * l2..(k + 1) * l2];
                        dst.fill(0.0);
                        for &(l, c) in &prep.columns[k] {
                            let src = &psi[l * l2..(l + 1) * l2];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += c * s;
                            }
                        }
                    }
                }
                Mode::Noncooperative => {
                    for k in 0..n {
                        // frozen agents still consume their stream so others are unaffected
                        let tr = samplers[k].next(&mut rngs[k]);
                        if diverged[k] {
                            continue;
                        }
                        let xi = prep.weights[k][(tr.s, tr.a)];
                        gtd2_step_in_place(
                            &mut alpha[k * l2..(k + 1) * l2],
                            features.row(tr.s),
                            features.row(tr.s_next),
                            tr.reward,
                            xi,
                            gamma,
                            mu_t,
                            mu_w,
                        );
                    }
                }
                Mode::Centralized => {
                    psi.copy_from_slice(&alpha);
                    for k in 0..n {
                        let tr = samplers[k].next(&mut rngs[k]);
                        let xi = prep.weights[k][(tr.s, tr.a)];
                        scratch.copy_from_slice(&alpha);
                        gtd2_step_in_place(
                            &mut scratch,
                            features.row(tr.s),
                            features.row(tr.s_next),
                            tr.reward,
                            xi,
                            gamma,
                            mu_t,
                            mu_w,
                        );
                        for i in 0..l2 {
                            psi[i] += scratch[i] - alpha[i];
                        }
                    }
                    alpha.copy_from_slice(&psi);
                }
            }
        }
        if tail_len > 0 && t > tail_start {
            for k in 0..learners {
                let a = &alpha[k * l2..(k + 1) * l2];
                for (s, v) in tail_sum[k * l2..(k + 1) * l2].iter_mut().zip(a) {
                    *s += v;
                }
                if let Some(r) = &setup.reference {
                    tail_dev[k] += a.iter().zip(r.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                }
            }
        }
        if next_point < points.len() && points[next_point] == t {
            next_point += 1;
            for k in 0..learners {
                if is_diverged(&alpha[k * l2..(k + 1) * l2]) {
                    diverged[k] = true;
                }
            }
            if coupled && diverged.iter().any(|&d| d) {
                diverged.fill(true);
            }
            let mut row_j = Vec::with_capacity(learners);
            let mut row_n = Vec::with_capacity(learners);
            for k in 0..learners {
                let a = &alpha[k * l2..(k + 1) * l2];
                if diverged[k] {
                    row_j.push(f64::INFINITY);
                    row_n.push(f64::INFINITY);
                } else {
                    row_j.push(prep.evaluator.eval(&a[m..]));
                    row_n.push(a.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            jpb.push(row_j);
            norms.push(row_n);
            flags.push(diverged.clone());
        }
    }

    let final_alpha: Vec<DVector<f64>> =
        (0..learners).map(|k| DVector::from_column_slice(&alpha[k * l2..(k + 1) * l2])).collect();
    let tail_mean = if tail_len > 0 {
        (0..learners).map(|k| DVector::from_column_slice(&tail_sum[k * l2..(k + 1) * l2]) / tail_len as f64).collect()
    } else {
        Vec::new()
    };
    let tail_sq_dev = if tail_len > 0 && setup.reference.is_some() {
        tail_dev.iter().map(|v| v / tail_len as f64).collect()
    } else {
        Vec::new()
    };
    ReplicaResult {
        final_alpha,
        final_jpb: jpb.last().cloned().unwrap_or_default(),
        diverged,
        tail_mean,
        tail_sq_dev,
        jpb,
        norms,
        flags,
    }
}

fn aggregate(setup: &ExperimentSetup, mode: Mode, replicas: Vec<ReplicaResult>) -> Trace {
    let iterations = record_points(setup.horizon, setup.record_every);
    let learners = replicas.first().map_or(0, |r| r.final_alpha.len());
    let mut agent_jpb = Vec::with_capacity(iterations.len());
    let mut mean_jpb = Vec::with_capacity(iterations.len());
    let mut mean_norm = Vec::with_capacity(iterations.len());
    let mut diverged = Vec::with_capacity(iterations.len());
    for i in 0..iterations.len() {
        let mut row = vec![0.0; learners];
        let (mut tot_j, mut tot_n, mut tot_c, mut div) = (0.0, 0.0, 0usize, 0usize);
        for (k, slot) in row.iter_mut().enumerate() {
            let (mut s, mut c) = (0.0, 0usize);
            for r in &replicas {
                if r.flags[i][k] {
                    div += 1;
                } else {
                    s += r.jpb[i][k];
                    tot_n += r.norms[i][k];
                    c += 1;
                }
            }
            *slot = if c > 0 { s / c as f64 } else { f64::NAN };
            tot_j += s;
            tot_c += c;
        }
        agent_jpb.push(row);
        mean_jpb.push(if tot_c > 0 { tot_j / tot_c as f64 } else { f64::NAN });
        mean_norm.push(if tot_c > 0 { tot_n / tot_c as f64 } else { f64::NAN });
        diverged.push(div);
    }
    Trace { mode, iterations, agent_jpb, mean_jpb, mean_norm, diverged, replicas }
}
