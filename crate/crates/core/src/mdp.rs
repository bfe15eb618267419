//! Finite Markov decision processes, policy-induced chains and exact value vectors.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::dense_text;
use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Power-iteration settings for [`stationary_distribution`].
pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// Finite MDP with kernel `P(s'|s,a)` and reward `r(s,a,s')`.
///
/// Both tensors are stored as one `S x S` matrix per action, indexed `[a][(s, s')]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    kernel: Vec<DMatrix<f64>>,
    reward: Vec<DMatrix<f64>>,
}

impl Mdp {
    pub fn new(kernel: Vec<DMatrix<f64>>, reward: Vec<DMatrix<f64>>) -> Result<Self> {
        let num_actions = kernel.len();
        if num_actions == 0 {
            return Err(Error::InvalidParameter("MDP needs at least one action".into()));
        }
        if reward.len() != num_actions {
            return Err(Error::DimensionMismatch {
                context: "reward actions",
                expected: num_actions,
                found: reward.len(),
            });
        }
        let num_states = kernel[0].nrows();
        if num_states == 0 {
            return Err(Error::InvalidParameter("MDP needs at least one state".into()));
        }
        for (a, (p, r)) in kernel.iter().zip(&reward).enumerate() {
            for m in [p, r] {
                if m.shape() != (num_states, num_states) {
                    return Err(Error::DimensionMismatch {
                        context: "kernel/reward slice",
                        expected: num_states,
                        found: m.nrows().max(m.ncols()),
                    });
                }
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite reward for action {a}")));
            }
            for s in 0..num_states {
                check_distribution(p.row(s).iter().copied(), "transition kernel", || format!("state {s}, action {a}"))?;
            }
        }
        Ok(Self { num_states, num_actions, kernel, reward })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.kernel[a][(s, s_next)]
    }

    pub fn reward(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.reward[a][(s, s_next)]
    }

    /// Kernel slice `P(.|., a)` as an `S x S` matrix.
    pub fn kernel(&self, a: usize) -> &DMatrix<f64> {
        &self.kernel[a]
    }

    pub fn reward_slice(&self, a: usize) -> &DMatrix<f64> {
        &self.reward[a]
    }

    /// Nonzero successors `(s', P(s'|s,a))` of a state-action pair.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = self.kernel[a].row(s);
        (0..self.num_states).filter_map(move |sp| {
            let p = row[sp];
            (p > 0.0).then_some((sp, p))
        })
    }

    /// Parse the dense text layout: one line per state `s`, holding
    /// `A` consecutive blocks of `S` numbers, block `a` being `P(.|s,a)` (resp. `r(s,a,.)`).
    pub fn from_dense_text(kernel: &str, reward: &str, num_actions: usize) -> Result<Self> {
        let k = dense_text::parse_matrix(kernel)?;
        let r = dense_text::parse_matrix(reward)?;
        let s = k.nrows();
        for m in [&k, &r] {
            if m.nrows() != s || m.ncols() != s * num_actions {
                return Err(Error::DimensionMismatch {
                    context: "dense MDP text (columns = actions * states)",
                    expected: s * num_actions,
                    found: m.ncols(),
                });
            }
        }
        let split = |m: &DMatrix<f64>| (0..num_actions).map(|a| m.columns(a * s, s).into_owned()).collect::<Vec<_>>();
        Mdp::new(split(&k), split(&r))
    }

    pub fn to_dense_text(&self) -> (String, String) {
        let join = |slices: &[DMatrix<f64>]| {
            let s = self.num_states;
            let mut m = DMatrix::zeros(s, s * self.num_actions);
            for (a, sl) in slices.iter().enumerate() {
                m.columns_mut(a * s, s).copy_from(sl);
            }
            dense_text::write_matrix(&m)
        };
        (join(&self.kernel), join(&self.reward))
    }
}

fn check_distribution(row: impl Iterator<Item = f64>, context: &'static str, at: impl Fn() -> String) -> Result<()> {
    let mut sum = 0.0;
    for p in row {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidProbability {
                context,
                detail: format!("negative or non-finite entry at {}", at()),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidProbability { context, detail: format!("row sums to {sum} at {}", at()) });
    }
    Ok(())
}

/// Stationary policy, `probs[(s, a)] = pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(Error::InvalidParameter("empty policy table".into()));
        }
        for s in 0..probs.nrows() {
            check_distribution(probs.row(s).iter().copied(), "policy", || format!("state {s}"))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self { probs: DMatrix::from_element(num_states, num_actions, 1.0 / num_actions as f64) }
    }

    /// One-hot policy picking `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = DMatrix::zeros(actions.len(), num_actions);
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidParameter(format!("action {a} out of range at state {s}")));
            }
            probs[(s, a)] = 1.0;
        }
        Policy::new(probs)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn from_dense_text(text: &str) -> Result<Self> {
        Policy::new(dense_text::parse_matrix(text)?)
    }

    pub fn to_dense_text(&self) -> String {
        dense_text::write_matrix(&self.probs)
    }
}

fn check_shapes(mdp: &Mdp, pi: &Policy) -> Result<()> {
    if pi.num_states() != mdp.num_states() {
        return Err(Error::DimensionMismatch {
            context: "policy states",
            expected: mdp.num_states(),
            found: pi.num_states(),
        });
    }
    if pi.num_actions() != mdp.num_actions() {
        return Err(Error::DimensionMismatch {
            context: "policy actions",
            expected: mdp.num_actions(),
            found: pi.num_actions(),
        });
    }
    Ok(())
}

/// `P^pi[(s, s')] = sum_a P(s'|s,a) pi(a|s)`.
pub fn induced_transition_matrix(mdp: &Mdp, pi: &Policy) -> Result<DMatrix<f64>> {
    check_shapes(mdp, pi)?;
    let s = mdp.num_states();
    let mut out = DMatrix::zeros(s, s);
    for a in 0..mdp.num_actions() {
        let weights = pi.probs.column(a);
        let slice = mdp.kernel(a);
        for j in 0..s {
            for i in 0..s {
                out[(i, j)] += weights[i] * slice[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `r^pi(s) = sum_a pi(a|s) sum_s' P(s'|s,a) r(s,a,s')`.
pub fn expected_reward(mdp: &Mdp, pi: &Policy) -> Result<DVector<f64>> {
    check_shapes(mdp, pi)?;
    let s = mdp.num_states();
    let mut out = DVector::zeros(s);
    for a in 0..mdp.num_actions() {
        let p = mdp.kernel(a);
        let r = mdp.reward_slice(a);
        for st in 0..s {
            let w = pi.prob(st, a);
            if w == 0.0 {
                continue;
            }
            let inner: f64 = p.row(st).iter().zip(r.row(st).iter()).map(|(x, y)| x * y).sum();
            out[st] += w * inner;
        }
    }
    Ok(out)
}

/// Closed communicating classes of the support graph of `p`, each as sorted members.
pub fn closed_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let comp = strongly_connected_components(n, |u| (0..n).filter(move |&v| p[(u, v)] > 0.0).collect::<Vec<_>>());
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; ncomp];
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > 0.0 && comp[u] != comp[v] {
                closed[comp[u]] = false;
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; ncomp];
    for u in 0..n {
        let c = comp[u];
        if closed[c] {
            if slot[c] == usize::MAX {
                slot[c] = out.len();
                out.push(Vec::new());
            }
            out[slot[c]].push(u);
        }
    }
    out
}

pub fn closed_class_count(p: &DMatrix<f64>) -> usize {
    closed_classes(p).len()
}

/// Whether the support graph of `p` is strongly connected.
pub fn is_irreducible(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let comp = strongly_connected_components(n, |u| (0..n).filter(move |&v| p[(u, v)] > 0.0).collect::<Vec<_>>());
    comp.iter().all(|&c| c == comp[0])
}

/// Kosaraju SCC labelling; returns a component index per node.
pub(crate) fn strongly_connected_components<F>(n: usize, succ: F) -> Vec<usize>
where
    F: Fn(usize) -> Vec<usize>,
{
    let adj: Vec<Vec<usize>> = (0..n).map(&succ).collect();
    let mut radj = vec![Vec::new(); n];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    // iterative post-order on the forward graph
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((u, i)) = stack.pop() {
            if i < adj[u].len() {
                stack.push((u, i + 1));
                let v = adj[u][i];
                if !visited[v] {
                    visited[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![root];
        comp[root] = next;
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Period of the closed class `members`: gcd of `level(u) + 1 - level(v)` over its edges.
fn class_period(p: &DMatrix<f64>, members: &[usize]) -> usize {
    let n = p.nrows();
    let mut inside = vec![false; n];
    for &s in members {
        inside[s] = true;
    }
    let mut level = vec![usize::MAX; n];
    let root = members[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g = 0usize;
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p[(u, v)] == 0.0 || !inside[v] {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

/// Stationary distribution of a row-stochastic matrix by power iteration on `P^T`.
///
/// Chains with transient states are accepted as long as they have a single closed
/// class; the returned distribution is then zero on the transient states.
pub fn stationary_distribution(p: &DMatrix<f64>, tol: f64) -> Result<DVector<f64>> {
    stationary_distribution_capped(p, tol, STATIONARY_MAX_ITERS)
}

pub fn stationary_distribution_capped(p: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<DVector<f64>> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::DimensionMismatch { context: "transition matrix columns", expected: n, found: p.ncols() });
    }
    let classes = closed_classes(p);
    if classes.len() != 1 {
        return Err(Error::Reducible { classes: classes.len() });
    }
    let recurrent = &classes[0];
    // sparse transpose: for each destination, its (source, prob) list
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for s in 0..n {
        for sp in 0..n {
            let v = p[(s, sp)];
            if v != 0.0 {
                incoming[sp].push((s, v));
            }
        }
    }
    let apply = |d: &[f64], out: &mut [f64]| {
        for (sp, inc) in incoming.iter().enumerate() {
            out[sp] = inc.iter().map(|&(s, v)| d[s] * v).sum();
        }
    };
    // Aperiodic chains are iterated on the lazy chain (I + P) / 2, which has the same
    // stationary vector but no eigenvalues near -1; periodic ones keep P and fail.
    let lazy = class_period(p, recurrent) == 1;
    let step = |d: &[f64], out: &mut [f64]| {
        apply(d, out);
        if lazy {
            for (o, x) in out.iter_mut().zip(d) {
                *o = 0.5 * (*o + x);
            }
        }
    };
    // transient states start (and therefore stay) at exactly zero
    let mut d = vec![0.0; n];
    for &s in recurrent {
        d[s] = 1.0 / recurrent.len() as f64;
    }
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        step(&d, &mut next);
        residual = d.iter().zip(&next).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        let total: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= total;
        }
        std::mem::swap(&mut d, &mut next);
        // the lazy residual is half the residual under P
        if residual <= if lazy { 0.5 * tol } else { tol } {
            break;
        }
    }
    if residual > tol && !lazy {
        return Err(Error::NotConverged { iterations: max_iters, residual });
    }
    // final residual check on the normalized vector
    apply(&d, &mut next);
    let res = d.iter().zip(&next).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    if res > tol {
        return Err(Error::NotConverged { iterations: max_iters, residual: res });
    }
    Ok(DVector::from_vec(d))
}

/// Policy-induced chain: transition matrix, expected reward and stationary distribution.
#[derive(Debug, Clone)]
pub struct ChainQuantities {
    pub p_pi: DMatrix<f64>,
    pub r_pi: DVector<f64>,
    pub d: DVector<f64>,
}

impl ChainQuantities {
    pub fn new(mdp: &Mdp, pi: &Policy) -> Result<Self> {
        let p_pi = induced_transition_matrix(mdp, pi)?;
        let r_pi = expected_reward(mdp, pi)?;
        let d = stationary_distribution(&p_pi, STATIONARY_TOL)?;
        Ok(Self { p_pi, r_pi, d })
    }
}

/// Solves `(I - gamma P^pi) v = r^pi`.
pub fn exact_value(mdp: &Mdp, pi: &Policy, gamma: f64) -> Result<DVector<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} not in (0,1)")));
    }
    let p = induced_transition_matrix(mdp, pi)?;
    let r = expected_reward(mdp, pi)?;
    value_from_chain(&p, &r, gamma)
}

pub fn value_from_chain(p: &DMatrix<f64>, r: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - p * gamma;
    a.lu().solve(r).ok_or(Error::SingularSystem)
}

/// One observed transition `(s, a, s', r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub reward: f64,
}

/// Draws `a ~ behavior(.|s)`, `s' ~ P(.|s,a)` and reads the reward.
pub fn sample_transition<R: Rng + ?Sized>(mdp: &Mdp, behavior: &Policy, s: usize, rng: &mut R) -> Transition {
    let actions =
        WeightedIndex::new(behavior.probs.row(s).iter().copied()).expect("policy rows are valid distributions");
    let a = actions.sample(rng);
    let next = WeightedIndex::new(mdp.kernel(a).row(s).iter().copied()).expect("kernel rows are valid distributions");
    let s_next = next.sample(rng);
    Transition { s, a, s_next, reward: mdp.reward(s, a, s_next) }
}

/// How successive states are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Each step redraws the current state from the behavior policy's stationary distribution.
    Iid,
    /// The next state of one step is the current state of the following step.
    Trajectory,
}

/// Precomputed sampler for one agent following a fixed behavior policy.
///
/// Produces the same transition as [`sample_transition`] for the same generator state;
/// in iid mode the current state is drawn from the stationary distribution first.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    mode: SamplingMode,
    state_dist: WeightedIndex<f64>,
    actions: Vec<WeightedIndex<f64>>,
    outcomes: Vec<(Vec<usize>, WeightedIndex<f64>)>,
    rewards: Vec<Vec<f64>>,
    num_actions: usize,
    current: Option<usize>,
}

impl TransitionSampler {
    pub fn new(mdp: &Mdp, behavior: &Policy, stationary: &DVector<f64>, mode: SamplingMode) -> Result<Self> {
        check_shapes(mdp, behavior)?;
        let state_dist = WeightedIndex::new(stationary.iter().copied())
            .map_err(|e| Error::InvalidParameter(format!("stationary distribution: {e}")))?;
        let actions = (0..mdp.num_states())
            .map(|s| {
                WeightedIndex::new(behavior.probs.row(s).iter().copied())
                    .map_err(|e| Error::InvalidParameter(format!("behavior row {s}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut outcomes = Vec::with_capacity(mdp.num_states() * mdp.num_actions());
        let mut rewards = Vec::with_capacity(outcomes.capacity());
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                // zero-probability successors are never drawn, so restricting to the
                // support keeps draws identical to `sample_transition`
                let (targets, probs): (Vec<usize>, Vec<f64>) = mdp.successors(s, a).unzip();
                let dist = WeightedIndex::new(probs)
                    .map_err(|e| Error::InvalidParameter(format!("kernel row ({s},{a}): {e}")))?;
                rewards.push(mdp.reward_slice(a).row(s).iter().copied().collect());
                outcomes.push((targets, dist));
            }
        }
        Ok(Self { mode, state_dist, actions, outcomes, rewards, num_actions: mdp.num_actions(), current: None })
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Transition from a given state.
    pub fn sample_from<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Transition {
        let a = self.actions[s].sample(rng);
        let idx = s * self.num_actions + a;
        let (targets, dist) = &self.outcomes[idx];
        let s_next = targets[dist.sample(rng)];
        Transition { s, a, s_next, reward: self.rewards[idx][s_next] }
    }

    /// Next transition of the stream according to the sampling mode.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Transition {
        let s = match (self.mode, self.current) {
            (SamplingMode::Trajectory, Some(s)) => s,
            _ => self.state_dist.sample(rng),
        };
        let t = self.sample_from(s, rng);
        self.current = Some(t.s_next);
        t
    }
}
