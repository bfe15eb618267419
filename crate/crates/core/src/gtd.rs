//! Single-agent off-policy GTD2: importance weights, the stochastic update and its
//! per-sample coefficient matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{Policy, Transition};
use crate::objective::FeatureMap;

/// `||alpha||_inf` above which a run counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Estimates `(theta, w)` of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub theta: DVector<f64>,
    pub w: DVector<f64>,
}

impl AgentParams {
    pub fn zeros(m: usize) -> Self {
        Self { theta: DVector::zeros(m), w: DVector::zeros(m) }
    }

    pub fn from_alpha(alpha: &DVector<f64>) -> Self {
        let m = alpha.len() / 2;
        Self { theta: alpha.rows(0, m).into_owned(), w: alpha.rows(m, m).into_owned() }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Stacked `col{theta, w}`.
    pub fn alpha(&self) -> DVector<f64> {
        let m = self.dim();
        DVector::from_fn(2 * m, |i, _| if i < m { self.theta[i] } else { self.w[i - m] })
    }

    pub fn is_diverged(&self) -> bool {
        is_diverged(self.theta.as_slice()) || is_diverged(self.w.as_slice())
    }
}

pub fn is_diverged(v: &[f64]) -> bool {
    v.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_THRESHOLD)
}

/// Everything one GTD2 step consumes from a transition.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRealization {
    pub x: DVector<f64>,
    pub x_next: DVector<f64>,
    /// `x - gamma x_next`.
    pub delta: DVector<f64>,
    pub reward: f64,
    pub xi: f64,
}

impl SampleRealization {
    pub fn new(x: DVector<f64>, x_next: DVector<f64>, reward: f64, xi: f64, gamma: f64) -> Result<Self> {
        if x.len() != x_next.len() {
            return Err(Error::DimensionMismatch {
                context: "feature lengths",
                expected: x.len(),
                found: x_next.len(),
            });
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::InvalidParameter(format!("importance weight {xi}")));
        }
        let delta = &x - &x_next * gamma;
        Ok(Self { x, x_next, delta, reward, xi })
    }

    pub fn from_transition(
        t: &Transition,
        features: &FeatureMap,
        target: &Policy,
        behavior: &Policy,
        gamma: f64,
    ) -> Result<Self> {
        let xi = importance_weight(target, behavior, t.a, t.s)?;
        SampleRealization::new(
            DVector::from_column_slice(features.row(t.s)),
            DVector::from_column_slice(features.row(t.s_next)),
            t.reward,
            xi,
            gamma,
        )
    }
}

/// `xi(a, s) = pi(a|s) / phi(a|s)`.
pub fn importance_weight(pi: &Policy, phi: &Policy, a: usize, s: usize) -> Result<f64> {
    let p = pi.prob(s, a);
    let q = phi.prob(s, a);
    if q > 0.0 {
        Ok(p / q)
    } else if p == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::SupportViolation { state: s, action: a })
    }
}

/// Checks that `pi(.|s) << phi(.|s)` everywhere and returns the full weight table.
pub fn importance_table(pi: &Policy, phi: &Policy) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(pi.num_states(), pi.num_actions());
    for s in 0..pi.num_states() {
        for a in 0..pi.num_actions() {
            out[(s, a)] = importance_weight(pi, phi, a, s)?;
        }
    }
    Ok(out)
}

/// `theta+ = theta - mu_theta x (x^T theta + delta^T w - r) xi`,
/// `w+ = w + mu_w delta x^T theta xi`.
pub fn gtd2_step(params: &AgentParams, sample: &SampleRealization, mu_theta: f64, mu_w: f64) -> AgentParams {
    let xt = sample.x.dot(&params.theta);
    let err = xt + sample.delta.dot(&params.w) - sample.reward;
    AgentParams {
        theta: &params.theta - &sample.x * (mu_theta * err * sample.xi),
        w: &params.w + &sample.delta * (mu_w * xt * sample.xi),
    }
}

/// In-place GTD2 on a stacked `alpha = [theta; w]` slice with raw feature rows.
#[inline]
pub fn gtd2_step_in_place(
    alpha: &mut [f64],
    x: &[f64],
    x_next: &[f64],
    reward: f64,
    xi: f64,
    gamma: f64,
    mu_theta: f64,
    mu_w: f64,
) {
    if xi == 0.0 {
        return;
    }
    let m = x.len();
    let (theta, w) = alpha.split_at_mut(m);
    let mut xt = 0.0;
    let mut dw = 0.0;
    for i in 0..m {
        xt += x[i] * theta[i];
        dw += (x[i] - gamma * x_next[i]) * w[i];
    }
    let a = mu_theta * (xt + dw - reward) * xi;
    let b = mu_w * xt * xi;
    for i in 0..m {
        theta[i] -= a * x[i];
        w[i] += b * (x[i] - gamma * x_next[i]);
    }
}

/// Per-sample coefficients, `alpha+ = alpha - mu (G alpha + g)` with `mu_theta = eta mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
}

pub fn sample_moments(sample: &SampleRealization, eta: f64) -> SampleMoments {
    let m = sample.x.len();
    let xi = sample.xi;
    let mut g_mat = DMatrix::zeros(2 * m, 2 * m);
    let mut g_vec = DVector::zeros(2 * m);
    for i in 0..m {
        for j in 0..m {
            g_mat[(i, j)] = eta * sample.x[i] * sample.x[j] * xi;
            g_mat[(i, m + j)] = eta * sample.x[i] * sample.delta[j] * xi;
            g_mat[(m + i, j)] = -sample.delta[i] * sample.x[j] * xi;
        }
        g_vec[i] = -eta * sample.x[i] * xi * sample.reward;
    }
    SampleMoments { g_mat, g_vec }
}
