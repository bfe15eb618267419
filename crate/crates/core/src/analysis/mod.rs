//! Closed-form steady-state analysis of the diffusion recursion.
//!
//! Error convention throughout: `alpha_tilde = alpha_o - alpha`, stacked over agents.

mod report;
mod second_order;
mod step_size;

pub use report::{full_report, AnalysisOptions, AnalysisReport};
pub use second_order::{
    enumerate_sample_space, second_order_moments, steady_state_msd, SampleSpace, SecondOrder, Selector, ENUMERATION_CAP,
};
pub use step_size::{step_size_bound, SimilarityParams, StepSizeBound};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{expected_reward, induced_transition_matrix, stationary_distribution, Mdp, Policy, STATIONARY_TOL};
use crate::objective::{optimal_w, FeatureMap, ObjectiveContext};

/// Expected coefficients of one agent: `E[alpha+] = alpha - mu (G alpha + g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMoments {
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    /// Stationary distribution of the agent's behavior policy.
    pub d: DVector<f64>,
}

impl AgentMoments {
    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.d)
    }

    pub fn dim(&self) -> usize {
        self.g_vec.len() / 2
    }
}

/// Moments from explicit chain quantities and a state weighting.
pub fn moments_from_parts(
    features: &FeatureMap,
    d: &DVector<f64>,
    p_pi: &DMatrix<f64>,
    r_pi: &DVector<f64>,
    gamma: f64,
    eta: f64,
) -> AgentMoments {
    let x = features.matrix();
    let m = x.ncols();
    let s = x.nrows();
    let dx = DMatrix::from_fn(s, m, |i, j| d[i] * x[(i, j)]);
    let bx = x - (p_pi * x) * gamma;
    let xtdx = x.transpose() * &dx;
    let b = dx.transpose() * &bx;
    let xtdr = dx.transpose() * r_pi;
    let mut g_mat = DMatrix::zeros(2 * m, 2 * m);
    g_mat.view_mut((0, 0), (m, m)).copy_from(&(xtdx * eta));
    g_mat.view_mut((0, m), (m, m)).copy_from(&(&b * eta));
    g_mat.view_mut((m, 0), (m, m)).copy_from(&(-b.transpose()));
    let mut g_vec = DVector::zeros(2 * m);
    g_vec.rows_mut(0, m).copy_from(&(xtdr * -eta));
    AgentMoments { g_mat, g_vec, d: d.clone() }
}

/// `G_k`, `g_k` for behavior `phi` (weighting by its stationary distribution).
pub fn agent_moments(
    mdp: &Mdp,
    pi: &Policy,
    phi: &Policy,
    features: &FeatureMap,
    gamma: f64,
    eta: f64,
) -> Result<AgentMoments> {
    let d = stationary_distribution(&induced_transition_matrix(mdp, phi)?, STATIONARY_TOL)?;
    let p_pi = induced_transition_matrix(mdp, pi)?;
    let r_pi = expected_reward(mdp, pi)?;
    Ok(moments_from_parts(features, &d, &p_pi, &r_pi, gamma, eta))
}

/// `sum_k tau_k d_k` plus whether every state receives positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct InNetworkDistribution {
    pub d_bar: DVector<f64>,
    pub full_support: bool,
}

pub fn in_network_distribution(tau: &DVector<f64>, dists: &[DVector<f64>]) -> Result<InNetworkDistribution> {
    if tau.len() != dists.len() || dists.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "tau vs agent distributions",
            expected: dists.len(),
            found: tau.len(),
        });
    }
    if tau.iter().any(|&t| t < 0.0) || (tau.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("tau must be a probability vector".into()));
    }
    let mut d_bar = DVector::zeros(dists[0].len());
    for (t, d) in tau.iter().zip(dists) {
        d_bar.axpy(*t, d, 1.0);
    }
    let full_support = d_bar.iter().all(|&v| v > 0.0);
    Ok(InNetworkDistribution { d_bar, full_support })
}

/// Saddle point of the network Lagrangian under weighting `d_bar`: `theta_o = 0`,
/// `w_o = (X^T D (I - gamma P) X)^{-1} X^T D r`.
pub fn saddle_point(
    features: &FeatureMap,
    d_bar: &DVector<f64>,
    p_pi: &DMatrix<f64>,
    r_pi: &DVector<f64>,
    gamma: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let ctx = ObjectiveContext::new(features.clone(), d_bar.clone(), p_pi.clone(), r_pi.clone(), gamma)?;
    let w = optimal_w(&ctx)?;
    Ok((DVector::zeros(features.dim()), w))
}

/// Stacked network quantities of the mean recursion.
#[derive(Debug, Clone)]
pub struct NetworkMoments {
    /// `G_k` per agent.
    pub blocks: Vec<DMatrix<f64>>,
    /// `g_k` per agent.
    pub g_vecs: Vec<DVector<f64>>,
    pub c: DMatrix<f64>,
    pub tau: DVector<f64>,
    /// `sum_k tau_k G_k`.
    pub g_bar: DMatrix<f64>,
}

impl NetworkMoments {
    pub fn new(moments: &[AgentMoments], c: &DMatrix<f64>, tau: &DVector<f64>) -> Result<Self> {
        let n = moments.len();
        if n == 0 || c.shape() != (n, n) || tau.len() != n {
            return Err(Error::DimensionMismatch { context: "network moments", expected: n, found: c.nrows() });
        }
        let two_m = moments[0].g_vec.len();
        let mut g_bar = DMatrix::zeros(two_m, two_m);
        for (t, mk) in tau.iter().zip(moments) {
            g_bar += &mk.g_mat * *t;
        }
        Ok(Self {
            blocks: moments.iter().map(|m| m.g_mat.clone()).collect(),
            g_vecs: moments.iter().map(|m| m.g_vec.clone()).collect(),
            c: c.clone(),
            tau: tau.clone(),
            g_bar,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.blocks.len()
    }

    /// `2M`.
    pub fn block(&self) -> usize {
        self.g_vecs[0].len()
    }

    /// `2MN`.
    pub fn dim(&self) -> usize {
        self.block() * self.num_agents()
    }

    /// Block-diagonal `R = blockdiag{G_k}`.
    pub fn r(&self) -> DMatrix<f64> {
        linalg::block_diag(&self.blocks)
    }

    /// Stack `col{G_k}`.
    pub fn g_cal(&self) -> DMatrix<f64> {
        linalg::vstack(&self.blocks)
    }

    pub fn g(&self) -> DVector<f64> {
        linalg::vstack_vec(&self.g_vecs)
    }

    /// `C ⊗ I_{2M}`.
    pub fn c_kron(&self) -> DMatrix<f64> {
        linalg::kron_identity(&self.c, self.block())
    }

    /// `C_kron^T (I - mu R)`.
    pub fn mean_matrix(&self, mu: f64) -> DMatrix<f64> {
        let l = self.dim();
        self.c_kron().transpose() * (DMatrix::identity(l, l) - self.r() * mu)
    }

    /// Applies `C_kron^T (I - mu R)` without forming it.
    pub fn apply_mean(&self, mu: f64, x: &DVector<f64>) -> DVector<f64> {
        let b = self.block();
        let n = self.num_agents();
        let mut y = x.clone();
        for k in 0..n {
            let xk = x.rows(k * b, b);
            let gx = &self.blocks[k] * xk;
            y.rows_mut(k * b, b).axpy(-mu, &gx, 1.0);
        }
        let mut out = DVector::zeros(x.len());
        for k in 0..n {
            for l in 0..n {
                let c = self.c[(l, k)];
                if c != 0.0 {
                    out.rows_mut(k * b, b).axpy(c, &y.rows(l * b, b), 1.0);
                }
            }
        }
        out
    }

    /// `G_cal alpha_o + g`, the per-agent gradient at the network saddle point.
    pub fn drift(&self, alpha_o: &DVector<f64>) -> DVector<f64> {
        let b = self.block();
        let mut out = DVector::zeros(self.dim());
        for k in 0..self.num_agents() {
            out.rows_mut(k * b, b).copy_from(&(&self.blocks[k] * alpha_o + &self.g_vecs[k]));
        }
        out
    }
}

/// Spectral radius of the mean recursion and, when stable, the steady-state bias.
#[derive(Debug, Clone)]
pub struct MeanStability {
    pub rho: f64,
    pub stable: bool,
    pub bias: Option<DVector<f64>>,
}

/// Largest dimension for which `rho` is computed with a dense eigen-solver.
pub const DENSE_SPECTRAL_CAP: usize = 512;

pub fn mean_stability(moments: &NetworkMoments, alpha_o: &DVector<f64>, mu: f64) -> Result<MeanStability> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("step-size must be positive".into()));
    }
    let l = moments.dim();
    let rho = if l <= DENSE_SPECTRAL_CAP {
        linalg::spectral_radius(&moments.mean_matrix(mu))
    } else {
        linalg::spectral_radius_power(l, 4000, |x| moments.apply_mean(mu, x))
    };
    let stable = rho < 1.0;
    let bias = if stable { Some(mean_bias(moments, alpha_o, mu)?) } else { None };
    Ok(MeanStability { rho, stable, bias })
}

/// `alpha_tilde_inf = (I - A)^{-1} mu C_kron^T (G_cal alpha_o + g)`, `A = C_kron^T (I - mu R)`.
pub fn mean_bias(moments: &NetworkMoments, alpha_o: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    let l = moments.dim();
    let b = moments.block();
    let n = moments.num_agents();
    let drift = moments.drift(alpha_o);
    let mut rhs = DVector::zeros(l);
    for k in 0..n {
        for j in 0..n {
            let c = moments.c[(j, k)];
            if c != 0.0 {
                rhs.rows_mut(k * b, b).axpy(mu * c, &drift.rows(j * b, b), 1.0);
            }
        }
    }
    if rhs.amax() == 0.0 {
        return Ok(DVector::zeros(l));
    }
    let a = DMatrix::identity(l, l) - moments.mean_matrix(mu);
    linalg::solve(&a, &rhs).ok_or(Error::MeanUnstable { rho: f64::NAN })
}

/// On-policy reference `w^pi`: the minimizer of `J_PB` weighted by the target's own
/// stationary distribution.
pub fn on_policy_solution(mdp: &Mdp, pi: &Policy, features: &FeatureMap, gamma: f64) -> Result<DVector<f64>> {
    let p = induced_transition_matrix(mdp, pi)?;
    let d = stationary_distribution(&p, STATIONARY_TOL)?;
    let r = expected_reward(mdp, pi)?;
    saddle_point(features, &d, &p, &r, gamma).map(|(_, w)| w)
}

/// Stack `col{0_M, w}`.
pub fn stack_alpha(theta: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    linalg::vstack_vec(&[theta.clone(), w.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::perron_eigenvector;
    use crate::testbed;

    fn setup(spread: f64, seed: u64) -> (testbed::Instance, Vec<AgentMoments>, DMatrix<f64>, DVector<f64>) {
        let inst = testbed::random_instance(6, 2, 2, 3, spread, seed);
        let moms: Vec<AgentMoments> = inst
            .behaviors
            .iter()
            .map(|phi| agent_moments(&inst.mdp, &inst.target, phi, &inst.features, 0.8, 0.5).unwrap())
            .collect();
        let c = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.0, 0.5, 0.4, 0.5, 0.0, 0.3, 0.5]);
        let tau = perron_eigenvector(&c).unwrap();
        (inst, moms, c, tau)
    }

    #[test]
    fn tabular_uniform_blocks_by_hand() {
        // X = I, symmetric 2-state chain, uniform behavior: D = I/2
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let r = DVector::from_vec(vec![1.0, -1.0]);
        let f = FeatureMap::new(DMatrix::identity(2, 2)).unwrap();
        let d = DVector::from_element(2, 0.5);
        let m = moments_from_parts(&f, &d, &p, &r, 0.5, 2.0);
        // X^T D X = I/2, X^T D (I - 0.5 P) X = (I - 0.5 P)/2 = [[0.375,-0.125],[-0.125,0.375]]
        let b = DMatrix::from_row_slice(2, 2, &[0.375, -0.125, -0.125, 0.375]);
        assert!((m.g_mat.view((0, 0), (2, 2)) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
        assert!((m.g_mat.view((0, 2), (2, 2)) - &b * 2.0).amax() < 1e-15);
        assert!((m.g_mat.view((2, 0), (2, 2)) + b.transpose()).amax() < 1e-15);
        assert_eq!(m.g_mat.view((2, 2), (2, 2)).amax(), 0.0);
        assert!((m.g_vec - DVector::from_vec(vec![-1.0, 1.0, 0.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn zero_eta_kills_top_half() {
        let (inst, _, _, _) = setup(0.5, 1);
        let m = agent_moments(&inst.mdp, &inst.target, &inst.behaviors[0], &inst.features, 0.8, 0.0).unwrap();
        assert_eq!(m.g_mat.rows(0, 2).amax(), 0.0);
        assert_eq!(m.g_vec.amax(), 0.0);
    }

    #[test]
    fn in_network_distribution_cases() {
        let d1 = DVector::from_vec(vec![0.5, 0.5, 0.0, 0.0]);
        let d2 = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.5]);
        let half = DVector::from_vec(vec![0.5, 0.5]);
        let both = in_network_distribution(&half, &[d1.clone(), d2.clone()]).unwrap();
        assert!(both.full_support);
        let first = in_network_distribution(&DVector::from_vec(vec![1.0, 0.0]), &[d1.clone(), d2]).unwrap();
        assert_eq!(first.d_bar, d1);
        assert!(!first.full_support);
    }

    #[test]
    fn g_bar_two_ways() {
        let (_, moms, c, tau) = setup(0.7, 2);
        let nm = NetworkMoments::new(&moms, &c, &tau).unwrap();
        let b = nm.block();
        let left = linalg::kron_identity(&DMatrix::from_row_slice(1, 3, tau.as_slice()), b);
        let right = linalg::kron_identity(&DMatrix::from_element(3, 1, 1.0), b);
        let two_way = left * nm.r() * right;
        assert!((two_way - &nm.g_bar).amax() < 1e-12);
        for z in linalg::eigenvalues(&nm.g_bar) {
            assert!(z.re > 0.0);
        }
    }

    #[test]
    fn saddle_conditions_and_bias_fixed_point() {
        let (inst, moms, c, tau) = setup(0.7, 3);
        let nm = NetworkMoments::new(&moms, &c, &tau).unwrap();
        let dists: Vec<_> = moms.iter().map(|m| m.d.clone()).collect();
        let dn = in_network_distribution(&tau, &dists).unwrap();
        let p = induced_transition_matrix(&inst.mdp, &inst.target).unwrap();
        let r = expected_reward(&inst.mdp, &inst.target).unwrap();
        let (theta, w) = saddle_point(&inst.features, &dn.d_bar, &p, &r, 0.8).unwrap();
        let alpha_o = stack_alpha(&theta, &w);
        let total: DVector<f64> =
            (0..3).fold(DVector::zeros(4), |acc, k| acc + (&moms[k].g_mat * &alpha_o + &moms[k].g_vec) * tau[k]);
        assert!(total.amax() < 1e-9);
        let mu = 0.01;
        let st = mean_stability(&nm, &alpha_o, mu).unwrap();
        assert!(st.stable);
        let bias = st.bias.unwrap();
        assert!(bias.amax() > 0.0);
        let fixed = nm.mean_matrix(mu) * &bias + nm.c_kron().transpose() * nm.drift(&alpha_o) * mu;
        assert!((fixed - &bias).amax() < 1e-9);
        // the operator form matches the dense matrix
        assert!((nm.apply_mean(mu, &bias) - nm.mean_matrix(mu) * &bias).amax() < 1e-14);
    }

    #[test]
    fn identical_behaviors_are_unbiased() {
        let (inst, _, c, tau) = setup(0.0, 4);
        let moms: Vec<_> = (0..3)
            .map(|_| agent_moments(&inst.mdp, &inst.target, &inst.behaviors[0], &inst.features, 0.8, 0.5).unwrap())
            .collect();
        let nm = NetworkMoments::new(&moms, &c, &tau).unwrap();
        let p = induced_transition_matrix(&inst.mdp, &inst.target).unwrap();
        let r = expected_reward(&inst.mdp, &inst.target).unwrap();
        let (t, w) = saddle_point(&inst.features, &moms[0].d, &p, &r, 0.8).unwrap();
        let st = mean_stability(&nm, &stack_alpha(&t, &w), 0.01).unwrap();
        assert!(st.bias.unwrap().amax() <= 1e-12);
    }
}
