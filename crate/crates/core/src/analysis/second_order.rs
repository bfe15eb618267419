//! Second-order moments of the error recursion and steady-state mean-square deviation.
//!
//! The recursion `at+ = A_i at + mu C_kron^T n` (random `A_i = C_kron^T (I - mu R_i)`)
//! gives `E||at+||^2_S = E||at||^2_{F S} + q^T vec(S)` in steady state, hence
//! `MSD_S = q^T (I - F)^{-1} vec(S)`. Everything here is an exact weighted sum over the
//! enumerated per-agent sample spaces, with agents independent of each other.

use nalgebra::{DMatrix, DVector};

use super::NetworkMoments;
use crate::error::{Error, Result};
use crate::gtd::{importance_weight, sample_moments, SampleRealization};
use crate::linalg;
use crate::mdp::{induced_transition_matrix, stationary_distribution, Mdp, Policy, STATIONARY_TOL};
use crate::objective::FeatureMap;

/// Default bound on `sum_k S * A * S` for exact enumeration.
pub const ENUMERATION_CAP: usize = 200_000;

/// Largest `(2MN)^2` for which `F` and `U` are materialized densely.
pub const DENSE_F_CAP: usize = 4096;

/// Per-agent list of `(probability, sample)` over all `(s, a, s')` with positive mass
/// under `d_k(s) phi_k(a|s) P(s'|s,a)`.
#[derive(Debug, Clone)]
pub struct SampleSpace {
    pub agents: Vec<Vec<(f64, SampleRealization)>>,
}

pub fn enumerate_sample_space(
    mdp: &Mdp,
    target: &Policy,
    behaviors: &[Policy],
    features: &FeatureMap,
    gamma: f64,
    cap: usize,
) -> Result<SampleSpace> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let size = behaviors.len() * s * a * s;
    if size > cap {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    let mut agents = Vec::with_capacity(behaviors.len());
    for phi in behaviors {
        let d = stationary_distribution(&induced_transition_matrix(mdp, phi)?, STATIONARY_TOL)?;
        let mut list = Vec::new();
        for st in 0..s {
            if d[st] == 0.0 {
                continue;
            }
            for act in 0..a {
                let pa = phi.prob(st, act);
                if pa == 0.0 {
                    continue;
                }
                let xi = importance_weight(target, phi, act, st)?;
                for (sn, pn) in mdp.successors(st, act) {
                    let sample = SampleRealization::new(
                        DVector::from_column_slice(features.row(st)),
                        DVector::from_column_slice(features.row(sn)),
                        mdp.reward(st, act, sn),
                        xi,
                        gamma,
                    )?;
                    list.push((d[st] * pa * pn, sample));
                }
            }
        }
        agents.push(list);
    }
    Ok(SampleSpace { agents })
}

/// Rank-two factors `G = xi (u1 v1^T + u2 v2^T)` of one per-sample coefficient matrix.
#[derive(Debug, Clone)]
struct Factored {
    p: f64,
    xi: f64,
    u1: DVector<f64>,
    u2: DVector<f64>,
    v1: DVector<f64>,
    v2: DVector<f64>,
}

impl Factored {
    fn new(p: f64, s: &SampleRealization, eta: f64) -> Self {
        let m = s.x.len();
        let z = DVector::zeros(m);
        Self {
            p,
            xi: s.xi,
            u1: linalg::vstack_vec(&[&s.x * eta, z.clone()]),
            u2: linalg::vstack_vec(&[z.clone(), -&s.delta]),
            v1: linalg::vstack_vec(&[s.x.clone(), s.delta.clone()]),
            v2: linalg::vstack_vec(&[s.x.clone(), z]),
        }
    }
}

/// Which weighted deviation to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// `(1/N) E||at||^2`.
    Network,
    /// `E||at_k||^2`.
    Node(usize),
}

impl Selector {
    /// `vec(Sigma)` for the selector.
    pub fn sigma(self, num_agents: usize, block: usize) -> DVector<f64> {
        let l = num_agents * block;
        let mut s = DMatrix::zeros(l, l);
        match self {
            Selector::Network => {
                s.fill_with_identity();
                s /= num_agents as f64;
            }
            Selector::Node(k) => {
                for i in 0..block {
                    s[(k * block + i, k * block + i)] = 1.0;
                }
            }
        }
        linalg::vec(&s)
    }
}

/// All second-order quantities at one step-size.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub mu: f64,
    pub num_agents: usize,
    pub block: usize,
    /// `C_kron^T (I - mu R)`.
    pub a: DMatrix<f64>,
    pub c_kron: DMatrix<f64>,
    /// `E[n n^T]`.
    pub r_n: DMatrix<f64>,
    pub n_bar: DVector<f64>,
    pub bias: DVector<f64>,
    /// `h = vec(h_mat)`.
    pub h_mat: DMatrix<f64>,
    /// `q = vec(q_mat) = h + 2 U bias`.
    pub q_mat: DMatrix<f64>,
    /// Enumerated `E[G]` per agent (equal to `G_k`).
    pub g_means: Vec<DMatrix<f64>>,
    /// `E[n_k (x) G_k]` per agent, kept for the dense `U`.
    joint_ng: Vec<DMatrix<f64>>,
    factored: Vec<Vec<Factored>>,
}

/// Builds `R_n`, `h`, `q` (and the pieces of `F`, `U`) from an enumerated sample space.
pub fn second_order_moments(
    space: &SampleSpace,
    moments: &NetworkMoments,
    alpha_o: &DVector<f64>,
    bias: &DVector<f64>,
    mu: f64,
    eta: f64,
) -> Result<SecondOrder> {
    let n = moments.num_agents();
    let b = moments.block();
    let l = n * b;
    if space.agents.len() != n || alpha_o.len() != b || bias.len() != l {
        return Err(Error::DimensionMismatch { context: "second-order inputs", expected: l, found: bias.len() });
    }
    let mut n_bar = DVector::zeros(l);
    let mut diag_nn = Vec::with_capacity(n);
    let mut joint_gan = Vec::with_capacity(n);
    let mut g_means = Vec::with_capacity(n);
    let mut joint_ng = Vec::with_capacity(n);
    let mut factored = Vec::with_capacity(n);
    let dense_u = l * l <= DENSE_F_CAP;
    for (k, samples) in space.agents.iter().enumerate() {
        let bias_k = bias.rows(k * b, b).into_owned();
        let mut nn = DMatrix::zeros(b, b);
        let mut gan = DMatrix::zeros(b, b);
        let mut g_mean = DMatrix::zeros(b, b);
        let mut nbar_k = DVector::zeros(b);
        let mut ng = if dense_u { DMatrix::zeros(b * b, b) } else { DMatrix::zeros(0, 0) };
        let mut fac = Vec::with_capacity(samples.len());
        for (p, s) in samples {
            let sm = sample_moments(s, eta);
            let nv = &sm.g_mat * alpha_o + &sm.g_vec;
            nn += (&nv * nv.transpose()) * *p;
            gan += ((&sm.g_mat * &bias_k) * nv.transpose()) * *p;
            g_mean += &sm.g_mat * *p;
            nbar_k += &nv * *p;
            if dense_u {
                ng += nv.kronecker(&sm.g_mat) * *p;
            }
            fac.push(Factored::new(*p, s, eta));
        }
        n_bar.rows_mut(k * b, b).copy_from(&nbar_k);
        diag_nn.push(nn);
        joint_gan.push(gan);
        g_means.push(g_mean);
        joint_ng.push(ng);
        factored.push(fac);
    }
    // R_n: independent agents factor through first moments off the diagonal
    let mut r_n = &n_bar * n_bar.transpose();
    for k in 0..n {
        r_n.view_mut((k * b, k * b), (b, b)).copy_from(&diag_nn[k]);
    }
    let c_kron = moments.c_kron();
    let h_mat = (c_kron.transpose() * &r_n * &c_kron) * (mu * mu);
    // E[(R bias) n^T]: block (l, k)
    let mut rbn = DMatrix::zeros(l, l);
    for lb in 0..n {
        let gb = &moments.blocks[lb] * bias.rows(lb * b, b);
        for kb in 0..n {
            let blk = if lb == kb { joint_gan[kb].clone() } else { &gb * n_bar.rows(kb * b, b).transpose() };
            rbn.view_mut((lb * b, kb * b), (b, b)).copy_from(&blk);
        }
    }
    let mu_mat = bias * n_bar.transpose() - rbn * mu;
    let q_mat = &h_mat + (c_kron.transpose() * mu_mat * &c_kron) * (2.0 * mu);
    Ok(SecondOrder {
        mu,
        num_agents: n,
        block: b,
        a: moments.mean_matrix(mu),
        c_kron,
        r_n,
        n_bar,
        bias: bias.clone(),
        h_mat,
        q_mat,
        g_means,
        joint_ng,
        factored,
    })
}

impl SecondOrder {
    pub fn dim(&self) -> usize {
        self.num_agents * self.block
    }

    pub fn h(&self) -> DVector<f64> {
        linalg::vec(&self.h_mat)
    }

    pub fn q(&self) -> DVector<f64> {
        linalg::vec(&self.q_mat)
    }

    /// `blockdiag_k E[D_k^T W_kk D_k]` with `D_k = G_k,i - G_k`.
    fn apply_k(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.block;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for k in 0..self.num_agents {
            let wk = w.view((k * b, k * b), (b, b)).into_owned();
            let mut acc = DMatrix::zeros(b, b);
            for f in &self.factored[k] {
                let wu1 = &wk * &f.u1;
                let wu2 = &wk * &f.u2;
                let s11 = f.u1.dot(&wu1);
                let s12 = f.u1.dot(&wu2);
                let s21 = f.u2.dot(&wu1);
                let s22 = f.u2.dot(&wu2);
                let c = f.p * f.xi * f.xi;
                acc.ger(c * s11, &f.v1, &f.v1, 1.0);
                acc.ger(c * s12, &f.v1, &f.v2, 1.0);
                acc.ger(c * s21, &f.v2, &f.v1, 1.0);
                acc.ger(c * s22, &f.v2, &f.v2, 1.0);
            }
            let g = &self.g_means[k];
            acc -= g.transpose() * &wk * g;
            out.view_mut((k * b, k * b), (b, b)).copy_from(&acc);
        }
        out
    }

    /// Adjoint of [`Self::apply_k`]: `blockdiag_k E[D_k Y_kk D_k^T]`.
    fn apply_k_adjoint(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.block;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for k in 0..self.num_agents {
            let yk = y.view((k * b, k * b), (b, b)).into_owned();
            let mut acc = DMatrix::zeros(b, b);
            for f in &self.factored[k] {
                let yv1 = &yk * &f.v1;
                let yv2 = &yk * &f.v2;
                let c = f.p * f.xi * f.xi;
                acc.ger(c * f.v1.dot(&yv1), &f.u1, &f.u1, 1.0);
                acc.ger(c * f.v1.dot(&yv2), &f.u1, &f.u2, 1.0);
                acc.ger(c * f.v2.dot(&yv1), &f.u2, &f.u1, 1.0);
                acc.ger(c * f.v2.dot(&yv2), &f.u2, &f.u2, 1.0);
            }
            let g = &self.g_means[k];
            acc -= g * &yk * g.transpose();
            out.view_mut((k * b, k * b), (b, b)).copy_from(&acc);
        }
        out
    }

    /// `F vec(Z)` as a matrix: `A^T Z A (+ mu^2 K(C Z C^T))`.
    pub fn apply_f(&self, z: &DMatrix<f64>, exact: bool) -> DMatrix<f64> {
        let mut out = self.a.transpose() * z * &self.a;
        if exact {
            let czc = &self.c_kron * z * self.c_kron.transpose();
            out += self.apply_k(&czc) * (self.mu * self.mu);
        }
        out
    }

    /// `F^T vec(Y)` as a matrix.
    pub fn apply_f_adjoint(&self, y: &DMatrix<f64>, exact: bool) -> DMatrix<f64> {
        let mut out = &self.a * y * self.a.transpose();
        if exact {
            let ky = self.apply_k_adjoint(y);
            out += (self.c_kron.transpose() * ky * &self.c_kron) * (self.mu * self.mu);
        }
        out
    }

    /// Dense `F`; the exact form adds `mu^2 E[D^T (x) D^T] (C_kron (x) C_kron)`.
    pub fn f_dense(&self, exact: bool) -> Result<DMatrix<f64>> {
        let l = self.dim();
        if l * l > DENSE_F_CAP {
            return Err(Error::TooLarge { dim: l * l, cap: DENSE_F_CAP });
        }
        let at = self.a.transpose();
        let mut f = at.kronecker(&at);
        if exact {
            let b = self.block;
            let ll = l * l;
            let mut k = DMatrix::zeros(ll, ll);
            for (ka, samples) in self.factored.iter().enumerate() {
                // E[G^T (x) G^T] - G^T (x) G^T for this agent
                let mut e = DMatrix::zeros(b * b, b * b);
                for f in samples {
                    let g = (&f.u1 * f.v1.transpose() + &f.u2 * f.v2.transpose()) * f.xi;
                    let gt = g.transpose();
                    e += gt.kronecker(&gt) * f.p;
                }
                let gt = self.g_means[ka].transpose();
                e -= gt.kronecker(&gt);
                let off = ka * b;
                for i in 0..b {
                    for j in 0..b {
                        for p in 0..b {
                            for q in 0..b {
                                // (X (x) Y)[(i*b + j), (p*b + q)] = X_ip Y_jq
                                let v = e[(i * b + j, p * b + q)];
                                if v != 0.0 {
                                    k[((off + i) * l + (off + j), (off + p) * l + (off + q))] = v;
                                }
                            }
                        }
                    }
                }
            }
            let cc = self.c_kron.kronecker(&self.c_kron);
            f += k * cc * (self.mu * self.mu);
        }
        Ok(f)
    }

    /// Dense `U = mu (C^T (x) C^T)(n_bar (x) I - mu E[n (x) R])`.
    pub fn u_dense(&self) -> Result<DMatrix<f64>> {
        let l = self.dim();
        let b = self.block;
        if l * l > DENSE_F_CAP {
            return Err(Error::TooLarge { dim: l * l, cap: DENSE_F_CAP });
        }
        let r = linalg::block_diag(&self.g_means);
        let mut e_nr = self.n_bar.kronecker(&r);
        for k in 0..self.num_agents {
            // same-agent correction: E[n_k (x) G_k,i] - n_bar_k (x) G_k
            let nk = self.n_bar.rows(k * b, b).into_owned();
            let corr = &self.joint_ng[k] - nk.kronecker(&self.g_means[k]);
            for i in 0..b {
                for j in 0..b {
                    for c in 0..b {
                        e_nr[((k * b + i) * l + (k * b + j), k * b + c)] += corr[(i * b + j, c)];
                    }
                }
            }
        }
        let ct = self.c_kron.transpose();
        let base = self.n_bar.kronecker(&DMatrix::identity(l, l)) - e_nr * self.mu;
        Ok(ct.kronecker(&ct) * base * self.mu)
    }

    /// `rho(F)`: dense when small, `rho(A)^2` for the approximation, otherwise power
    /// iteration on the positive operator.
    pub fn rho_f(&self, exact: bool) -> f64 {
        let l = self.dim();
        if l * l <= 1024 {
            if let Ok(f) = self.f_dense(exact) {
                return linalg::spectral_radius(&f);
            }
        }
        let rho_a = linalg::spectral_radius(&self.a);
        if !exact {
            return rho_a * rho_a;
        }
        let mut z = DMatrix::<f64>::identity(l, l) / l as f64;
        let iters = 2000;
        let mut log_sum = 0.0;
        for it in 0..iters {
            let next = self.apply_f(&z, true);
            let tr = next.trace();
            if tr <= 0.0 {
                return 0.0;
            }
            if it >= iters / 2 {
                log_sum += tr.ln();
            }
            z = next / tr;
        }
        (log_sum / (iters - iters / 2) as f64).exp()
    }

    /// Solves `Y = Q + F^T Y` (so `MSD_S = <Y, S>`) by Smith doubling on the
    /// `A Y A^T` part and an outer fixed point on the fourth-moment part.
    pub fn weighting_solution(&self, exact: bool) -> Result<DMatrix<f64>> {
        let rho_a = linalg::spectral_radius(&self.a);
        if rho_a >= 1.0 {
            return Err(Error::MeanSquareUnstable { rho: rho_a * rho_a });
        }
        // doubling powers A^(2^j)
        let mut powers = vec![self.a.clone()];
        loop {
            let last = powers.last().unwrap();
            if last.amax() < 1e-20 || powers.len() > 64 {
                break;
            }
            let next = last * last;
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::MeanSquareUnstable { rho: rho_a * rho_a });
            }
            powers.push(next);
        }
        let stein = |rhs: &DMatrix<f64>| {
            let mut y = rhs.clone();
            for p in &powers {
                y = &y + p * &y * p.transpose();
            }
            y
        };
        let mut y = stein(&self.q_mat);
        if !exact {
            return Ok(y);
        }
        for _ in 0..2000 {
            let ky = self.apply_k_adjoint(&y);
            let extra = (self.c_kron.transpose() * ky * &self.c_kron) * (self.mu * self.mu);
            let next = stein(&(&self.q_mat + extra));
            let change = (&next - &y).amax();
            let scale = next.amax().max(1e-300);
            y = next;
            if !y.iter().all(|v| v.is_finite()) {
                break;
            }
            if change <= 1e-15 * scale {
                return Ok(y);
            }
        }
        Err(Error::MeanSquareUnstable { rho: self.rho_f(true) })
    }

    /// Network MSD and per-node MSDs from a single adjoint solve.
    pub fn msd(&self, exact: bool) -> Result<(f64, Vec<f64>)> {
        let y = self.weighting_solution(exact)?;
        let b = self.block;
        let nodes: Vec<f64> = (0..self.num_agents).map(|k| (0..b).map(|i| y[(k * b + i, k * b + i)]).sum()).collect();
        let network = y.trace() / self.num_agents as f64;
        Ok((network, nodes))
    }
}

/// `q^T (I - F)^{-1} sigma` with dense `F`; errors when `rho(F) >= 1`.
pub fn steady_state_msd(
    f: &DMatrix<f64>,
    q: &DVector<f64>,
    selector: Selector,
    num_agents: usize,
    block: usize,
) -> Result<f64> {
    let rho = linalg::spectral_radius(f);
    if rho >= 1.0 {
        return Err(Error::MeanSquareUnstable { rho });
    }
    let n = f.nrows();
    let sigma = selector.sigma(num_agents, block);
    let system = DMatrix::identity(n, n) - f;
    let z = linalg::solve(&system, &sigma).ok_or(Error::MeanSquareUnstable { rho })?;
    Ok(q.dot(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{agent_moments, in_network_distribution, mean_bias, saddle_point, stack_alpha};
    use crate::mdp::{expected_reward, induced_transition_matrix};
    use crate::network::perron_eigenvector;
    use crate::testbed;

    fn build(mu: f64, spread: f64) -> (SampleSpace, NetworkMoments, DVector<f64>, SecondOrder) {
        let inst = testbed::random_instance(4, 2, 2, 2, spread, 21);
        let (gamma, eta) = (0.7, 0.5);
        let moms: Vec<_> = inst
            .behaviors
            .iter()
            .map(|phi| agent_moments(&inst.mdp, &inst.target, phi, &inst.features, gamma, eta).unwrap())
            .collect();
        let c = DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.3, 0.6]);
        let tau = perron_eigenvector(&c).unwrap();
        let nm = NetworkMoments::new(&moms, &c, &tau).unwrap();
        let dists: Vec<_> = moms.iter().map(|m| m.d.clone()).collect();
        let dn = in_network_distribution(&tau, &dists).unwrap();
        let p = induced_transition_matrix(&inst.mdp, &inst.target).unwrap();
        let r = expected_reward(&inst.mdp, &inst.target).unwrap();
        let (t, w) = saddle_point(&inst.features, &dn.d_bar, &p, &r, gamma).unwrap();
        let alpha_o = stack_alpha(&t, &w);
        let bias = mean_bias(&nm, &alpha_o, mu).unwrap();
        let space =
            enumerate_sample_space(&inst.mdp, &inst.target, &inst.behaviors, &inst.features, gamma, ENUMERATION_CAP)
                .unwrap();
        let so = second_order_moments(&space, &nm, &alpha_o, &bias, mu, eta).unwrap();
        (space, nm, alpha_o, so)
    }

    #[test]
    fn enumerated_means_match_expected_moments() {
        let (_, nm, _, so) = build(0.05, 0.6);
        for k in 0..2 {
            assert!((&so.g_means[k] - &nm.blocks[k]).amax() < 1e-12);
        }
    }

    #[test]
    fn r_n_is_symmetric_psd() {
        let (_, _, _, so) = build(0.05, 0.6);
        assert!((&so.r_n - so.r_n.transpose()).amax() < 1e-12);
        let ev = so.r_n.clone().symmetric_eigen().eigenvalues;
        assert!(ev.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn operator_forms_match_dense() {
        let (_, _, _, so) = build(0.05, 0.6);
        let l = so.dim();
        let z = DMatrix::from_fn(l, l, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0);
        for exact in [false, true] {
            let f = so.f_dense(exact).unwrap();
            let dense = linalg::unvec(&(&f * linalg::vec(&z)), l);
            assert!((dense - so.apply_f(&z, exact)).amax() < 1e-12);
            let dense_t = linalg::unvec(&(f.transpose() * linalg::vec(&z)), l);
            assert!((dense_t - so.apply_f_adjoint(&z, exact)).amax() < 1e-12);
        }
        let u = so.u_dense().unwrap();
        let q_dense = so.h() + u * &so.bias * 2.0;
        assert!((q_dense - so.q()).amax() < 1e-14);
    }

    #[test]
    fn exact_and_approx_f_differ_at_order_mu_squared() {
        let mut ratios = Vec::new();
        for mu in [0.04, 0.02, 0.01] {
            let (_, _, _, so) = build(mu, 0.6);
            let diff = (so.f_dense(true).unwrap() - so.f_dense(false).unwrap()).norm();
            ratios.push(diff / (mu * mu));
        }
        assert!((ratios[0] - ratios[2]).abs() <= 1e-9 * ratios[0]);
        assert!(ratios[0] > 0.0);
    }

    #[test]
    fn msd_operator_matches_dense_and_is_linear() {
        let (_, _, _, so) = build(0.05, 0.6);
        let f = so.f_dense(true).unwrap();
        let dense = steady_state_msd(&f, &so.q(), Selector::Network, 2, so.block).unwrap();
        let (net, nodes) = so.msd(true).unwrap();
        assert!((dense - net).abs() <= 1e-10 * dense.abs());
        assert!(net > 0.0);
        let avg = nodes.iter().sum::<f64>() / nodes.len() as f64;
        assert!((avg - net).abs() <= 1e-12 * net);
        let n0 = steady_state_msd(&f, &so.q(), Selector::Node(0), 2, so.block).unwrap();
        assert!((n0 - nodes[0]).abs() <= 1e-10 * n0);
    }

    #[test]
    fn deterministic_transitions_have_no_fourth_moment_term() {
        // one state, one action: the sample is the same every step
        let one = DMatrix::from_element(1, 1, 1.0);
        let mdp = Mdp::new(vec![one.clone()], vec![one * 2.0]).unwrap();
        let pi = Policy::uniform(1, 1);
        let features = FeatureMap::new(DMatrix::from_element(1, 1, 0.7)).unwrap();
        let space =
            enumerate_sample_space(&mdp, &pi, std::slice::from_ref(&pi), &features, 0.5, ENUMERATION_CAP).unwrap();
        assert_eq!(space.agents[0].len(), 1);
        let moms = vec![agent_moments(&mdp, &pi, &pi, &features, 0.5, 1.0).unwrap()];
        let nm = NetworkMoments::new(&moms, &DMatrix::identity(1, 1), &DVector::from_element(1, 1.0)).unwrap();
        let so = second_order_moments(&space, &nm, &DVector::zeros(2), &DVector::zeros(2), 0.1, 1.0).unwrap();
        assert_eq!(so.f_dense(true).unwrap(), so.f_dense(false).unwrap());
    }

    #[test]
    fn enumeration_cap_enforced() {
        let inst = testbed::random_instance(5, 2, 2, 2, 0.5, 1);
        let r = enumerate_sample_space(&inst.mdp, &inst.target, &inst.behaviors, &inst.features, 0.5, 10);
        assert!(matches!(r, Err(Error::EnumerationTooLarge { size: 100, cap: 10 })));
    }
}
