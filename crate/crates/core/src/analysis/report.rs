//! One-shot assembly of every closed-form quantity for a configuration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    agent_moments, enumerate_sample_space, in_network_distribution, mean_stability, on_policy_solution, saddle_point,
    second_order_moments, stack_alpha, step_size_bound, NetworkMoments, SimilarityParams, StepSizeBound,
    ENUMERATION_CAP,
};
use crate::error::{Error, Result};
use crate::mdp::{expected_reward, induced_transition_matrix, Mdp, Policy};
use crate::network::perron_eigenvector;
use crate::objective::{optimal_w, FeatureMap, ObjectiveContext};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub mu: f64,
    pub eta: f64,
    pub gamma: f64,
    /// Include the fourth-moment term of `F` (needs an enumerable sample space).
    pub exact_f: bool,
    /// MSD is skipped when `2MN` exceeds this.
    pub msd_dim_cap: usize,
    pub enumeration_cap: usize,
    /// Overrides the Perron vector; bias guarantees no longer apply.
    pub tau: Option<DVector<f64>>,
    pub similarity: SimilarityParams,
}

impl AnalysisOptions {
    pub fn new(mu: f64, eta: f64, gamma: f64) -> Self {
        Self {
            mu,
            eta,
            gamma,
            exact_f: true,
            msd_dim_cap: 256,
            enumeration_cap: ENUMERATION_CAP,
            tau: None,
            similarity: SimilarityParams::Auto,
        }
    }
}

/// Serializable summary; `None` marks quantities that are undefined or were skipped
/// (the matching `*_note` says why).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub num_agents: usize,
    pub feature_dim: usize,
    pub mu: f64,
    pub eta: f64,
    pub gamma: f64,
    pub tau: Vec<f64>,
    pub tau_overridden: bool,
    pub d_bar: Vec<f64>,
    pub d_bar_full_support: bool,
    pub theta_o: Vec<f64>,
    pub w_o: Vec<f64>,
    pub alpha_o: Vec<f64>,
    /// Per agent: `X^T D_k (I - gamma P) X` is singular.
    pub agent_singular_b: Vec<bool>,
    /// Some agent cannot identify `w` alone while the network can.
    pub cooperation_required: bool,
    pub rho_mean: f64,
    pub mean_stable: bool,
    pub bias: Option<Vec<f64>>,
    pub rho_f: Option<f64>,
    pub msd_exact: bool,
    pub msd_network: Option<f64>,
    pub msd_per_node: Option<Vec<f64>>,
    pub msd_note: Option<String>,
    pub mu_o: Option<f64>,
    pub step_size: Option<StepSizeBound>,
    pub step_size_note: Option<String>,
    pub w_pi: Option<Vec<f64>>,
    pub w_pi_note: Option<String>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn full_report(
    mdp: &Mdp,
    target: &Policy,
    behaviors: &[Policy],
    features: &FeatureMap,
    c: &DMatrix<f64>,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let n = behaviors.len();
    let m = features.dim();
    let (gamma, eta, mu) = (opts.gamma, opts.eta, opts.mu);
    let moments = behaviors
        .iter()
        .map(|phi| agent_moments(mdp, target, phi, features, gamma, eta))
        .collect::<Result<Vec<_>>>()?;
    let tau = match &opts.tau {
        Some(t) => t.clone(),
        None => perron_eigenvector(c)?,
    };
    let dists: Vec<DVector<f64>> = moments.iter().map(|mk| mk.d.clone()).collect();
    let dn = in_network_distribution(&tau, &dists)?;
    let p_pi = induced_transition_matrix(mdp, target)?;
    let r_pi = expected_reward(mdp, target)?;
    let (theta_o, w_o) = saddle_point(features, &dn.d_bar, &p_pi, &r_pi, gamma)?;
    let alpha_o = stack_alpha(&theta_o, &w_o);

    let mut agent_singular_b = Vec::with_capacity(n);
    for d in &dists {
        let ctx = ObjectiveContext::new(features.clone(), d.clone(), p_pi.clone(), r_pi.clone(), gamma)?;
        agent_singular_b.push(matches!(optimal_w(&ctx), Err(Error::SingularSystem)));
    }
    let cooperation_required = agent_singular_b.iter().any(|&b| b);

    let nm = NetworkMoments::new(&moments, c, &tau)?;
    let ms = mean_stability(&nm, &alpha_o, mu)?;

    let (mut rho_f, mut msd_network, mut msd_per_node, mut msd_note) = (None, None, None, None);
    let l = nm.dim();
    if !ms.stable {
        msd_note = Some("mean recursion unstable".to_string());
    } else if l > opts.msd_dim_cap {
        msd_note = Some(format!("2MN = {l} exceeds the MSD cap {}", opts.msd_dim_cap));
    } else {
        match enumerate_sample_space(mdp, target, behaviors, features, gamma, opts.enumeration_cap) {
            Ok(space) => {
                let bias = ms.bias.clone().expect("stable implies bias");
                let so = second_order_moments(&space, &nm, &alpha_o, &bias, mu, eta)?;
                let rf = so.rho_f(opts.exact_f);
                rho_f = Some(rf);
                match so.msd(opts.exact_f) {
                    Ok((net, nodes)) => {
                        msd_network = Some(net);
                        msd_per_node = Some(nodes);
                    }
                    Err(e) => msd_note = Some(e.to_string()),
                }
            }
            Err(e) => msd_note = Some(e.to_string()),
        }
    }

    let (step_size, step_size_note) = match step_size_bound(c, &nm.blocks, &tau, opts.similarity) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (w_pi, w_pi_note) = match on_policy_solution(mdp, target, features, gamma) {
        Ok(w) => (Some(to_vec(&w)), None),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(AnalysisReport {
        num_agents: n,
        feature_dim: m,
        mu,
        eta,
        gamma,
        tau: to_vec(&tau),
        tau_overridden: opts.tau.is_some(),
        d_bar: to_vec(&dn.d_bar),
        d_bar_full_support: dn.full_support,
        theta_o: to_vec(&theta_o),
        w_o: to_vec(&w_o),
        alpha_o: to_vec(&alpha_o),
        agent_singular_b,
        cooperation_required,
        rho_mean: ms.rho,
        mean_stable: ms.stable,
        bias: ms.bias.as_ref().map(to_vec),
        rho_f,
        msd_exact: opts.exact_f,
        msd_network,
        msd_per_node,
        msd_note,
        mu_o: step_size.as_ref().map(|b| b.mu_o),
        step_size,
        step_size_note,
        w_pi,
        w_pi_note,
    })
}
