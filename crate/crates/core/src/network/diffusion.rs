use nalgebra::DMatrix;

use crate::gtd::{gtd2_step, AgentParams, SampleRealization};
use crate::mdp::Policy;
use crate::objective::FeatureMap;

/// Estimates of every agent plus what they share.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub agents: Vec<AgentParams>,
    pub behaviors: Vec<Policy>,
    pub target: Policy,
    pub features: FeatureMap,
    pub gamma: f64,
    pub mu: f64,
    pub eta: f64,
}

impl NetworkState {
    /// Zero-initialized agents.
    pub fn new(behaviors: Vec<Policy>, target: Policy, features: FeatureMap, gamma: f64, mu: f64, eta: f64) -> Self {
        let m = features.dim();
        Self { agents: vec![AgentParams::zeros(m); behaviors.len()], behaviors, target, features, gamma, mu, eta }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// One synchronous adapt-then-combine round: each agent takes a GTD2 step on its own
/// sample (`mu_theta = eta mu`, `mu_w = mu`), then `alpha_k = sum_l c_lk psi_l`.
pub fn diffusion_gtd_round(state: &NetworkState, samples: &[SampleRealization], c: &DMatrix<f64>) -> NetworkState {
    assert_eq!(samples.len(), state.len(), "one sample per agent");
    let n = state.len();
    assert_eq!(c.shape(), (n, n), "combination matrix size");
    let psi: Vec<AgentParams> =
        state.agents.iter().zip(samples).map(|(a, s)| gtd2_step(a, s, state.eta * state.mu, state.mu)).collect();
    let m = state.features.dim();
    let agents = (0..n)
        .map(|k| {
            let mut out = AgentParams::zeros(m);
            for (l, p) in psi.iter().enumerate() {
                let w = c[(l, k)];
                if w != 0.0 {
                    out.theta.axpy(w, &p.theta, 1.0);
                    out.w.axpy(w, &p.w, 1.0);
                }
            }
            out
        })
        .collect();
    NetworkState { agents, ..state.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn setup() -> (NetworkState, Vec<SampleRealization>) {
        let features = FeatureMap::new(DMatrix::from_row_slice(2, 1, &[1.0, 2.0])).unwrap();
        let pi = Policy::uniform(2, 1);
        let mut st = NetworkState::new(vec![pi.clone(), pi.clone()], pi, features, 0.5, 0.1, 1.0);
        st.agents[0] = AgentParams::from_alpha(&DVector::from_vec(vec![1.0, 2.0]));
        st.agents[1] = AgentParams::from_alpha(&DVector::from_vec(vec![-1.0, 0.0]));
        let s0 =
            SampleRealization::new(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0]), 1.0, 1.0, 0.5).unwrap();
        let s1 =
            SampleRealization::new(DVector::from_vec(vec![2.0]), DVector::from_vec(vec![1.0]), -1.0, 2.0, 0.5).unwrap();
        (st, vec![s0, s1])
    }

    #[test]
    fn hand_simulated_round() {
        // agent 0: x=1, delta=0, err = 1*1 + 0*2 - 1 = 0  -> theta 1, w = 2 + 0.1*0*1 = 2
        // agent 1: x=2, delta=1.5, err = -2 + 0 + 1 = -1 -> theta = -1 - 0.1*2*(-1)*2 = -0.6
        //          w = 0 + 0.1*1.5*(-2)*2 = -0.6
        let (st, samples) = setup();
        let c = DMatrix::from_row_slice(2, 2, &[0.75, 0.5, 0.25, 0.5]);
        let out = diffusion_gtd_round(&st, &samples, &c);
        let t0 = 0.75 * 1.0 + 0.25 * -0.6;
        let w0 = 0.75 * 2.0 + 0.25 * -0.6;
        let t1 = 0.5 * 1.0 + 0.5 * -0.6;
        assert!((out.agents[0].theta[0] - t0).abs() < 1e-15);
        assert!((out.agents[0].w[0] - w0).abs() < 1e-15);
        assert!((out.agents[1].theta[0] - t1).abs() < 1e-15);
    }

    #[test]
    fn identity_combination_is_independent_gtd2() {
        let (st, samples) = setup();
        let out = diffusion_gtd_round(&st, &samples, &DMatrix::identity(2, 2));
        for k in 0..2 {
            assert_eq!(out.agents[k], gtd2_step(&st.agents[k], &samples[k], 0.1, 0.1));
        }
    }
}
