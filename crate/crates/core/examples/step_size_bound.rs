//! Sufficient step-size for mean stability, checked against the actual spectral radius
//! of the mean recursion.
//!
//! `cargo run --release --example step_size_bound`

use diffusion_gtd::analysis::{
    agent_moments, in_network_distribution, mean_stability, saddle_point, stack_alpha, step_size_bound, NetworkMoments,
    SimilarityParams,
};
use diffusion_gtd::mdp::{expected_reward, induced_transition_matrix};
use diffusion_gtd::network::{averaging_combination_matrix, Graph};
use diffusion_gtd::testbed;

fn main() -> diffusion_gtd::Result<()> {
    let (gamma, eta) = (0.9, 1.0);
    let inst = testbed::random_instance(8, 2, 3, 5, 0.7, 2);
    let net = averaging_combination_matrix(&Graph::ring(5))?;
    let tau = net.perron()?;
    let moments = inst
        .behaviors
        .iter()
        .map(|phi| agent_moments(&inst.mdp, &inst.target, phi, &inst.features, gamma, eta))
        .collect::<diffusion_gtd::Result<Vec<_>>>()?;
    let nm = NetworkMoments::new(&moments, net.combination(), &tau)?;
    let dists: Vec<_> = moments.iter().map(|m| m.d.clone()).collect();
    let d_bar = in_network_distribution(&tau, &dists)?.d_bar;
    let p = induced_transition_matrix(&inst.mdp, &inst.target)?;
    let r = expected_reward(&inst.mdp, &inst.target)?;
    let (theta, w) = saddle_point(&inst.features, &d_bar, &p, &r, gamma)?;
    let alpha_o = stack_alpha(&theta, &w);

    let b = step_size_bound(net.combination(), &nm.blocks, &tau, SimilarityParams::Auto)?;
    println!(
        "mu_o = {:.4e} (epsilon {:.3e}, beta {:.3e}, sigma {:.3e}; min Re lambda(G_bar) {:.4e}, |lambda_2(C)| {:.4})",
        b.mu_o, b.epsilon, b.beta, b.sigma, b.min_re_g_bar, b.lambda2_abs
    );
    for f in [0.25, 0.5, 1.0] {
        let ms = mean_stability(&nm, &alpha_o, f * b.mu_o)?;
        println!("rho at {f:4.2} mu_o = {:.10} (stable: {})", ms.rho, ms.stable);
    }
    for f in [10.0, 100.0, 1000.0] {
        let ms = mean_stability(&nm, &alpha_o, f * b.mu_o)?;
        println!("rho at {f:4} mu_o = {:.6}", ms.rho);
    }
    Ok(())
}
