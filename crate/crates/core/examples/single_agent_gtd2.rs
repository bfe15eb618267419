//! One off-policy GTD2 learner on a trajectory: ||w - w_o|| and J_PB along the run, and
//! the time average of `w` over the second half.
//!
//! `cargo run --release --example single_agent_gtd2`

use diffusion_gtd::gtd::{gtd2_step, AgentParams, SampleRealization};
use diffusion_gtd::mdp::{
    expected_reward, induced_transition_matrix, stationary_distribution, SamplingMode, TransitionSampler,
    STATIONARY_TOL,
};
use diffusion_gtd::objective::{optimal_w, projected_bellman_error, ObjectiveContext};
use diffusion_gtd::testbed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> diffusion_gtd::Result<()> {
    let inst = testbed::random_instance(10, 3, 3, 1, 0.6, 9);
    let (gamma, mu, eta) = (0.9, 2e-3, 1.0);
    let phi = &inst.behaviors[0];
    let d = stationary_distribution(&induced_transition_matrix(&inst.mdp, phi)?, STATIONARY_TOL)?;
    let ctx = ObjectiveContext::new(
        inst.features.clone(),
        d.clone(),
        induced_transition_matrix(&inst.mdp, &inst.target)?,
        expected_reward(&inst.mdp, &inst.target)?,
        gamma,
    )?;
    let w_o = optimal_w(&ctx)?;

    let mut sampler = TransitionSampler::new(&inst.mdp, phi, &d, SamplingMode::Trajectory)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut params = AgentParams::zeros(inst.features.dim());
    let mut avg = nalgebra::DVector::zeros(inst.features.dim());
    let horizon = 200_000usize;
    for i in 0..=horizon {
        if i % 25_000 == 0 {
            println!(
                "iter {i:>7}: ||w - w_o|| = {:.4e}, J_PB = {:.4e}",
                (&params.w - &w_o).norm(),
                projected_bellman_error(&params.w, &ctx)?
            );
        }
        let t = sampler.next(&mut rng);
        let sample = SampleRealization::from_transition(&t, &inst.features, &inst.target, phi, gamma)?;
        params = gtd2_step(&params, &sample, eta * mu, mu);
        if i >= horizon / 2 {
            avg += &params.w;
        }
    }
    avg /= (horizon - horizon / 2 + 1) as f64;
    println!("second-half average: ||w - w_o|| = {:.4e}", (&avg - &w_o).norm());
    Ok(())
}
