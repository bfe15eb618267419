//! Projected Bellman error on a random instance: the minimizer, the objective along
//! a line through it, and deterministic Arrow-Hurwicz iterations converging to it.
//!
//! `cargo run --example projected_bellman`

use diffusion_gtd::mdp::{expected_reward, induced_transition_matrix, stationary_distribution, STATIONARY_TOL};
use diffusion_gtd::objective::{arrow_hurwicz_step, optimal_w, projected_bellman_error, ObjectiveContext};
use diffusion_gtd::testbed;
use nalgebra::DVector;

fn main() -> diffusion_gtd::Result<()> {
    let inst = testbed::random_instance(12, 3, 3, 1, 0.5, 4);
    let gamma = 0.9;
    let p = induced_transition_matrix(&inst.mdp, &inst.behaviors[0])?;
    let d = stationary_distribution(&p, STATIONARY_TOL)?;
    let p_pi = induced_transition_matrix(&inst.mdp, &inst.target)?;
    let r_pi = expected_reward(&inst.mdp, &inst.target)?;
    let ctx = ObjectiveContext::new(inst.features.clone(), d, p_pi, r_pi, gamma)?;

    let w_o = optimal_w(&ctx)?;
    println!("w_o = {:.5?}", w_o.as_slice());
    let dir = DVector::from_element(w_o.len(), 1.0);
    for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let w = &w_o + &dir * t;
        println!("J_PB(w_o + {t:4.1} * 1) = {:.6e}", projected_bellman_error(&w, &ctx)?);
    }

    let m = inst.features.dim();
    let (mut theta, mut w) = (DVector::zeros(m), DVector::zeros(m));
    for k in 0..=20_000 {
        if k % 5000 == 0 {
            println!("iter {k:>6}: ||w - w_o|| = {:.3e}", (&w - &w_o).norm());
        }
        (theta, w) = arrow_hurwicz_step(&theta, &w, &ctx, 0.05, 0.05);
    }
    Ok(())
}
