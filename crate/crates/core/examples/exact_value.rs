//! Stationary distribution and exact discounted value of a small chain.
//!
//! `cargo run --example exact_value`

use diffusion_gtd::mdp::{
    closed_class_count, exact_value, induced_transition_matrix, stationary_distribution, STATIONARY_TOL,
};
use diffusion_gtd::testbed;

fn main() -> diffusion_gtd::Result<()> {
    let inst = testbed::chain_instance(8, 3, 2, 1);
    let p = induced_transition_matrix(&inst.mdp, &inst.target)?;
    println!("closed classes under the target: {}", closed_class_count(&p));
    let d = stationary_distribution(&p, STATIONARY_TOL)?;
    let v = exact_value(&inst.mdp, &inst.target, 0.9)?;
    println!("{:>5} {:>10} {:>10}", "state", "d_pi", "v_pi");
    for s in 0..d.len() {
        println!("{s:>5} {:>10.5} {:>10.4}", d[s], v[s]);
    }
    // stationarity residual
    let res = (p.transpose() * &d - &d).amax();
    println!("max |P^T d - d| = {res:.2e}");
    Ok(())
}
