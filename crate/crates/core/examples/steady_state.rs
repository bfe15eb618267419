//! Closed-form steady state of diffusion GTD2: the network fixed point, the mean bias
//! and the mean-square deviation, at a few step-sizes.
//!
//! `cargo run --release --example steady_state`

use diffusion_gtd::analysis::{full_report, AnalysisOptions};
use diffusion_gtd::network::{averaging_combination_matrix, Graph};
use diffusion_gtd::testbed;

fn main() -> diffusion_gtd::Result<()> {
    let inst = testbed::random_instance(5, 2, 2, 3, 0.8, 21);
    let c = averaging_combination_matrix(&Graph::from_edges(3, &[(0, 1), (1, 2)])?)?.combination().clone();
    println!("{:>8} {:>12} {:>12} {:>12}", "mu", "rho mean", "||bias||", "MSD");
    for mu in [1e-3, 3e-3, 1e-2, 3e-2] {
        let rep = full_report(
            &inst.mdp,
            &inst.target,
            &inst.behaviors,
            &inst.features,
            &c,
            &AnalysisOptions::new(mu, 0.5, 0.8),
        )?;
        let bias = rep.bias.as_ref().map_or(f64::NAN, |b| b.iter().map(|v| v * v).sum::<f64>().sqrt());
        println!("{mu:>8.0e} {:>12.8} {:>12.4e} {:>12.4e}", rep.rho_mean, bias, rep.msd_network.unwrap_or(f64::NAN));
    }
    let rep = full_report(
        &inst.mdp,
        &inst.target,
        &inst.behaviors,
        &inst.features,
        &c,
        &AnalysisOptions::new(1e-2, 0.5, 0.8),
    )?;
    println!("w_o = {:?}", rep.w_o);
    if let Some(nodes) = rep.msd_per_node {
        let s: Vec<String> = nodes.iter().map(|v| format!("{v:.4e}")).collect();
        println!("per-node MSD at mu = 1e-2: [{}]", s.join(", "));
    }
    Ok(())
}
