//! Diffusion, non-cooperative and centralized GTD2 on a ring of agents with
//! heterogeneous behavior policies.
//!
//! `cargo run --release --example diffusion_network`

use diffusion_gtd::network::{averaging_combination_matrix, run_experiment, ExperimentSetup, Graph, Mode};
use diffusion_gtd::testbed;

fn main() -> diffusion_gtd::Result<()> {
    let agents = 6;
    let inst = testbed::random_instance(12, 3, 4, agents, 0.9, 5);
    let net = averaging_combination_matrix(&Graph::ring(agents))?;
    println!("Perron vector: {:.4?}", net.perron()?.as_slice());
    let mut setup = ExperimentSetup::new(
        inst.mdp,
        inst.target,
        inst.behaviors,
        inst.features,
        net.combination().clone(),
        0.9,
        5e-3,
        0.5,
    );
    setup.horizon = 40_000;
    setup.record_every = 10_000;
    setup.replicas = 8;
    setup.seed = 11;
    for mode in [Mode::Centralized, Mode::Diffusion, Mode::Noncooperative] {
        let trace = run_experiment(&setup, mode)?;
        let curve: Vec<String> = trace.mean_jpb.iter().map(|v| format!("{v:.3e}")).collect();
        println!(
            "{:>15}: mean J_PB at {:?} = [{}], median final {:.3e}",
            mode.name(),
            trace.iterations,
            curve.join(", "),
            trace.median_final_jpb()
        );
    }
    Ok(())
}
