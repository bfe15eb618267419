//! Exact value surfaces of the two grid-world targets against what the features can
//! express: the least-squares fit and the network fixed point `X w_o`.
//!
//! `cargo run --example value_surfaces [config.toml]`

use diffusion_gtd::analysis::{agent_moments, in_network_distribution, saddle_point};
use diffusion_gtd::config::ExperimentConfig;
use diffusion_gtd::gridworld::{build_features, build_policies, build_world};
use diffusion_gtd::linalg::{pearson, pseudo_inverse};
use diffusion_gtd::mdp::{exact_value, expected_reward, induced_transition_matrix};

fn main() -> diffusion_gtd::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::load(p.as_ref())?.0,
        None => ExperimentConfig::default(),
    };
    let mdp = build_world(&cfg.world)?;
    let features = build_features(&cfg.features, &cfg.world)?;
    let pols = build_policies(&cfg.world, &cfg.policies)?;
    let net = cfg.network.build(cfg.num_agents())?;
    let tau = net.perron()?;
    let x = features.matrix();
    let boundary = cfg.world.predator_boundary();
    for (name, pi) in [("myopic", &pols.myopic), ("detour", &pols.detour)] {
        let v = exact_value(&mdp, pi, cfg.run.gamma)?;
        let min_b = boundary.iter().map(|&s| v[s]).fold(f64::INFINITY, f64::min);
        let fit = x * (pseudo_inverse(x, 1e-12) * &v);
        let dists = pols
            .behaviors
            .iter()
            .map(|phi| agent_moments(&mdp, pi, phi, &features, cfg.run.gamma, cfg.run.eta).map(|m| m.d))
            .collect::<diffusion_gtd::Result<Vec<_>>>()?;
        let d_bar = in_network_distribution(&tau, &dists)?.d_bar;
        let p = induced_transition_matrix(&mdp, pi)?;
        let r = expected_reward(&mdp, pi)?;
        let (_, w_o) = saddle_point(&features, &d_bar, &p, &r, cfg.run.gamma)?;
        let fixed = features.values(&w_o);
        println!(
            "{name:>7}: min over predator boundary {min_b:9.3}, corr(v, LS fit) {:.4}, corr(v, X w_o) {:.4}",
            pearson(&v, &fit),
            pearson(&v, &fixed)
        );
    }
    Ok(())
}
