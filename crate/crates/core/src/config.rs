//! TOML experiment configuration for the grid-world harness.
//!
//! Sections: `[world]`, `[features]`, `[policies]`, `[network]`, `[run]` and an optional
//! `[analysis]`. Every field has the full-scale default, so an empty file is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{FeatureSpec, GridWorldSpec, PolicySpec};
use crate::mdp::SamplingMode;
use crate::network::{averaging_combination_matrix, Graph, Mode, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Random,
    Ring,
    Complete,
    /// Explicit undirected edge list in `edges`.
    Edges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub topology: Topology,
    /// Seed of the random topology (independent of the run seed).
    pub seed: u64,
    /// Mean closed-neighborhood size targeted by the random generator.
    pub mean_neighborhood: f64,
    pub max_neighborhood: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { topology: Topology::Random, seed: 2013, mean_neighborhood: 4.0, max_neighborhood: 6, edges: Vec::new() }
    }
}

impl NetworkSpec {
    pub fn build(&self, agents: usize) -> Result<Network> {
        let graph = match self.topology {
            Topology::Random => {
                Graph::random_connected(agents, self.seed, self.mean_neighborhood, self.max_neighborhood)?
            }
            Topology::Ring => Graph::ring(agents),
            Topology::Complete => Graph::complete(agents),
            Topology::Edges => {
                let e: Vec<(usize, usize)> = self.edges.iter().map(|&[a, b]| (a, b)).collect();
                Graph::from_edges(agents, &e)?
            }
        };
        averaging_combination_matrix(&graph)
    }
}

/// Which target policies are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Myopic,
    Detour,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Myopic => "myopic",
            Target::Detour => "detour",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub gamma: f64,
    pub mu: f64,
    pub eta: f64,
    pub horizon: usize,
    pub replicas: usize,
    pub record_every: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub targets: Vec<Target>,
    pub sampling: SamplingMode,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            mu: 1e-3,
            eta: 0.1,
            horizon: 100_000,
            replicas: 50,
            record_every: 1000,
            seed: 0,
            modes: vec![Mode::Diffusion, Mode::Noncooperative, Mode::Centralized],
            targets: vec![Target::Myopic, Target::Detour],
            sampling: SamplingMode::Trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub exact_f: bool,
    pub msd_dim_cap: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { exact_f: true, msd_dim_cap: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: GridWorldSpec,
    pub features: FeatureSpec,
    pub policies: PolicySpec,
    pub network: NetworkSpec,
    pub run: RunSpec,
    pub analysis: AnalysisSpec,
}

impl ExperimentConfig {
    /// Parses TOML; messages carry the offending line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => Error::Parse { line: l, detail: e.message().to_string() },
                None => Error::Config(e.to_string()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if !(r.gamma > 0.0 && r.gamma < 1.0) {
            return Err(Error::Config(format!("run.gamma = {} must lie in (0, 1)", r.gamma)));
        }
        if !(r.mu > 0.0) || !(r.eta > 0.0) {
            return Err(Error::Config("run.mu and run.eta must be positive".into()));
        }
        if r.replicas == 0 || r.record_every == 0 {
            return Err(Error::Config("run.replicas and run.record_every must be positive".into()));
        }
        if r.modes.is_empty() || r.targets.is_empty() {
            return Err(Error::Config("run.modes and run.targets must be non-empty".into()));
        }
        if self.policies.territory_centers.is_empty() {
            return Err(Error::Config("policies.territory_centers must be non-empty".into()));
        }
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.policies.territory_centers.len()
    }
}
