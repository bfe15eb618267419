//! `diffgtd run`: grid-world experiment driver writing CSV curves, value surfaces, an
//! optional analysis report and a run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{full_report, AnalysisOptions};
use crate::config::{ExperimentConfig, Target};
use crate::error::{Error, Result};
use crate::gridworld::{build_features, build_policies, build_world, GridPolicies, GridWorldSpec};
use crate::mdp::{exact_value, Policy, SamplingMode};
use crate::network::{run_experiment, ExperimentSetup, Mode, Trace};

#[derive(Debug, Parser)]
#[command(name = "diffgtd", version, about = "Diffusion off-policy GTD on the foraging grid world")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured experiment.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated modes: diffusion, noncooperative, centralized.
    #[arg(long, value_delimiter = ',')]
    pub mode: Option<Vec<Mode>>,
    /// Comma-separated target policies: myopic, detour.
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<TargetArg>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write the closed-form analysis report.
    #[arg(long)]
    pub analysis: bool,
    /// Draw every state from the behavior's stationary distribution.
    #[arg(long)]
    pub iid_sampling: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TargetArg {
    Myopic,
    Detour,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Myopic => Target::Myopic,
            TargetArg::Detour => Target::Detour,
        }
    }
}

/// One row of the printed summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub target: String,
    pub mode: String,
    pub median_final_jpb: f64,
    pub diverged: usize,
    pub learners: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    crate_name: &'a str,
    version: &'a str,
    config_sha256: String,
    config_path: Option<String>,
    seed: u64,
    horizon: usize,
    replicas: usize,
    sampling: SamplingMode,
    modes: Vec<&'a str>,
    targets: Vec<&'a str>,
    files: Vec<String>,
    summary: &'a [SummaryRow],
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Run(a) => match run(&a) {
            Ok(rows) => {
                print!("{}", summary_table(&rows));
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
    }
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<15} {:>18} {:>10}", "target", "mode", "median final J_PB", "diverged");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<15} {:>18.6e} {:>5}/{:<4}",
            r.target, r.mode, r.median_final_jpb, r.diverged, r.learners
        );
    }
    s
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: &RunArgs) {
    if let Some(m) = &a.mode {
        cfg.run.modes = m.clone();
    }
    if let Some(t) = &a.target {
        cfg.run.targets = t.iter().map(|&x| x.into()).collect();
    }
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(h) = a.horizon {
        cfg.run.horizon = h;
    }
    if let Some(r) = a.replicas {
        cfg.run.replicas = r;
    }
    if a.iid_sampling {
        cfg.run.sampling = SamplingMode::Iid;
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `row,c1..cK` with grid row 1 (bottom) first.
pub fn surface_csv(world: &GridWorldSpec, values: &DVector<f64>) -> String {
    let mut s = String::from("row");
    for c in 1..=world.cols {
        let _ = write!(s, ",c{c}");
    }
    s.push('\n');
    append_surface_rows(&mut s, world, values, None);
    s
}

fn append_surface_rows(s: &mut String, world: &GridWorldSpec, values: &DVector<f64>, prefix: Option<usize>) {
    for r in 1..=world.rows {
        if let Some(p) = prefix {
            let _ = write!(s, "{p},");
        }
        let _ = write!(s, "{r}");
        for c in 1..=world.cols {
            let _ = write!(s, ",{}", values[world.index(r, c)]);
        }
        s.push('\n');
    }
}

fn curve_csv(trace: &Trace) -> String {
    let learners = trace.num_learners();
    let mut s = String::from("iteration");
    for k in 0..learners {
        let _ = write!(s, ",jpb_{k}");
    }
    s.push_str(",mean_jpb,diverged\n");
    for (i, it) in trace.iterations.iter().enumerate() {
        let _ = write!(s, "{it}");
        for v in &trace.agent_jpb[i] {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{}", trace.mean_jpb[i], trace.diverged[i]);
    }
    s
}

/// Per-learner `X w` averaged over the replicas where that learner did not diverge.
fn estimated_surfaces_csv(world: &GridWorldSpec, features: &crate::objective::FeatureMap, trace: &Trace) -> String {
    let m = features.dim();
    let mut s = String::from("learner,row");
    for c in 1..=world.cols {
        let _ = write!(s, ",c{c}");
    }
    s.push('\n');
    for k in 0..trace.num_learners() {
        let ok: Vec<_> = trace.replicas.iter().filter(|r| !r.diverged[k]).collect();
        let values = if ok.is_empty() {
            DVector::from_element(world.num_states(), f64::NAN)
        } else {
            let mut w = DVector::zeros(m);
            for r in &ok {
                w += r.final_alpha[k].rows(m, m);
            }
            features.values(&(w / ok.len() as f64))
        };
        append_surface_rows(&mut s, world, &values, Some(k));
    }
    s
}

fn target_policy(p: &GridPolicies, t: Target) -> &Policy {
    match t {
        Target::Myopic => &p.myopic,
        Target::Detour => &p.detour,
    }
}

/// Runs the experiment described by `a`; returns the summary rows.
pub fn run(a: &RunArgs) -> Result<Vec<SummaryRow>> {
    let (mut cfg, text) = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let c = ExperimentConfig::default();
            let t = c.to_toml();
            (c, t)
        }
    };
    apply_overrides(&mut cfg, a);
    cfg.validate()?;
    let mdp = build_world(&cfg.world)?;
    let features = build_features(&cfg.features, &cfg.world)?;
    let policies = build_policies(&cfg.world, &cfg.policies)?;
    let network = cfg.network.build(cfg.num_agents())?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut emit = |name: String, body: &str| -> Result<()> {
        write_file(&a.out.join(&name), body)?;
        files.push(name);
        Ok(())
    };
    for &target in &cfg.run.targets {
        let pi = target_policy(&policies, target);
        let v = exact_value(&mdp, pi, cfg.run.gamma)?;
        emit(format!("exact_{}.csv", target.name()), &surface_csv(&cfg.world, &v))?;
        for &mode in &cfg.run.modes {
            let mut setup = ExperimentSetup::new(
                mdp.clone(),
                pi.clone(),
                policies.behaviors.clone(),
                features.clone(),
                network.combination().clone(),
                cfg.run.gamma,
                cfg.run.mu,
                cfg.run.eta,
            );
            setup.sampling = cfg.run.sampling;
            setup.horizon = cfg.run.horizon;
            setup.replicas = cfg.run.replicas;
            setup.record_every = cfg.run.record_every;
            setup.seed = cfg.run.seed;
            let trace = run_experiment(&setup, mode)?;
            emit(format!("curve_{}_{}.csv", target.name(), mode.name()), &curve_csv(&trace))?;
            emit(
                format!("surface_{}_{}.csv", target.name(), mode.name()),
                &estimated_surfaces_csv(&cfg.world, &features, &trace),
            )?;
            rows.push(SummaryRow {
                target: target.name().to_string(),
                mode: mode.name().to_string(),
                median_final_jpb: trace.median_final_jpb(),
                diverged: trace.final_diverged_count(),
                learners: trace.num_learners() * trace.replicas.len(),
            });
        }
        if a.analysis {
            let mut opts = AnalysisOptions::new(cfg.run.mu, cfg.run.eta, cfg.run.gamma);
            opts.exact_f = cfg.analysis.exact_f;
            opts.msd_dim_cap = cfg.analysis.msd_dim_cap;
            let rep = full_report(&mdp, pi, &policies.behaviors, &features, network.combination(), &opts)?;
            emit(format!("report_{}.json", target.name()), &serde_json::to_string_pretty(&rep)?)?;
        }
    }

    let hash = Sha256::digest(text.as_bytes());
    let manifest = Manifest {
        crate_name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        config_path: a.config.as_ref().map(|p| p.display().to_string()),
        seed: cfg.run.seed,
        horizon: cfg.run.horizon,
        replicas: cfg.run.replicas,
        sampling: cfg.run.sampling,
        modes: cfg.run.modes.iter().map(|m| m.name()).collect(),
        targets: cfg.run.targets.iter().map(|t| t.name()).collect(),
        files: files.clone(),
        summary: &rows,
    };
    write_file(&a.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(rows)
}
