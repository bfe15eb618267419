//! The foraging grid world driven through the library entry point of the `diffgtd`
//! binary, with a short horizon. Writes into `out/example_gridworld`.
//!
//! `cargo run --release --example gridworld_experiment [config.toml]`

use clap::Parser;
use diffusion_gtd::cli::{run, summary_table, Cli, Command};

fn main() -> diffusion_gtd::Result<()> {
    let mut args = vec![
        "diffgtd".to_string(),
        "run".into(),
        "--horizon".into(),
        "5000".into(),
        "--replicas".into(),
        "2".into(),
        "--out".into(),
        "out/example_gridworld".into(),
        "--analysis".into(),
    ];
    if let Some(p) = std::env::args().nth(1) {
        args.extend(["--config".into(), p]);
    }
    let Command::Run(a) = Cli::parse_from(args).command;
    let rows = run(&a)?;
    print!("{}", summary_table(&rows));
    println!("outputs in {}", a.out.display());
    Ok(())
}
