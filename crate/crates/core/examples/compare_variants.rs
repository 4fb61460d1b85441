//! Runs the four-variant comparison on one preset through the experiment
//! runner and prints the aggregate table.
//!
//! `cargo run --release --example compare_variants -- [preset] [runs] [out_dir]`

use std::path::PathBuf;

use padgan::experiment::{run_experiment, ExperimentConfig};

fn main() -> padgan::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let config = ExperimentConfig {
        preset: args.next().as_deref().unwrap_or("example1").parse()?,
        runs: args
            .next()
            .map(|r| r.parse().expect("runs must be an integer"))
            .unwrap_or(3),
        output_dir: PathBuf::from(args.next().unwrap_or_else(|| "compare_out".into())),
        ..Default::default()
    };
    let summary = run_experiment(&config)?;
    println!(
        "{:<8}{:>22}{:>20}{:>20}",
        "model", "diversity", "quality", "overall"
    );
    for (variant, agg) in &summary.table {
        println!(
            "{:<8}{:>22}{:>20}{:>20}",
            variant.to_string(),
            agg.diversity.to_string(),
            agg.quality.to_string(),
            agg.overall.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    println!("artifacts in {}", config.output_dir.display());
    std::process::exit(summary.exit_code());
}
