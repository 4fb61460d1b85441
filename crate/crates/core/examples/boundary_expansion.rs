//! Trains a vanilla GAN and a PaDGAN on the thin-ring data and counts how
//! many samples each places outside the training annulus, split by quality.
//!
//! `cargo run --release --example boundary_expansion -- [runs]`

use padgan::datasets::{preset, Example};
use padgan::experiment::{execute_run, ExperimentConfig};
use padgan::models::Variant;

fn main() -> padgan::Result<()> {
    let runs: usize = std::env::args()
        .nth(1)
        .map(|r| r.parse().expect("runs"))
        .unwrap_or(3);
    let exp = ExperimentConfig {
        preset: Example::ThinRing,
        ..Default::default()
    };
    let p = preset(exp.preset);
    let q = p.build_quality()?;
    let data = p.sample(exp.dataset_size, exp.seed)?;
    println!("fraction of samples outside the training annulus (high quality / low quality)");
    for run in 0..runs {
        let mut line = format!("run {run}:");
        for v in [Variant::Gan, Variant::Padgan] {
            let (_, r, _) = execute_run(&exp.run_config(v, run), &data, &q, &p, &exp.evaluation)?;
            line += &format!("  {v} {:.3} / {:.3}", r.novelty_high_q, r.novelty_low_q);
        }
        println!("{line}");
    }
    Ok(())
}
