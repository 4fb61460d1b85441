//! Sweeps the kernel's quality exponent and reports the resulting
//! quality/diversity trade-off on the ring benchmark.
//!
//! `cargo run --release --example quality_dial -- [runs]`

use padgan::datasets::{preset, Example};
use padgan::experiment::{execute_run, ExperimentConfig};
use padgan::models::Variant;

fn main() -> padgan::Result<()> {
    let runs: usize = std::env::args()
        .nth(1)
        .map(|r| r.parse().expect("runs"))
        .unwrap_or(2);
    let exp = ExperimentConfig::default();
    let p = preset(Example::Ring);
    let q = p.build_quality()?;
    let data = p.sample(exp.dataset_size, exp.seed)?;
    println!("gamma0   quality   diversity   overall");
    for gamma0 in [0.0, 1.0, 2.0, 4.0] {
        let (mut qs, mut ds, mut os) = (0.0, 0.0, 0.0);
        for run in 0..runs {
            let mut cfg = exp.run_config(Variant::Padgan, run);
            cfg.gamma0 = gamma0;
            let (_, r, _) = execute_run(&cfg, &data, &q, &p, &exp.evaluation)?;
            qs += r.quality_score;
            ds += r.diversity_score;
            os += r.overall_score.unwrap_or(0.0);
        }
        let n = runs as f64;
        println!(
            "{gamma0:>6.1}   {:.4}    {:>8.2}    {:.4}",
            qs / n,
            ds / n,
            os / n
        );
    }
    Ok(())
}
