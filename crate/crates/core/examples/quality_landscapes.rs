//! Prints the three synthetic quality landscapes and the quality of their
//! training sets.
//!
//! Run with `cargo run --release --example quality_landscapes`.

use padgan::datasets::{preset, Example};
use padgan::evaluation::quality_score;
use padgan::quality::QualityFunction;

fn main() -> padgan::Result<()> {
    for example in Example::ALL {
        let p = preset(example);
        let q = p.build_quality()?;
        let data = p.sample(10_000, 0)?;
        println!(
            "{example}: K = {}, sigma = {}, normalizer = {:.6}, training-set quality {:.4}",
            q.num_components(),
            q.sigma(),
            q.normalizer(),
            quality_score(&data.points, &q)?
        );
        // coarse character map of q over the domain
        let n = 28;
        for row in 0..n {
            let y = p.domain.max[1]
                - (row as f64 + 0.5) / n as f64 * (p.domain.max[1] - p.domain.min[1]);
            let line: String = (0..2 * n)
                .map(|col| {
                    let x = p.domain.min[0]
                        + (col as f64 + 0.5) / (2 * n) as f64 * (p.domain.max[0] - p.domain.min[0]);
                    let v = q.evaluate(&[x, y]);
                    [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'][((v * 9.99) as usize).min(9)]
                })
                .collect();
            println!("  |{line}|");
        }
    }
    Ok(())
}
