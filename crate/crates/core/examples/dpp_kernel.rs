//! Builds a quality-weighted batch kernel, evaluates the DPP loss and its
//! gradients, and shows how quality and spread change subset probabilities.

use padgan::datasets::{preset, Example};
use padgan::dpp::{build_kernel, pad_loss_and_gradients, subset_probability, SimilarityKernel};
use padgan::quality::{Point, QualityFunction};

fn main() -> padgan::Result<()> {
    let q = preset(Example::Ring).build_quality()?;
    let kernel = SimilarityKernel::default();

    // Three designs on quality peaks, one between peaks, one duplicate.
    let centers = q.centers();
    let batch: Vec<Point> = vec![
        centers[0],
        centers[2],
        centers[4],
        [0.4 * (0.5f64).cos(), 0.4 * (0.5f64).sin()],
        [centers[0][0] + 0.01, centers[0][1]],
    ];
    let qualities: Vec<f64> = batch.iter().map(|x| q.evaluate(x)).collect();
    let quality_grads: Vec<Point> = batch.iter().map(|x| q.gradient(x)).collect();

    for gamma0 in [0.0, 2.0] {
        let l = build_kernel(&batch, &qualities, gamma0, &kernel, 1e-6)?;
        let (loss, grads) =
            pad_loss_and_gradients(&l, &batch, &qualities, &quality_grads, &kernel)?;
        println!("gamma0 = {gamma0}: loss {loss:.4}");
        for (i, (x, g)) in batch.iter().zip(&grads).enumerate() {
            println!(
                "  x{i} = ({:+.3}, {:+.3})  q = {:.3}  dL/dx = ({:+.3e}, {:+.3e})",
                x[0], x[1], qualities[i], g[0], g[1]
            );
        }
        let l0 = build_kernel(&batch, &qualities, gamma0, &kernel, 0.0)?;
        println!(
            "  P({{x0, x1}}) = {:.3e}   P({{x0, x4}}) = {:.3e}   P({{x1, x3}}) = {:.3e}",
            subset_probability(l0.matrix(), &[0, 1])?,
            subset_probability(l0.matrix(), &[0, 4])?,
            subset_probability(l0.matrix(), &[1, 3])?,
        );
    }
    Ok(())
}
