//! Compares the analytic gradients of the networks, the quality landscape
//! and the DPP loss against central finite differences.

use nalgebra::DMatrix;
use padgan::datasets::{preset, Example};
use padgan::dpp::{build_kernel, pad_loss, pad_loss_gradients, SimilarityKernel};
use padgan::nn::{DenseNetwork, HiddenActivation, OutputActivation};
use padgan::quality::{Point, QualityFunction};

fn main() -> padgan::Result<()> {
    let p = preset(Example::Ring);
    let q = p.build_quality()?;

    // DPP loss on a batch drawn from the training distribution
    let batch = p.sample(16, 7)?.points;
    let kernel = SimilarityKernel::default();
    let loss_at = |pts: &[Point]| -> padgan::Result<f64> {
        let qs: Vec<f64> = pts.iter().map(|x| q.evaluate(x)).collect();
        pad_loss(&build_kernel(pts, &qs, 2.0, &kernel, 1e-6)?)
    };
    let qs: Vec<f64> = batch.iter().map(|x| q.evaluate(x)).collect();
    let dq: Vec<Point> = batch.iter().map(|x| q.gradient(x)).collect();
    let analytic = pad_loss_gradients(
        &build_kernel(&batch, &qs, 2.0, &kernel, 1e-6)?,
        &batch,
        &qs,
        &dq,
        &kernel,
    )?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..batch.len() {
        for d in 0..2 {
            let (mut up, mut down) = (batch.clone(), batch.clone());
            up[i][d] += h;
            down[i][d] -= h;
            let numeric = (loss_at(&up)? - loss_at(&down)?) / (2.0 * h);
            worst = worst.max((analytic[i][d] - numeric).abs() / numeric.abs().max(1e-3));
        }
    }
    println!("DPP loss, 16-point batch: max relative error {worst:.2e}");

    // generator-shaped network, loss = sum of outputs
    let net = DenseNetwork::init(
        &[5, 64, 64, 2],
        HiddenActivation::LeakyRelu(0.2),
        OutputActivation::Identity,
        3,
    )?;
    let x = DMatrix::from_fn(8, 5, |r, c| ((r * 5 + c) as f64 * 0.37).sin());
    let (_, tape) = net.forward(&x)?;
    let (grads, _) = net.backward(&tape, &DMatrix::from_element(8, 2, 1.0))?;
    let analytic = grads.flatten();
    let flat = net.flatten_parameters();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in (0..flat.len()).step_by(97) {
        let mut f = flat.clone();
        f[i] += 1e-4;
        probe.set_flat_parameters(&f)?;
        let up = probe.predict(&x)?.sum();
        f[i] -= 2e-4;
        probe.set_flat_parameters(&f)?;
        let down = probe.predict(&x)?.sum();
        let numeric = (up - down) / 2e-4;
        worst = worst.max((analytic[i] - numeric).abs() / numeric.abs().max(1e-4));
    }
    println!(
        "generator network, {} sampled parameters: max relative error {worst:.2e}",
        flat.len().div_ceil(97)
    );
    Ok(())
}
