//! Trains one PaDGAN on the ring benchmark, prints its training curve and
//! scores, and writes samples, loss history and a density plot.
//!
//! `cargo run --release --example train_padgan -- [preset] [out_dir]`

use std::path::PathBuf;

use padgan::datasets::{preset, Example, DEFAULT_DATASET_SIZE};
use padgan::evaluation::{evaluate_samples, EvaluationProtocol};
use padgan::io::{write_history_csv, write_samples_csv};
use padgan::models::{train, TrainingConfig, Variant};
use padgan::plot::plot_density;
use padgan::quality::QualityFunction;

fn main() -> padgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let example: Example = args.next().as_deref().unwrap_or("example1").parse()?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "padgan_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| padgan::Error::InvalidInput(e.to_string()))?;

    let p = preset(example);
    let q = p.build_quality()?;
    let data = p.sample(DEFAULT_DATASET_SIZE, 0)?;
    let config = TrainingConfig::for_variant(Variant::Padgan);
    let model = train(&config, &data, &q)?;

    for h in model.history.iter().step_by(config.total_steps / 10) {
        println!(
            "step {:>5}  d_loss {:.3}  g_adv {:.3}  aux {:+.4}  gamma1 {:.4}",
            h.step, h.d_loss, h.g_adv_loss, h.aux_loss, h.gamma1
        );
    }

    let samples = model.sample(1000, 1)?;
    let report = evaluate_samples(&samples, &q, &p.descriptor, &EvaluationProtocol::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let qualities: Vec<f64> = samples.iter().map(|x| q.evaluate(x)).collect();
    write_samples_csv(&out.join("samples.csv"), &samples, &qualities)?;
    write_history_csv(&out.join("history.csv"), &model.history)?;
    plot_density(
        &out.join("density.svg"),
        &samples,
        &data.points,
        &q,
        &p.domain,
        "padgan",
    )?;
    println!("wrote {}", out.display());
    Ok(())
}
