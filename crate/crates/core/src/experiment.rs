//! Multi-run experiments: train every requested variant several times on a
//! preset, score the samples and write all artifacts under one directory.
//!
//! Files written per experiment:
//!
//! - `samples_<variant>_<run>.csv` with columns `x1,x2,quality`
//! - `scores_<variant>_<run>.json`
//! - `density_<variant>.svg`, pooling the samples of all runs of a variant
//! - `table1.csv` with aggregated scores per variant
//! - `history_<variant>_<run>.csv` when `write_history` is set

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{preset, Example, ExperimentPreset, SyntheticDataset, DEFAULT_DATASET_SIZE};
use crate::evaluation::{
    aggregate_runs, evaluate_samples, AggregateScores, EvaluationProtocol, ScoreReport,
};
use crate::io;
use crate::models::{train, TrainingConfig, Variant};
use crate::plot::plot_density;
use crate::quality::{GaussianMixtureQuality, Point, QualityFunction};
use crate::{Error, Result};

/// Odd multiplier spreading run indices over the seed space.
pub const RUN_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const SAMPLING_SEED_SALT: u64 = 0xA54F_F53A_5F1D_36F1;

/// Seed of run `run` for a given base seed.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add((run as u64).wrapping_mul(RUN_SEED_STRIDE))
}

/// Seed of the noise used to draw the scored samples of a run.
pub fn sampling_seed(run_seed: u64) -> u64 {
    run_seed ^ SAMPLING_SEED_SALT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Example,
    pub variants: Vec<Variant>,
    pub runs: usize,
    /// Base seed; seeds the training set and, through [`run_seed`], every run.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset_size: usize,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub write_history: bool,
    /// Shared training settings. `variant` and `seed` are set per run.
    pub training: TrainingConfig,
    pub evaluation: EvaluationProtocol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Example::Ring,
            variants: Variant::ALL.to_vec(),
            runs: 10,
            seed: 0,
            output_dir: PathBuf::from("out"),
            dataset_size: DEFAULT_DATASET_SIZE,
            threads: 0,
            write_history: false,
            training: TrainingConfig::default(),
            evaluation: EvaluationProtocol::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Training configuration of one run.
    pub fn run_config(&self, variant: Variant, run: usize) -> TrainingConfig {
        TrainingConfig {
            variant,
            seed: run_seed(self.seed, run),
            ..self.training.clone()
        }
        .resolved()
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("no variants requested".into()));
        }
        if self.dataset_size == 0 {
            return Err(Error::InvalidConfig("dataset_size must be positive".into()));
        }
        for &v in &self.variants {
            self.run_config(v, 0).validate()?;
        }
        if self.evaluation.samples < self.evaluation.subset_size {
            return Err(Error::InvalidConfig(
                "evaluation needs at least subset_size samples".into(),
            ));
        }
        Ok(())
    }
}

/// Samples, qualities and scores of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub variant: Variant,
    pub run: usize,
    pub samples: Vec<Point>,
    pub report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub variant: Variant,
    pub run: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub reports: BTreeMap<(Variant, usize), ScoreReport>,
    pub table: Vec<(Variant, AggregateScores)>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentSummary {
    /// 0 when every run succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }

    pub fn aggregate(&self, variant: Variant) -> Option<&AggregateScores> {
        self.table
            .iter()
            .find(|(v, _)| *v == variant)
            .map(|(_, a)| a)
    }

    pub fn variant_reports(&self, variant: Variant) -> Vec<&ScoreReport> {
        self.reports
            .range((variant, 0)..=(variant, usize::MAX))
            .map(|(_, r)| r)
            .collect()
    }
}

pub fn samples_path(dir: &Path, variant: Variant, run: usize) -> PathBuf {
    dir.join(format!("samples_{variant}_{run}.csv"))
}

pub fn scores_path(dir: &Path, variant: Variant, run: usize) -> PathBuf {
    dir.join(format!("scores_{variant}_{run}.json"))
}

pub fn history_path(dir: &Path, variant: Variant, run: usize) -> PathBuf {
    dir.join(format!("history_{variant}_{run}.csv"))
}

pub fn density_path(dir: &Path, variant: Variant) -> PathBuf {
    dir.join(format!("density_{variant}.svg"))
}

pub const TABLE_FILE: &str = "table1.csv";

/// Trains and scores one run without touching the filesystem.
pub fn execute_run(
    config: &TrainingConfig,
    dataset: &SyntheticDataset,
    quality: &GaussianMixtureQuality,
    preset: &ExperimentPreset,
    protocol: &EvaluationProtocol,
) -> Result<(Vec<Point>, ScoreReport, crate::models::TrainedModel)> {
    let model = train(config, dataset, quality)?;
    let samples = model.sample(protocol.samples, sampling_seed(config.seed))?;
    let report = evaluate_samples(&samples, quality, &preset.descriptor, protocol)?;
    Ok((samples, report, model))
}

/// Scores an existing sample set against a preset.
pub fn evaluate_preset_samples(
    example: Example,
    samples: &[Point],
    protocol: &EvaluationProtocol,
) -> Result<ScoreReport> {
    let p = preset(example);
    let quality = p.build_quality()?;
    evaluate_samples(samples, &quality, &p.descriptor, protocol)
}

/// Renders the density plot of `samples` over the preset's landscape and
/// training data.
pub fn plot_preset_density(
    example: Example,
    samples: &[Point],
    dataset_seed: u64,
    dataset_size: usize,
    path: &Path,
    title: &str,
) -> Result<()> {
    let p = preset(example);
    let quality = p.build_quality()?;
    let data = p.sample(dataset_size, dataset_seed)?;
    plot_density(path, samples, &data.points, &quality, &p.domain, title)
}

fn write_run(dir: &Path, outcome: &RunOutcome, quality: &GaussianMixtureQuality) -> Result<()> {
    let qualities: Vec<f64> = outcome
        .samples
        .iter()
        .map(|x| quality.evaluate(x))
        .collect();
    io::write_samples_csv(
        &samples_path(dir, outcome.variant, outcome.run),
        &outcome.samples,
        &qualities,
    )?;
    io::write_json(
        &scores_path(dir, outcome.variant, outcome.run),
        &outcome.report,
    )
}

/// Runs the whole experiment.
///
/// Invalid configurations and unusable output directories return an error.
/// Failures of individual runs are logged and collected in the summary while
/// the remaining runs continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let p = preset(config.preset);
    let quality = p.build_quality()?;
    let dataset = p.sample(config.dataset_size, config.seed)?;

    let jobs: Vec<(Variant, usize)> = config
        .variants
        .iter()
        .flat_map(|&v| (0..config.runs).map(move |r| (v, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    let results: Vec<std::result::Result<RunOutcome, RunFailure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(variant, run)| {
                let cfg = config.run_config(variant, run);
                let attempt = || -> Result<RunOutcome> {
                    let (samples, report, model) =
                        execute_run(&cfg, &dataset, &quality, &p, &config.evaluation)?;
                    if config.write_history {
                        io::write_history_csv(&history_path(dir, variant, run), &model.history)?;
                    }
                    let outcome = RunOutcome {
                        variant,
                        run,
                        samples,
                        report,
                    };
                    write_run(dir, &outcome, &quality)?;
                    Ok(outcome)
                };
                match attempt() {
                    Ok(o) => {
                        info!("{variant} run {run}: {:?}", o.report);
                        Ok(o)
                    }
                    Err(e) => {
                        error!("{variant} run {run} failed: {e}");
                        Err(RunFailure {
                            variant,
                            run,
                            message: e.to_string(),
                        })
                    }
                }
            })
            .collect()
    });

    let mut reports = BTreeMap::new();
    let mut pooled: BTreeMap<Variant, Vec<Point>> = BTreeMap::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => {
                pooled.entry(o.variant).or_default().extend(&o.samples);
                reports.insert((o.variant, o.run), o.report);
            }
            Err(f) => failures.push(f),
        }
    }

    let mut table = Vec::new();
    for &variant in &config.variants {
        let Some(samples) = pooled.get(&variant) else {
            continue;
        };
        let title = format!("{} on {}", variant, config.preset);
        if let Err(e) = plot_density(
            &density_path(dir, variant),
            samples,
            &dataset.points,
            &quality,
            &p.domain,
            &title,
        ) {
            error!("{variant}: density plot failed: {e}");
            failures.push(RunFailure {
                variant,
                run: usize::MAX,
                message: e.to_string(),
            });
        }
        let runs: Vec<ScoreReport> = reports
            .range((variant, 0)..=(variant, usize::MAX))
            .map(|(_, r)| r.clone())
            .collect();
        table.push((variant, aggregate_runs(&runs)?));
    }
    let rows: Vec<(String, AggregateScores)> = table
        .iter()
        .map(|(v, a)| (v.to_string(), a.clone()))
        .collect();
    io::write_table_csv(&dir.join(TABLE_FILE), &rows)?;

    Ok(ExperimentSummary {
        reports,
        table,
        failures,
    })
}
