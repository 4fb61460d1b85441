use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use padgan::datasets::{Example, DEFAULT_DATASET_SIZE};
use padgan::evaluation::EvaluationProtocol;
use padgan::experiment::{
    evaluate_preset_samples, plot_preset_density, run_experiment, ExperimentConfig,
};
use padgan::io::{read_points_csv, write_json};
use padgan::models::Variant;
use padgan::Error;

#[derive(Parser)]
#[command(
    version,
    about = "Train and score quality-diversity GANs on synthetic benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every variant several times and write samples, scores and plots.
    Run(RunArgs),
    /// Score an existing samples CSV against a preset.
    Eval(EvalArgs),
    /// Re-render a density SVG from a samples CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Example>,
    /// Variant to train; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    preset: Example,
    /// CSV with `x1,x2` columns.
    #[arg(long)]
    samples: PathBuf,
    /// Take the evaluation protocol from this experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    preset: Example,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seed of the training data drawn underneath the heatmap.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DATASET_SIZE)]
    dataset_size: usize,
}

fn load_config(path: &Option<PathBuf>) -> padgan::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidConfig(_) | Error::Toml(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run(args: RunArgs) -> padgan::Result<ExitCode> {
    let mut config = load_config(&args.config)?;
    if let Some(p) = args.preset {
        config.preset = p;
    }
    if !args.variant.is_empty() {
        config.variants = args.variant;
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = args.out {
        config.output_dir = o;
    }
    if let Some(t) = args.threads {
        config.threads = t;
    }
    let summary = run_experiment(&config).map_err(|e| match e {
        // an output directory that cannot be created is a configuration problem
        Error::Io { .. } => Error::InvalidConfig(e.to_string()),
        e => e,
    })?;
    for (variant, agg) in &summary.table {
        let overall = agg.overall.map(|s| s.to_string()).unwrap_or_default();
        println!(
            "{variant:<7} diversity {}  quality {}  overall {overall}",
            agg.diversity, agg.quality
        );
    }
    for f in &summary.failures {
        eprintln!("run {} of {} failed: {}", f.run, f.variant, f.message);
    }
    Ok(ExitCode::from(summary.exit_code() as u8))
}

fn eval(args: EvalArgs) -> padgan::Result<ExitCode> {
    let protocol: EvaluationProtocol = load_config(&args.config)?.evaluation;
    let samples = read_points_csv(&args.samples)?;
    let report = evaluate_preset_samples(args.preset, &samples, &protocol)?;
    match args.out {
        Some(path) => write_json(&path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn plot(args: PlotArgs) -> padgan::Result<ExitCode> {
    let samples = read_points_csv(&args.samples)?;
    let title = format!("{} on {}", args.samples.display(), args.preset);
    plot_preset_density(
        args.preset,
        &samples,
        args.seed,
        args.dataset_size,
        &args.out,
        &title,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_for(&e)
    })
}
