use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gbrff::bench::{self, ExperimentConfig, Method, DEFAULT_SWEEP_BUDGETS};
use gbrff::boosting::{self, GbrffConfig, LandmarkMode};
use gbrff::data::{load_and_binarize, Standardizer};
use gbrff::model_io::{Model, ModelFile};
use gbrff::pbrff::{fit_pbrff, PbrffConfig};
use gbrff::rff::Bandwidth;
use gbrff::{check, DatasetSpec, Error, Result};

#[derive(Parser)]
#[command(name = "gbrff", version, about = "Boosted random-Fourier-feature kernels: benchmarks, training and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated train/test benchmark with cross-validated hyperparameters.
    Bench(RunArgs),
    /// Accuracy against the landmark budget for every method.
    Sweep(RunArgs),
    /// Train one model on a whole dataset.
    Fit(FitArgs),
    /// Score a saved model on a dataset.
    Predict(PredictArgs),
    /// Run the numerical self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Directory of dataset spec files (*.toml).
    #[arg(long, default_value = "data/specs")]
    dataset_dir: PathBuf,
    /// Individual spec files; replaces --dataset-dir when given.
    #[arg(long)]
    spec: Vec<PathBuf>,
    /// Methods to run (gbrff, gbrff_random, pbrff).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Boosting rounds per GBRFF budget.
    #[arg(long, value_delimiter = ',')]
    rounds: Vec<usize>,
    /// Landmark counts per PBRFF budget.
    #[arg(long, value_delimiter = ',')]
    landmarks: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    k_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Reduced grids, 5 splits, the 6 smallest datasets.
    #[arg(long)]
    fast: bool,
    /// Output directory for the result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "gbrff")]
    method: Method,
    #[arg(long, default_value_t = 200)]
    rounds: usize,
    #[arg(long, default_value_t = 200)]
    landmarks: usize,
    #[arg(long, default_value_t = 100)]
    k_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Posterior temperature for GBRFF.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Learning rate for GBRFF.
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    /// Posterior temperature for PBRFF.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// SVM regularization for PBRFF.
    #[arg(long, default_value_t = 1.0)]
    c_svm: f64,
    /// Gaussian kernel width; defaults to sqrt(d/2).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_in: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Optional CSV of raw scores and predicted labels.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Bench(args) => run(args, false),
        Command::Sweep(args) => run(args, true),
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Check { seed } => Ok(run_checks(seed)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn experiment(args: &RunArgs, sweep: bool) -> Result<ExperimentConfig> {
    let specs = if args.spec.is_empty() {
        DatasetSpec::load_dir(&args.dataset_dir)?
    } else {
        args.spec.iter().map(DatasetSpec::from_file).collect::<Result<_>>()?
    };
    let mut cfg = if sweep {
        ExperimentConfig::sweep(specs, DEFAULT_SWEEP_BUDGETS.to_vec())
    } else {
        ExperimentConfig::table(specs)
    };
    if args.fast {
        cfg = cfg.fast();
    }
    if !args.method.is_empty() {
        cfg.methods = args.method.clone();
    }
    if !args.rounds.is_empty() {
        cfg.t_rounds = args.rounds.clone();
    }
    if !args.landmarks.is_empty() {
        cfg.n_landmarks = args.landmarks.clone();
    }
    cfg.settings.k_features = args.k_features;
    cfg.seed = args.seed;
    if let Some(w) = args.workers {
        cfg.worker_count = w;
    }
    cfg.output_path = Some(args.out.clone());
    Ok(cfg)
}

fn run(args: RunArgs, sweep: bool) -> Result<bool> {
    let cfg = experiment(&args, sweep)?;
    let out = bench::run_benchmark(&cfg)?;
    bench::emit_results(&out, &args.out)?;
    for row in bench::summarize(&out.records) {
        println!(
            "{:<12} {:<13} b={:<4} {:6.2} ± {:5.2}  rank {:.2}",
            row.dataset,
            row.method.name(),
            row.landmark_budget,
            100.0 * row.mean_accuracy,
            100.0 * row.std_accuracy,
            row.rank
        );
    }
    for f in &out.failures {
        eprintln!("failed: {} ({})", f.dataset, f.error);
    }
    println!("results written to {}", args.out.display());
    Ok(out.failures.is_empty())
}

fn fit(args: FitArgs) -> Result<bool> {
    let raw = load_and_binarize(&DatasetSpec::from_file(&args.spec)?)?;
    let standardizer = Standardizer::fit(&raw);
    let train = standardizer.apply(&raw)?;
    let bandwidth = args.bandwidth.map_or(Bandwidth::Dimension, Bandwidth::Fixed).resolve(raw.dim());
    let model = match args.method {
        Method::Gbrff | Method::GbrffRandom => {
            let cfg = GbrffConfig {
                t_rounds: args.rounds,
                k_features: args.k_features,
                v: args.v,
                c: args.c,
                seed: args.seed,
                bandwidth,
                landmark_mode: if args.method == Method::GbrffRandom {
                    LandmarkMode::Random
                } else {
                    LandmarkMode::Learned
                },
                ..Default::default()
            };
            Model::Gbrff(boosting::fit(&train, &cfg)?)
        }
        Method::Pbrff => {
            let cfg = PbrffConfig {
                n_landmarks: args.landmarks,
                k_features: args.k_features,
                beta: args.beta,
                c_param: args.c_svm,
                seed: args.seed,
                bandwidth,
                ..Default::default()
            };
            Model::Pbrff(fit_pbrff(&train, &cfg)?)
        }
    };
    let file = ModelFile {
        model,
        dim: raw.dim(),
        standardizer: Some(standardizer),
    };
    let acc = accuracy(&file, &raw)?;
    file.save(&args.model_out)?;
    println!("{}: training accuracy {:.2}%", raw.name, 100.0 * acc);
    println!("model written to {}", args.model_out.display());
    Ok(true)
}

fn accuracy(file: &ModelFile, ds: &gbrff::Dataset) -> Result<f64> {
    let raw: Vec<f64> = ds.rows().map(|x| file.predict_raw(x)).collect::<Result<_>>()?;
    Ok(boosting::accuracy(&raw, ds.y()))
}

fn predict(args: PredictArgs) -> Result<bool> {
    let file = ModelFile::load(&args.model_in)?;
    let ds = load_and_binarize(&DatasetSpec::from_file(&args.spec)?)?;
    let raw: Vec<f64> = ds.rows().map(|x| file.predict_raw(x)).collect::<Result<_>>()?;
    println!("{}: accuracy {:.2}% on {} rows", ds.name, 100.0 * boosting::accuracy(&raw, ds.y()), ds.n());
    if let Some(path) = &args.out {
        write_predictions(path, &raw, ds.y())?;
        println!("predictions written to {}", path.display());
    }
    Ok(true)
}

fn write_predictions(path: &Path, raw: &[f64], y: &[f64]) -> Result<()> {
    let mut text = String::from("row,score,prediction,label\n");
    for (i, (s, l)) in raw.iter().zip(y).enumerate() {
        text.push_str(&format!("{i},{s:.6},{},{l}\n", boosting::sign(*s)));
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_checks(seed: u64) -> bool {
    let outcomes = check::run_all(seed);
    for o in &outcomes {
        println!("{o}");
    }
    outcomes.iter().all(|o| o.passed)
}
