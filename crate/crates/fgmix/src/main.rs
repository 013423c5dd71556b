//! Command-line driver: generate synthetic data, fit the mixture, draw
//! predictive samples, evaluate fits, and run the generative classifier.

use clap::{Parser, Subcommand};
use fgmix::config::RunConfig;
use fgmix::datagen::{self, Dataset};
use fgmix::evaluation::{classification_accuracy, mad_delta, test_loglik};
use fgmix::gibbs::run_chain_opts;
use fgmix::io::{read_csv, read_trace, write_csv, write_json, write_trace};
use fgmix::predictive::{Classifier, DensityModel, PredictiveOptions};
use fgmix::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "fgmix", about = "Sphere-mixture density estimation toolkit", version)]
struct Cli {
    /// config file (flat dotted keys)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; every output is a pure function of (config, seed)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as points.csv
    Generate,
    /// Fit the mixture to a CSV dataset, writing trace and diagnostics files
    Fit {
        /// also record the latent spherical coordinates in the trace
        #[arg(long)]
        save_latent: bool,
    },
    /// Draw predictive samples from a fitted trace
    Sample,
    /// Compute neighborhood-count differences and test log-likelihood
    Eval,
    /// Fit one density per class and report test accuracy
    Classify,
}

#[derive(Serialize)]
struct MetricsOut<'a> {
    seed: u64,
    config: &'a RunConfig,
    mad: Option<fgmix::evaluation::MadReport>,
    test_loglik: Option<f64>,
    accuracy: Option<f64>,
}

fn generate(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    let g = &cfg.generator;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match g.name.as_str() {
        "euler_spiral" => datagen::euler_spiral(g.n, g.noise_sd, &mut rng),
        "olympic_rings" => datagen::olympic_rings(g.noise_sd, &mut rng),
        "torus" => datagen::torus(g.n, g.big_r, g.small_r, g.noise_var, &mut rng),
        "two_spirals" => datagen::two_spirals(g.n_per_class, g.noise_sd, &mut rng),
        other => Err(fgmix::Error::Config(format!(
            "unknown generator `{other}` (expected euler_spiral, olympic_rings, torus, or two_spirals)"
        ))),
    }
}

fn load_train(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg
        .data_path
        .as_ref()
        .ok_or_else(|| fgmix::Error::Config("data.path is required".into()))?;
    read_csv(Path::new(path))
}

fn trace_path_for(cfg: &RunConfig, out: &Path, chain: usize) -> PathBuf {
    match &cfg.trace_path {
        Some(p) if cfg.chains == 1 => PathBuf::from(p),
        Some(p) => PathBuf::from(format!("{p}.chain{chain}")),
        None => out.join(if cfg.chains == 1 {
            "trace.jsonl".to_string()
        } else {
            format!("trace.chain{chain}.jsonl")
        }),
    }
}

fn load_model(cfg: &RunConfig, out: &Path, rng: &mut ChaCha12Rng) -> Result<DensityModel> {
    let trace = read_trace(&trace_path_for(cfg, out, 0))?;
    let opts = PredictiveOptions {
        include_new_sphere: cfg.include_new_sphere,
        n_prior_draws: cfg.n_prior_draws,
    };
    DensityModel::from_trace(&trace, &opts, rng)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Generate => {
            let data = generate(&cfg, cli.seed)?;
            write_csv(&cli.out.join("points.csv"), &data)?;
        }
        Command::Fit { save_latent } => {
            let data = load_train(&cfg)?;
            let hyper = cfg.hyperparams(data.dim())?;
            let save = *save_latent || cfg.save_latent;
            let mut all_diag = Vec::new();
            for chain in 0..cfg.chains.max(1) {
                let run = run_chain_opts(&data.points, &hyper, cli.seed + chain as u64, save)?;
                write_trace(&trace_path_for(&cfg, &cli.out, chain), &run.trace)?;
                all_diag.push(run.diagnostics);
            }
            write_json(&cli.out.join("diagnostics.json"), &all_diag)?;
        }
        Command::Sample => {
            let mut rng = ChaCha12Rng::seed_from_u64(cli.seed);
            let model = load_model(&cfg, &cli.out, &mut rng)?;
            let points: Result<Vec<Vec<f64>>> =
                (0..cfg.n_samples).map(|_| model.sample(&mut rng)).collect();
            let data = Dataset {
                points: points?,
                labels: None,
                meta: format!("predictive seed={}", cli.seed),
            };
            write_csv(&cli.out.join("samples.csv"), &data)?;
        }
        Command::Eval => {
            let train = load_train(&cfg)?;
            let mut rng = ChaCha12Rng::seed_from_u64(cli.seed);
            let model = load_model(&cfg, &cli.out, &mut rng)?;
            let predictive: Result<Vec<Vec<f64>>> = (0..train.n())
                .map(|_| model.sample(&mut rng))
                .collect();
            let mad = mad_delta(
                &train.points,
                &predictive?,
                &cfg.deltas,
                cfg.n_refs,
                cli.seed,
                &mut rng,
            )?;
            let ll = match &cfg.test_path {
                Some(p) => Some(test_loglik(&model, &read_csv(Path::new(p))?.points)?),
                None => None,
            };
            write_json(
                &cli.out.join("metrics.json"),
                &MetricsOut {
                    seed: cli.seed,
                    config: &cfg,
                    mad: Some(mad),
                    test_loglik: ll,
                    accuracy: None,
                },
            )?;
        }
        Command::Classify => {
            let train = load_train(&cfg)?;
            let labels = train.labels.clone().ok_or_else(|| {
                fgmix::Error::Config("classify needs a labeled training CSV".into())
            })?;
            let test_path = cfg
                .test_path
                .as_ref()
                .ok_or_else(|| fgmix::Error::Config("data.test_path is required".into()))?;
            let test = read_csv(Path::new(test_path))?;
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            let hyper = cfg.hyperparams(train.dim())?;
            let opts = PredictiveOptions {
                include_new_sphere: cfg.include_new_sphere,
                n_prior_draws: cfg.n_prior_draws,
            };
            let mut models = Vec::new();
            let mut counts = Vec::new();
            for class in 0..n_classes {
                let subset: Vec<Vec<f64>> = train
                    .points
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == class)
                    .map(|(p, _)| p.clone())
                    .collect();
                counts.push(subset.len());
                let run = run_chain_opts(&subset, &hyper, cli.seed + class as u64, false)?;
                write_trace(
                    &cli.out.join(format!("trace.class{class}.jsonl")),
                    &run.trace,
                )?;
                let mut rng = ChaCha12Rng::seed_from_u64(cli.seed ^ 0x9e3779b97f4a7c15);
                models.push(DensityModel::from_trace(&run.trace, &opts, &mut rng)?);
            }
            let clf = Classifier::new(models, &counts)?;
            let accuracy = classification_accuracy(&clf, &test)?;
            write_json(
                &cli.out.join("metrics.json"),
                &MetricsOut {
                    seed: cli.seed,
                    config: &cfg,
                    mad: None,
                    test_loglik: None,
                    accuracy: Some(accuracy),
                },
            )?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
