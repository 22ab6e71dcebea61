//! `curefit` command line: fit a dataset, run a Monte Carlo study, or write
//! one synthetic dataset.
//!
//! Exit status: 0 on success, 2 when a fit finished with a convergence
//! warning, 1 on any error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use curefit::bayes::SamplerKind;
use curefit::io::write_dataset;
use curefit::mle::FitOptions;
use curefit::regression::{Family, RegressionCoefficients};
use curefit::report::{run_fit, summary_text, EngineChoice, RunConfig, RunStatus};
use curefit::simulation::{
    generate_dataset, mo_gompertz_truth, mo_ig_truth, monte_carlo, write_report_csv, Engine,
    SimConfig,
};
use curefit::{Error, Result};

#[derive(Parser)]
#[command(name = "curefit", version, about = "Defective survival regression with a cure fraction")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset and write the report files.
    Fit(FitArgs),
    /// Run a Monte Carlo study on synthetic data.
    Simulate(SimArgs),
    /// Write one synthetic dataset as CSV.
    Generate(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Block,
    Componentwise,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Block => SamplerKind::Block,
            SamplerArg::Componentwise => SamplerKind::Componentwise,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// TOML file with run settings; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// gompertz, ig, mo-gompertz or mo-ig.
    #[arg(long)]
    family: Option<Family>,
    /// freq, bayes or both.
    #[arg(long)]
    engine: Option<EngineChoice>,
    /// Comma-separated covariate columns for α.
    #[arg(long, value_delimiter = ',')]
    alpha_covariates: Option<Vec<String>>,
    /// Comma-separated covariate columns for β.
    #[arg(long, value_delimiter = ',')]
    beta_covariates: Option<Vec<String>>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    event_col: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// MCMC iterations including burn-in.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Interval level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Case-deletion influence diagnostics.
    #[arg(long)]
    influence: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimEngine {
    Freq,
    Bayes,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value = "mo-gompertz")]
    family: Family,
    /// Sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "freq")]
    engine: SimEngine,
    #[arg(long, default_value_t = 2500)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[command(flatten)]
    truth: TruthArgs,
    #[arg(long)]
    threads: Option<usize>,
    /// CSV file for the results table; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    /// True α coefficients (intercept and two slopes).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth_a: Option<Vec<f64>>,
    /// True β coefficients (intercept and two slopes).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth_b: Option<Vec<f64>>,
    #[arg(long)]
    truth_lambda: Option<f64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "mo-gompertz")]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicate index selecting the random stream.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    #[command(flatten)]
    truth: TruthArgs,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(RunStatus::Ok) => ExitCode::SUCCESS,
        Ok(RunStatus::Warning) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set thread count: {e}")))?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn fit(a: FitArgs) -> Result<RunStatus> {
    set_threads(a.threads)?;
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.input {
        cfg.input = v;
    }
    if let Some(v) = a.family {
        cfg.family = v;
    }
    if let Some(v) = a.engine {
        cfg.engine = v;
    }
    if let Some(v) = a.alpha_covariates {
        cfg.columns.alpha_covariates = v;
    }
    if let Some(v) = a.beta_covariates {
        cfg.columns.beta_covariates = v;
    }
    if let Some(v) = a.time_col {
        cfg.columns.time = v;
    }
    if let Some(v) = a.event_col {
        cfg.columns.event = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.iters {
        cfg.iters = v;
    }
    if let Some(v) = a.burnin {
        cfg.burnin = v;
    }
    if let Some(v) = a.sampler {
        cfg.sampler = v.into();
    }
    if let Some(v) = a.level {
        cfg.level = v;
    }
    if a.influence {
        cfg.influence = true;
    }
    if let Some(v) = a.out {
        cfg.out = v;
    }
    let out = run_fit(&cfg)?;
    print!("{}", summary_text(&out.report));
    info!("wrote results to {}", cfg.out.display());
    Ok(out.report.status)
}

fn truth_for(family: Family, t: &TruthArgs) -> Result<RegressionCoefficients> {
    let default = match family.marshall_olkin() {
        Family::MoInverseGaussian => mo_ig_truth(),
        _ => mo_gompertz_truth(),
    };
    let lambda = if family.is_marshall_olkin() {
        Some(t.truth_lambda.or(default.lambda).unwrap_or(1.0))
    } else {
        if t.truth_lambda.is_some() {
            return Err(Error::Config(format!("{family} has no lambda")));
        }
        None
    };
    RegressionCoefficients::new(
        t.truth_a.clone().unwrap_or(default.a),
        t.truth_b.clone().unwrap_or(default.b),
        lambda,
    )
}

fn simulate(a: SimArgs) -> Result<RunStatus> {
    set_threads(a.threads)?;
    let truth = truth_for(a.family, &a.truth)?;
    let engine = match a.engine {
        SimEngine::Freq => Engine::Frequentist(FitOptions::default()),
        SimEngine::Bayes => Engine::Bayesian {
            sampler: curefit::bayes::SamplerConfig {
                n_iter: a.iters,
                burn_in: a.burnin,
                ..Default::default()
            },
            prior: None,
        },
    };
    let mut reports = Vec::new();
    for &n in &a.n {
        let cfg = SimConfig {
            family: a.family,
            truth: truth.clone(),
            n,
            replicates: a.reps,
            seed: a.seed,
        };
        reports.push(monte_carlo(&cfg, &engine)?);
    }
    match &a.out {
        Some(p) => write_report_csv(&reports, BufWriter::new(File::create(p)?))?,
        None => write_report_csv(&reports, std::io::stdout().lock())?,
    }
    Ok(if reports.iter().any(|r| r.failures > 0) {
        RunStatus::Warning
    } else {
        RunStatus::Ok
    })
}

fn generate(a: GenArgs) -> Result<RunStatus> {
    let cfg = SimConfig {
        family: a.family,
        truth: truth_for(a.family, &a.truth)?,
        n: a.n,
        replicates: 1,
        seed: a.seed,
    };
    let data = generate_dataset(&cfg, a.rep)?;
    write_dataset(&data, BufWriter::new(File::create(&a.out)?))?;
    Ok(RunStatus::Ok)
}
