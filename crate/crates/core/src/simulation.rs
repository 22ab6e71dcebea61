//! Synthetic cure-fraction data and the Monte Carlo harness.
//!
//! Each observation draws x₁ = (1, Bernoulli(0.7), Uniform(0, 1)) and
//! x₂ = (1, Bernoulli(0.5), Uniform(0, 1)), a cure indicator with probability
//! pᵢ, and for the susceptible a latent time t* = F⁻¹(u) with
//! u ~ Uniform(0, 1 − pᵢ). Censoring times are Uniform(0, max finite t*).

use std::io::Write;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{mean_sd, posterior_summary, sample_posterior, PriorSpec, SamplerConfig};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::likelihood::{ModelSpec, ParamVector, SurvivalDataset};
use crate::mle::{fit_mle, FitOptions};
use crate::regression::{per_observation_laws, DesignMatrices, Family, RegressionCoefficients};

/// Retries when every simulated subject is cured.
const MAX_ATTEMPTS: u64 = 16;
/// Share of failed replicates above which a Monte Carlo run is abandoned.
const MAX_FAILURE_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: Family,
    pub truth: RegressionCoefficients,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        if self.n < 10 {
            return Err(Error::Config(format!("n must be at least 10, got {}", self.n)));
        }
        if self.truth.a.len() != 3 || self.truth.b.len() != 3 {
            return Err(Error::Config(
                "the covariate scheme has an intercept and two covariates per link".into(),
            ));
        }
        if self.family.is_marshall_olkin() != self.truth.lambda.is_some() {
            return Err(Error::Config(format!(
                "truth for {} must {}include lambda",
                self.family,
                if self.family.is_marshall_olkin() { "" } else { "not " }
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.family,
            n_alpha: 3,
            n_beta: 3,
        }
    }

    /// Natural-scale truth (a, b, λ).
    pub fn truth_vector(&self) -> Vec<f64> {
        let mut v = self.truth.a.clone();
        v.extend(&self.truth.b);
        v.extend(self.truth.lambda);
        v
    }
}

/// Truth used for the Marshall-Olkin Gompertz study.
pub fn mo_gompertz_truth() -> RegressionCoefficients {
    RegressionCoefficients {
        a: vec![-1.2, 0.5, 0.2],
        b: vec![-1.1, 1.5, 0.9],
        lambda: Some(2.0),
    }
}

/// Truth used for the Marshall-Olkin inverse Gaussian study.
pub fn mo_ig_truth() -> RegressionCoefficients {
    RegressionCoefficients {
        a: vec![-1.0, 0.5, 0.2],
        b: vec![-1.1, 1.8, 0.8],
        lambda: Some(0.5),
    }
}

/// A generated dataset with its latent quantities.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub data: SurvivalDataset,
    pub cured: Vec<bool>,
    /// Latent event time, +∞ for cured subjects.
    pub latent: Vec<f64>,
    /// Quantile level u that produced each finite latent time (0 when cured).
    pub u: Vec<f64>,
    pub cure_probability: Vec<f64>,
}

fn rng_for(seed: u64, rep: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 8) | attempt);
    rng
}

/// One replicate's dataset. Replicate `rep` has its own RNG stream, so it can
/// be regenerated in isolation.
pub fn generate_dataset(config: &SimConfig, rep: u64) -> Result<SurvivalDataset> {
    Ok(generate_sample(config, rep)?.data)
}

pub fn generate_sample(config: &SimConfig, rep: u64) -> Result<GeneratedSample> {
    config.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(config.seed, rep, attempt);
        if let Some(s) = draw_once(config, &mut rng)? {
            return Ok(s);
        }
        warn!("replicate {rep}: every subject cured on attempt {attempt}; regenerating");
    }
    Err(Error::InvalidData(format!(
        "replicate {rep}: all subjects cured in {MAX_ATTEMPTS} attempts"
    )))
}

fn draw_once(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Option<GeneratedSample>> {
    let n = config.n;
    let mut a_rows = Vec::with_capacity(n);
    let mut b_rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x11 = f64::from(u8::from(rng.random_bool(0.7)));
        let x12: f64 = rng.random();
        let x21 = f64::from(u8::from(rng.random_bool(0.5)));
        let x22: f64 = rng.random();
        a_rows.push(vec![x11, x12]);
        b_rows.push(vec![x21, x22]);
    }
    let names_a = ["x11".to_string(), "x12".to_string()];
    let names_b = ["x21".to_string(), "x22".to_string()];
    let x = DesignMatrices::from_covariates(&a_rows, &b_rows, &names_a, &names_b)?;
    let laws = per_observation_laws(&config.truth, &x, config.family)?;

    let mut cured = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for law in &laws {
        let p = law.cure_fraction().p;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "cure fraction {p} outside (0, 1); the truth must be defective for every row"
            )));
        }
        probs.push(p);
        let is_cured = rng.random::<f64>() < p;
        cured.push(is_cured);
        if is_cured {
            latent.push(f64::INFINITY);
            us.push(0.0);
        } else {
            let mut u = rng.random::<f64>() * (1.0 - p);
            while u <= 0.0 {
                u = rng.random::<f64>() * (1.0 - p);
            }
            latent.push(law.quantile(u)?);
            us.push(u);
        }
    }
    let max_finite = latent
        .iter()
        .copied()
        .filter(|t| t.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_finite == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut t = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for &ts in &latent {
        let mut c = rng.random::<f64>() * max_finite;
        while c <= 0.0 {
            c = rng.random::<f64>() * max_finite;
        }
        if ts <= c {
            t.push(ts);
            delta.push(true);
        } else {
            t.push(c);
            delta.push(false);
        }
    }
    Ok(Some(GeneratedSample {
        data: SurvivalDataset::new(t, delta, x)?,
        cured,
        latent,
        u: us,
        cure_probability: probs,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Frequentist(FitOptions),
    Bayesian {
        sampler: SamplerConfig,
        /// `None` for the vague default.
        prior: Option<PriorSpec>,
    },
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Frequentist(_) => "frequentist",
            Engine::Bayesian { .. } => "bayesian",
        }
    }

    /// 2500 iterations with 500 burn-in.
    pub fn desk_bayes() -> Self {
        Engine::Bayesian {
            sampler: SamplerConfig {
                n_iter: 2500,
                burn_in: 500,
                ..SamplerConfig::default()
            },
            prior: None,
        }
    }
}

/// Point estimates, their uncertainty and interval of one replicate, all on
/// the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEstimate {
    pub estimate: Vec<f64>,
    /// Standard error or posterior SD.
    pub spread: Vec<f64>,
    pub interval: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    /// Mean of the per-replicate SE or posterior SD.
    pub mean_sd: f64,
    /// Standard deviation of the estimates across replicates.
    pub empirical_sd: f64,
    /// (mean − truth)/truth·100.
    pub relative_bias_pct: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub family: Family,
    pub engine: String,
    pub n: usize,
    pub replicates: usize,
    pub converged: usize,
    pub failures: usize,
    pub parameters: Vec<ParameterSummary>,
}

/// Fits one replicate with the chosen engine. `None` marks a failed fit.
pub fn fit_replicate(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    engine: &Engine,
    rep_seed: u64,
) -> Option<ReplicateEstimate> {
    match engine {
        Engine::Frequentist(opts) => {
            let opts = FitOptions {
                seed: opts.seed ^ rep_seed,
                ..opts.clone()
            };
            let fit = fit_mle(data, spec, None, &opts).ok()?;
            if !fit.converged || fit.pseudo_inverse {
                return None;
            }
            Some(ReplicateEstimate {
                estimate: fit.estimates(),
                spread: fit.std_errors?,
                interval: fit.ci?,
            })
        }
        Engine::Bayesian { sampler, prior } => {
            let prior = prior.clone().unwrap_or_else(|| PriorSpec::vague(spec));
            let cfg = SamplerConfig {
                seed: sampler.seed ^ rep_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
                ..sampler.clone()
            };
            let sample = sample_posterior(data, spec, &prior, &cfg).ok()?;
            let summary = posterior_summary(&sample, 0.95).ok()?;
            Some(ReplicateEstimate {
                estimate: summary.iter().map(|s| s.mean).collect(),
                spread: summary.iter().map(|s| s.sd).collect(),
                interval: summary.iter().map(|s| (s.lower, s.upper)).collect(),
            })
        }
    }
}

/// Generate → fit → summarize over all replicates.
pub fn monte_carlo(config: &SimConfig, engine: &Engine) -> Result<MonteCarloReport> {
    let spec = config.spec();
    monte_carlo_with(config, engine.name(), |data, rep| {
        fit_replicate(data, &spec, engine, rep)
    })
}

/// The harness with a caller-supplied estimator.
pub fn monte_carlo_with<E>(config: &SimConfig, engine_name: &str, estimator: E) -> Result<MonteCarloReport>
where
    E: Fn(&SurvivalDataset, u64) -> Option<ReplicateEstimate> + Sync,
{
    config.validate()?;
    let truth = config.truth_vector();
    let outcomes: Vec<Option<ReplicateEstimate>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let data = generate_dataset(config, rep).ok()?;
            let est = estimator(&data, rep)?;
            (est.estimate.len() == truth.len()
                && est.estimate.iter().chain(&est.spread).all(|v| v.is_finite()))
            .then_some(est)
        })
        .collect();
    let ok: Vec<&ReplicateEstimate> = outcomes.iter().flatten().collect();
    let failures = config.replicates - ok.len();
    if failures as f64 > MAX_FAILURE_SHARE * config.replicates as f64 {
        return Err(Error::NonConvergence(format!(
            "{failures} of {} replicates failed",
            config.replicates
        )));
    }
    info!(
        "{} {engine_name} n={}: {} replicates, {failures} failed",
        config.family,
        config.n,
        config.replicates
    );
    let m = ok.len() as f64;
    let names = config.spec().parameter_names();
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let ests: Vec<f64> = ok.iter().map(|e| e.estimate[j]).collect();
            let (mean, empirical_sd) = mean_sd(&ests);
            let mean_sd = ok.iter().map(|e| e.spread[j]).sum::<f64>() / m;
            let covered = ok
                .iter()
                .filter(|e| e.interval[j].0 <= truth[j] && truth[j] <= e.interval[j].1)
                .count();
            ParameterSummary {
                name,
                truth: truth[j],
                mean,
                mean_sd,
                empirical_sd,
                relative_bias_pct: (mean - truth[j]) / truth[j] * 100.0,
                coverage: covered as f64 / m,
            }
        })
        .collect();
    Ok(MonteCarloReport {
        family: config.family,
        engine: engine_name.to_string(),
        n: config.n,
        replicates: config.replicates,
        converged: ok.len(),
        failures,
        parameters,
    })
}

/// One row per parameter: the columns of a Monte Carlo results table.
pub fn write_report_csv<W: Write>(reports: &[MonteCarloReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "family",
        "engine",
        "n",
        "parameter",
        "truth",
        "mean",
        "sd",
        "empirical_sd",
        "bias_pct",
        "coverage",
        "converged",
        "failures",
    ])?;
    for r in reports {
        for p in &r.parameters {
            w.write_record([
                r.family.as_str().to_string(),
                r.engine.clone(),
                r.n.to_string(),
                p.name.clone(),
                fmt_f64(p.truth),
                fmt_f64(p.mean),
                fmt_f64(p.mean_sd),
                fmt_f64(p.empirical_sd),
                fmt_f64(p.relative_bias_pct),
                fmt_f64(p.coverage),
                r.converged.to_string(),
                r.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parameter vector of the truth, for likelihood evaluations in tests and
/// benchmarks.
pub fn truth_params(config: &SimConfig) -> Result<ParamVector> {
    ParamVector::from_coefficients(config.spec(), &config.truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            family: Family::MoGompertz,
            truth: mo_gompertz_truth(),
            n,
            replicates: 4,
            seed: 11,
        }
    }

    #[test]
    fn cured_subjects_are_censored() {
        let s = generate_sample(&cfg(500), 0).unwrap();
        for i in 0..500 {
            if s.cured[i] {
                assert!(!s.data.events()[i]);
            }
        }
        assert!(s.cured.iter().any(|&c| c));
    }

    #[test]
    fn replicate_streams_are_reproducible() {
        let c = cfg(50);
        let a = generate_dataset(&c, 3).unwrap();
        let b = generate_dataset(&c, 3).unwrap();
        let other = generate_dataset(&c, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn proper_truth_is_rejected() {
        let mut c = cfg(50);
        c.truth.a = vec![0.5, 0.1, 0.1];
        assert!(generate_dataset(&c, 0).is_err());
    }

    #[test]
    fn stub_estimator_recovers_truth() {
        let c = cfg(20);
        let truth = c.truth_vector();
        let r = monte_carlo_with(&c, "stub", |_, _| {
            Some(ReplicateEstimate {
                estimate: truth.clone(),
                spread: vec![0.1; truth.len()],
                interval: truth.iter().map(|&t| (t - 0.1, t + 0.1)).collect(),
            })
        })
        .unwrap();
        for p in &r.parameters {
            assert_eq!(p.relative_bias_pct, 0.0);
            assert_eq!(p.coverage, 1.0);
        }
    }

    #[test]
    fn too_many_failures_abort() {
        let c = cfg(20);
        assert!(monte_carlo_with(&c, "stub", |_, _| None).is_err());
    }
}
