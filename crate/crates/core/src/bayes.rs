//! Bayesian inference: Normal priors on the link coefficients, a Gamma prior
//! on λ, and adaptive random-walk Metropolis on (a, b, log λ).
//!
//! Two kernels share the [`LogDensity`] contract. [`SamplerKind::Block`]
//! proposes all coordinates at once from a Gaussian whose covariance is
//! learned from the chain history; [`SamplerKind::Componentwise`] updates one
//! coordinate at a time with its own step size. Either way, adaptation runs
//! only during burn-in and the kernel is frozen afterwards, so the retained
//! draws come from a fixed Metropolis kernel that satisfies detailed balance.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::likelihood::{loglik_internal, ModelSpec, ParamVector, SurvivalDataset};
use crate::mle::{fit_mle, pattern_cures, FitOptions};
use crate::special::LN_SQRT_2PI;

/// Independent Normal priors on aₖ and bⱼ, Gamma(shape, rate) on λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub a_means: Vec<f64>,
    pub a_vars: Vec<f64>,
    pub b_means: Vec<f64>,
    pub b_vars: Vec<f64>,
    pub lambda_shape: f64,
    pub lambda_rate: f64,
}

impl PriorSpec {
    /// N(0, 10²) on every coefficient and Gamma(0.01, 0.01) on λ.
    pub fn vague(spec: &ModelSpec) -> Self {
        Self::uniform_normal(spec, 0.0, 100.0, 0.01, 0.01)
    }

    pub fn uniform_normal(
        spec: &ModelSpec,
        mean: f64,
        var: f64,
        lambda_shape: f64,
        lambda_rate: f64,
    ) -> Self {
        Self {
            a_means: vec![mean; spec.n_alpha],
            a_vars: vec![var; spec.n_alpha],
            b_means: vec![mean; spec.n_beta],
            b_vars: vec![var; spec.n_beta],
            lambda_shape,
            lambda_rate,
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.a_means.len() != spec.n_alpha || self.a_vars.len() != spec.n_alpha {
            return Err(Error::Dimension {
                what: "alpha prior hyperparameters",
                expected: spec.n_alpha,
                got: self.a_means.len().min(self.a_vars.len()),
            });
        }
        if self.b_means.len() != spec.n_beta || self.b_vars.len() != spec.n_beta {
            return Err(Error::Dimension {
                what: "beta prior hyperparameters",
                expected: spec.n_beta,
                got: self.b_means.len().min(self.b_vars.len()),
            });
        }
        if self
            .a_vars
            .iter()
            .chain(&self.b_vars)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        if !(self.lambda_shape > 0.0 && self.lambda_rate > 0.0) {
            return Err(Error::Config(
                "Gamma prior hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Log prior density at natural-scale (a, b, λ); −∞ for λ ≤ 0.
    pub fn log_density(&self, spec: &ModelSpec, natural: &[f64]) -> f64 {
        let normal = |x: f64, m: f64, v: f64| -LN_SQRT_2PI - 0.5 * v.ln() - 0.5 * (x - m).powi(2) / v;
        let (a, rest) = natural.split_at(spec.n_alpha);
        let (b, l) = rest.split_at(spec.n_beta);
        let mut lp = 0.0;
        for (k, &x) in a.iter().enumerate() {
            lp += normal(x, self.a_means[k], self.a_vars[k]);
        }
        for (k, &x) in b.iter().enumerate() {
            lp += normal(x, self.b_means[k], self.b_vars[k]);
        }
        if let Some(&lambda) = l.first() {
            if !(lambda > 0.0) {
                return f64::NEG_INFINITY;
            }
            let (g, w) = (self.lambda_shape, self.lambda_rate);
            lp += g * w.ln() - ln_gamma(g) + (g - 1.0) * lambda.ln() - w * lambda;
        }
        lp
    }
}

/// log π(a, b, λ | D) up to a constant, with λ on its natural scale.
pub fn log_posterior(theta: &ParamVector, data: &SurvivalDataset, prior: &PriorSpec) -> f64 {
    log_posterior_natural(theta.spec(), &theta.natural(), data, prior)
}

/// As [`log_posterior`] from a natural-scale slice; −∞ when λ ≤ 0.
pub fn log_posterior_natural(
    spec: &ModelSpec,
    natural: &[f64],
    data: &SurvivalDataset,
    prior: &PriorSpec,
) -> f64 {
    if natural.len() != spec.dim() || natural.iter().any(|v| !v.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let lp = prior.log_density(spec, natural);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let mut internal = natural.to_vec();
    if let Some(k) = spec.lambda_index() {
        internal[k] = internal[k].ln();
    }
    let v = lp + loglik_internal(spec, &internal, data);
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// An unnormalized log density on ℝᵈ; −∞ marks points outside the support.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> LogDensity for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (self.1)(x)
    }
}

/// The posterior on the sampler's space (a, b, log λ), including the
/// log λ Jacobian.
pub struct TransformedPosterior<'a> {
    pub spec: ModelSpec,
    pub data: &'a SurvivalDataset,
    pub prior: &'a PriorSpec,
}

impl LogDensity for TransformedPosterior<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let mut natural = x.to_vec();
        let mut jacobian = 0.0;
        if let Some(k) = self.spec.lambda_index() {
            natural[k] = x[k].exp();
            jacobian = x[k];
        }
        let lp = self.prior.log_density(&self.spec, &natural);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let v = lp + jacobian + loglik_internal(&self.spec, x, self.data);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Joint Gaussian proposals with covariance learned during burn-in.
    Block,
    /// One coordinate at a time with per-coordinate step sizes.
    Componentwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total iterations, burn-in included.
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub kind: SamplerKind,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 8000,
            burn_in: 2000,
            seed: 2024,
            kind: SamplerKind::Block,
            thin: 1,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.n_iter, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Retained states of one chain on the sampler's space.
#[derive(Debug, Clone)]
pub struct Chain {
    /// S × d.
    pub draws: DMatrix<f64>,
    /// Acceptance rate over the retained segment.
    pub acceptance_rate: f64,
    /// Log target at each retained state.
    pub log_density: Vec<f64>,
}

const BLOCK_TARGET: f64 = 0.30;
const COMPONENT_TARGET: f64 = 0.44;

/// Runs one Metropolis chain from `x0`. `proposal_cov` seeds the block
/// kernel's covariance; without it an identity scaled by 0.01 is used.
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    x0: &[f64],
    proposal_cov: Option<&DMatrix<f64>>,
    config: &SamplerConfig,
) -> Result<Chain> {
    config.validate()?;
    let d = target.dim();
    if x0.len() != d {
        return Err(Error::Dimension {
            what: "initial state",
            expected: d,
            got: x0.len(),
        });
    }
    let lp0 = target.log_density(x0);
    if !lp0.is_finite() {
        return Err(Error::Domain(
            "log posterior is not finite at the initial state".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.kind {
        SamplerKind::Block => block_chain(target, x0, lp0, proposal_cov, config, &mut rng),
        SamplerKind::Componentwise => {
            componentwise_chain(target, x0, lp0, proposal_cov, config, &mut rng)
        }
    }
}

fn retained(config: &SamplerConfig) -> usize {
    (config.n_iter - config.burn_in).div_ceil(config.thin)
}

fn cholesky_with_jitter(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let scale = (0..d).map(|j| cov[(j, j)].abs()).fold(0.0, f64::max).max(1e-12);
    let mut jitter = 0.0;
    for _ in 0..30 {
        let m = cov + DMatrix::identity(d, d) * jitter;
        if let Some(ch) = m.cholesky() {
            return ch.l();
        }
        jitter = if jitter == 0.0 { scale * 1e-10 } else { jitter * 10.0 };
    }
    DMatrix::identity(d, d) * scale.sqrt()
}

fn block_chain<D: LogDensity + ?Sized>(
    target: &D,
    x0: &[f64],
    lp0: f64,
    proposal_cov: Option<&DMatrix<f64>>,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Chain> {
    let d = x0.len();
    let base_cov = match proposal_cov {
        Some(c) if c.nrows() == d && c.ncols() == d && c.iter().all(|v| v.is_finite()) => c.clone(),
        _ => DMatrix::identity(d, d) * 0.01,
    };
    let mut cov = base_cov.clone();
    let mut chol = cholesky_with_jitter(&cov);
    let mut log_scale = (2.38 / (d as f64).sqrt()).ln();

    let mut x = DVector::from_column_slice(x0);
    let mut lp = lp0;
    // Running moments of the burn-in path.
    let mut mean = x.clone();
    let mut m2 = DMatrix::<f64>::zeros(d, d);
    let mut count = 1.0;

    let s_keep = retained(config);
    let mut draws = DMatrix::zeros(s_keep, d);
    let mut lps = Vec::with_capacity(s_keep);
    let mut accepted_kept = 0usize;
    let mut kept = 0usize;

    for it in 0..config.n_iter {
        let z: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let prop = &x + (&chol * z) * log_scale.exp();
        let lp_prop = target.log_density(prop.as_slice());
        let accept = lp_prop.is_finite() && rng.random::<f64>().ln() < lp_prop - lp;
        if accept {
            x = prop;
            lp = lp_prop;
        }

        if it < config.burn_in {
            let rate = if accept { 1.0 } else { 0.0 };
            let gamma = 1.0 / ((it + 1) as f64).powf(0.6);
            log_scale += gamma * (rate - BLOCK_TARGET);
            count += 1.0;
            let delta = &x - &mean;
            mean += &delta / count;
            let delta2 = &x - &mean;
            m2 += &delta * delta2.transpose();
            if it >= 200 && it % 100 == 99 {
                let emp = &m2 / (count - 1.0);
                // Shrink toward the seed covariance while history is short.
                let w = (count / (count + 10.0 * d as f64)).min(1.0);
                cov = emp * w + &base_cov * (1.0 - w);
                chol = cholesky_with_jitter(&cov);
            }
        } else if (it - config.burn_in) % config.thin == 0 {
            draws.row_mut(kept).copy_from(&x.transpose());
            lps.push(lp);
            kept += 1;
            accepted_kept += usize::from(accept);
        }
    }
    Ok(Chain {
        draws,
        acceptance_rate: accepted_kept as f64 / kept.max(1) as f64,
        log_density: lps,
    })
}

fn componentwise_chain<D: LogDensity + ?Sized>(
    target: &D,
    x0: &[f64],
    lp0: f64,
    proposal_cov: Option<&DMatrix<f64>>,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Chain> {
    let d = x0.len();
    let mut log_step: Vec<f64> = (0..d)
        .map(|j| match proposal_cov {
            Some(c) if c.nrows() == d && c[(j, j)] > 0.0 && c[(j, j)].is_finite() => {
                (2.4 * c[(j, j)].sqrt()).ln()
            }
            _ => 0.1f64.ln(),
        })
        .collect();
    let mut x = x0.to_vec();
    let mut lp = lp0;
    let s_keep = retained(config);
    let mut draws = DMatrix::zeros(s_keep, d);
    let mut lps = Vec::with_capacity(s_keep);
    let mut accepted_kept = 0usize;
    let mut kept = 0usize;

    for it in 0..config.n_iter {
        let mut n_acc = 0usize;
        for j in 0..d {
            let old = x[j];
            let z: f64 = rng.sample(StandardNormal);
            x[j] = old + log_step[j].exp() * z;
            let lp_prop = target.log_density(&x);
            let accept = lp_prop.is_finite() && rng.random::<f64>().ln() < lp_prop - lp;
            if accept {
                lp = lp_prop;
                n_acc += 1;
            } else {
                x[j] = old;
            }
            if it < config.burn_in {
                let gamma = 1.0 / ((it + 1) as f64).powf(0.6);
                log_step[j] += gamma * (f64::from(u8::from(accept)) - COMPONENT_TARGET);
            }
        }
        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            draws.row_mut(kept).copy_from_slice(&x);
            lps.push(lp);
            kept += 1;
            accepted_kept += n_acc;
        }
    }
    Ok(Chain {
        draws,
        acceptance_rate: accepted_kept as f64 / (kept.max(1) * d) as f64,
        log_density: lps,
    })
}

/// Retained posterior draws on the natural scale, with convergence
/// diagnostics per parameter.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub spec: ModelSpec,
    /// S × d, natural scale (λ > 0).
    pub draws: DMatrix<f64>,
    pub burn_in: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PosteriorSample {
    /// Wraps a natural-scale draw matrix and computes its diagnostics.
    pub fn from_draws(
        spec: ModelSpec,
        draws: DMatrix<f64>,
        burn_in: usize,
        seed: u64,
        acceptance_rate: f64,
    ) -> Result<Self> {
        if draws.ncols() != spec.dim() {
            return Err(Error::Dimension {
                what: "draw columns",
                expected: spec.dim(),
                got: draws.ncols(),
            });
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("posterior draws contain non-finite values".into()));
        }
        if let Some(k) = spec.lambda_index() {
            if draws.column(k).iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidData("lambda draws must be positive".into()));
            }
        }
        let cols: Vec<Vec<f64>> = (0..draws.ncols())
            .map(|j| draws.column(j).iter().copied().collect())
            .collect();
        let ess: Vec<f64> = cols.iter().map(|c| effective_sample_size(c)).collect();
        let rhat: Vec<f64> = cols.iter().map(|c| split_rhat(c)).collect();
        let mut warnings = Vec::new();
        let names = spec.parameter_names();
        for j in 0..cols.len() {
            if rhat[j] > RHAT_MAX || ess[j] < ESS_MIN {
                warnings.push(format!(
                    "{}: convergence gate failed (R-hat {:.4}, ESS {:.0})",
                    names[j], rhat[j], ess[j]
                ));
            }
        }
        if acceptance_rate < 0.01 {
            warnings.push(format!(
                "acceptance rate {acceptance_rate:.4} is below 1%; the chain barely moves"
            ));
        }
        Ok(Self {
            spec,
            draws,
            burn_in,
            seed,
            acceptance_rate,
            ess,
            rhat,
            warnings,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn names(&self) -> Vec<String> {
        self.spec.parameter_names()
    }

    pub fn draw(&self, s: usize) -> Vec<f64> {
        self.draws.row(s).iter().copied().collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.draws.ncols())
            .map(|j| self.draws.column(j).mean())
            .collect()
    }

    /// Posterior mean as a parameter vector.
    pub fn mean_params(&self) -> Result<ParamVector> {
        ParamVector::from_natural_slice(self.spec, &self.mean())
    }

    /// Whether every parameter passed the R̂ and ESS gate.
    pub fn passes_gate(&self) -> bool {
        self.rhat.iter().all(|&r| r <= RHAT_MAX) && self.ess.iter().all(|&e| e >= ESS_MIN)
    }
}

pub const RHAT_MAX: f64 = 1.05;
pub const ESS_MIN: f64 = 400.0;
/// Draw count below which summaries and predictive criteria are refused.
pub const MIN_DRAWS: usize = 1000;

/// Draws from the posterior, started at the maximum likelihood estimate with
/// the inverse observed information as the initial proposal covariance.
pub fn sample_posterior(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    prior: &PriorSpec,
    config: &SamplerConfig,
) -> Result<PosteriorSample> {
    config.validate()?;
    prior.validate(spec)?;
    spec.check_design(data.design())?;
    let (start, cov) = match fit_mle(data, spec, None, &FitOptions::default()) {
        Ok(fit) => (fit.theta_hat.internal().to_vec(), fit.covariance_internal),
        Err(e) => {
            warn!("no maximum likelihood start ({e}); starting from the default point");
            (
                crate::mle::default_init(data, spec)?.into_internal(),
                None,
            )
        }
    };
    sample_posterior_from(data, spec, prior, config, &start, cov.as_ref())
}

/// As [`sample_posterior`] from a given internal-scale start and optional
/// proposal covariance.
pub fn sample_posterior_from(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    prior: &PriorSpec,
    config: &SamplerConfig,
    start: &[f64],
    proposal_cov: Option<&DMatrix<f64>>,
) -> Result<PosteriorSample> {
    prior.validate(spec)?;
    let target = TransformedPosterior {
        spec: *spec,
        data,
        prior,
    };
    let chain = run_chain(&target, start, proposal_cov, config)?;
    let mut draws = chain.draws;
    if let Some(k) = spec.lambda_index() {
        draws.column_mut(k).apply(|v| *v = v.exp());
    }
    let sample =
        PosteriorSample::from_draws(*spec, draws, config.burn_in, config.seed, chain.acceptance_rate)?;
    for w in &sample.warnings {
        warn!("{} posterior: {w}", spec.family);
    }
    Ok(sample)
}

/// Per-parameter posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mean, SD and the equal-tailed percentile interval at `level`.
pub fn posterior_summary(sample: &PosteriorSample, level: f64) -> Result<Vec<ParamSummary>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    let s = sample.n_draws();
    if s < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            got: s,
            need: MIN_DRAWS,
        });
    }
    let names = sample.names();
    Ok((0..sample.draws.ncols())
        .map(|j| {
            let mut col: Vec<f64> = sample.draws.column(j).iter().copied().collect();
            let (mean, sd) = mean_sd(&col);
            col.sort_by(f64::total_cmp);
            let tail = 0.5 * (1.0 - level);
            ParamSummary {
                name: names[j].clone(),
                mean,
                sd,
                lower: percentile_sorted(&col, tail),
                upper: percentile_sorted(&col, 1.0 - tail),
            }
        })
        .collect())
}

/// Posterior of the cure fraction p of one covariate pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorCure {
    pub covariates: Vec<f64>,
    pub n_rows: usize,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// Posterior mean of the basal cure fraction p₀.
    pub mean_p0: f64,
    /// Cure fraction at the posterior mean of θ.
    pub plug_in: f64,
}

/// Cure fractions of each distinct covariate pattern, averaged over draws.
/// Empty when the design has more than [`crate::mle::MAX_CURE_PATTERNS`]
/// patterns.
pub fn posterior_cures(
    sample: &PosteriorSample,
    data: &SurvivalDataset,
    level: f64,
) -> Result<Vec<PosteriorCure>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    sample.spec.check_design(data.design())?;
    let per_draw = (0..sample.n_draws())
        .map(|s| {
            let theta = ParamVector::from_natural_slice(sample.spec, &sample.draw(s))?;
            pattern_cures(data, &theta)
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = per_draw.first() else {
        return Ok(Vec::new());
    };
    let theta_bar: Vec<f64> = sample.draws.column_iter().map(|c| c.mean()).collect();
    let at_mean = pattern_cures(data, &ParamVector::from_natural_slice(sample.spec, &theta_bar)?)?;
    let tail = 0.5 * (1.0 - level);
    Ok(first
        .iter()
        .enumerate()
        .map(|(k, pat)| {
            let mut p: Vec<f64> = per_draw.iter().map(|d| d[k].cure.p).collect();
            let p0: Vec<f64> = per_draw.iter().map(|d| d[k].cure.p0).collect();
            let (mean, sd) = mean_sd(&p);
            p.sort_by(f64::total_cmp);
            PosteriorCure {
                covariates: pat.covariates.clone(),
                n_rows: pat.n_rows,
                mean,
                sd,
                lower: percentile_sorted(&p, tail),
                upper: percentile_sorted(&p, 1.0 - tail),
                mean_p0: p0.iter().sum::<f64>() / p0.len() as f64,
                plug_in: at_mean[k].cure.p,
            }
        })
        .collect())
}

/// Sample mean and standard deviation (denominator S − 1).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let Some(&x0) = x.first() else {
        return (f64::NAN, f64::NAN);
    };
    let n = x.len() as f64;
    // Shift by the first value: exact for constant input, less cancellation.
    let shift = x.iter().map(|v| v - x0).sum::<f64>() / n;
    let mean = x0 + shift;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - x0 - shift).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation percentile of sorted data: position (S − 1)·q.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Effective sample size from Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = acov(0);
    if !(g0 > 0.0) {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    // Antithetic chains can drive τ below 1; cap ESS at S·log10(S).
    n as f64 / tau.max(1.0 / (n as f64).log10())
}

/// Split-chain potential scale reduction of a single chain.
pub fn split_rhat(x: &[f64]) -> f64 {
    let m = x.len() / 2;
    if m < 2 {
        return f64::NAN;
    }
    let halves = [&x[..m], &x[x.len() - m..]];
    let stats: Vec<(f64, f64)> = halves
        .iter()
        .map(|h| {
            let (mu, sd) = mean_sd(h);
            (mu, sd * sd)
        })
        .collect();
    let w = 0.5 * (stats[0].1 + stats[1].1);
    let grand = 0.5 * (stats[0].0 + stats[1].0);
    let b = m as f64 * ((stats[0].0 - grand).powi(2) + (stats[1].0 - grand).powi(2));
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (m as f64 - 1.0) / m as f64 * w + b / m as f64;
    (var_plus / w).sqrt()
}
