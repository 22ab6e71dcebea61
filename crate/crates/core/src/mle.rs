//! Maximum likelihood: BFGS on the internal scale, observed-information
//! covariance mapped to the natural scale, Wald intervals and the
//! likelihood-ratio test between a base family and its Marshall-Olkin
//! extension.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::CureFraction;
use crate::error::{Error, Result};
use crate::km::KaplanMeier;
use crate::likelihood::{
    evaluate_internal, hessian_loglik, loglik_internal, ModelSpec, ParamVector, SurvivalDataset,
};
use crate::optim::{minimize, BfgsOptions, BfgsResult};
use crate::regression::{law_for, linear_predictors};
use crate::special::{chi2_sf, std_normal_quantile};

/// When the jittered restarts run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartPolicy {
    /// Only when no start converged.
    OnFailure,
    /// Always, keeping the best converged optimum.
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    pub restarts: usize,
    /// Half-width of the uniform jitter added to the default start.
    pub jitter: f64,
    pub restart_policy: RestartPolicy,
    /// Seeds a Marshall-Olkin fit with the base-family optimum (λ = 1).
    pub seed_with_base: bool,
    pub seed: u64,
    /// Confidence level of the reported Wald intervals.
    pub level: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bfgs: BfgsOptions::default(),
            restarts: 8,
            jitter: 0.5,
            restart_policy: RestartPolicy::OnFailure,
            seed_with_base: true,
            seed: 0x5eed,
            level: 0.95,
        }
    }
}

/// Cure fractions of one distinct covariate pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternCure {
    /// Non-intercept covariates of x1 followed by those of x2.
    pub covariates: Vec<f64>,
    pub n_rows: usize,
    pub cure: CureFraction,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub theta_hat: ParamVector,
    /// Covariance of the natural-scale estimates (a, b, λ).
    pub covariance: Option<DMatrix<f64>>,
    /// Covariance on the internal scale (a, b, log λ).
    pub covariance_internal: Option<DMatrix<f64>>,
    /// The covariance came from a pseudo-inverse of a singular information.
    pub pseudo_inverse: bool,
    pub std_errors: Option<Vec<f64>>,
    pub ci: Option<Vec<(f64, f64)>>,
    pub level: f64,
    pub loglik_max: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_inf_norm: f64,
    pub n_obs: usize,
    pub clamped_rows: usize,
    pub cure_estimates: Vec<PatternCure>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn names(&self) -> Vec<String> {
        self.spec.parameter_names()
    }

    /// Natural-scale estimates (a, b, λ).
    pub fn estimates(&self) -> Vec<f64> {
        self.theta_hat.natural()
    }

    pub fn n_params(&self) -> usize {
        self.spec.dim()
    }
}

/// Largest number of covariate patterns for which cure fractions are tabulated.
pub const MAX_CURE_PATTERNS: usize = 64;

/// Default start: α intercept −0.5 when the Kaplan-Meier curve levels off
/// above 0.05 and +0.5 otherwise, β intercept log(1/mean t), log λ = 0.
pub fn default_init(data: &SurvivalDataset, spec: &ModelSpec) -> Result<ParamVector> {
    let mut v = vec![0.0; spec.dim()];
    if !data.is_empty() {
        let km = KaplanMeier::fit(data.times(), data.events())?;
        v[0] = if km.final_value() > 0.05 { -0.5 } else { 0.5 };
        let mean_t = data.times().iter().sum::<f64>() / data.len() as f64;
        v[spec.n_alpha] = (1.0 / mean_t).ln();
    }
    ParamVector::from_internal(*spec, v)
}

fn validate(data: &SurvivalDataset, spec: &ModelSpec) -> Result<()> {
    spec.check_design(data.design())?;
    if data.len() < spec.dim() + 1 {
        return Err(Error::InvalidData(format!(
            "need at least {} observations for {} parameters, got {}",
            spec.dim() + 1,
            spec.dim(),
            data.len()
        )));
    }
    Ok(())
}

fn run_bfgs(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    start: &[f64],
    opts: &BfgsOptions,
) -> Option<BfgsResult> {
    let objective = |v: &[f64]| -loglik_internal(spec, v, data);
    minimize(objective, start, opts).ok()
}

fn better(a: &BfgsResult, b: &BfgsResult) -> bool {
    // Converged beats unconverged; otherwise the lower objective wins.
    match (a.converged, b.converged) {
        (true, false) => true,
        (false, true) => false,
        _ => a.fx < b.fx,
    }
}

/// The best point found by [`optimize`], without covariance.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub theta: ParamVector,
    pub loglik: f64,
    pub converged: bool,
    pub(crate) run: BfgsResult,
}

/// Maximizes the log-likelihood from the given starts, then from jittered
/// copies of the first start as the restart policy dictates.
pub fn optimize(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    starts: &[ParamVector],
    opts: &FitOptions,
) -> Result<Optimum> {
    validate(data, spec)?;
    if starts.is_empty() {
        return Err(Error::Config("at least one starting point is required".into()));
    }
    let mut best: Option<BfgsResult> = None;
    let consider = |r: Option<BfgsResult>, best: &mut Option<BfgsResult>| {
        if let Some(r) = r {
            if r.fx.is_finite() && best.as_ref().is_none_or(|b| better(&r, b)) {
                *best = Some(r);
            }
        }
    };
    for s in starts {
        if s.spec() != spec {
            return Err(Error::Config("starting point has a different layout".into()));
        }
        consider(run_bfgs(data, spec, s.internal(), &opts.bfgs), &mut best);
    }

    let do_restarts = match opts.restart_policy {
        RestartPolicy::Never => false,
        RestartPolicy::Always => true,
        RestartPolicy::OnFailure => !best.as_ref().is_some_and(|b| b.converged),
    };
    if do_restarts && opts.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let base = starts[0].internal();
        for _ in 0..opts.restarts {
            let jittered: Vec<f64> = base
                .iter()
                .map(|&v| v + rng.random_range(-opts.jitter..=opts.jitter))
                .collect();
            if !loglik_internal(spec, &jittered, data).is_finite() {
                continue;
            }
            consider(run_bfgs(data, spec, &jittered, &opts.bfgs), &mut best);
        }
    }

    let Some(best) = best else {
        return Err(Error::NonConvergence(
            "no starting point gave a finite log-likelihood".into(),
        ));
    };
    Ok(Optimum {
        theta: ParamVector::from_internal(*spec, best.x.clone())?,
        loglik: -best.fx,
        converged: best.converged,
        run: best,
    })
}

/// [`optimize`] followed by covariance, intervals and cure fractions.
pub fn fit_from_starts(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    starts: &[ParamVector],
    opts: &FitOptions,
) -> Result<FitResult> {
    let opt = optimize(data, spec, starts, opts)?;
    assemble(data, opt.theta, &opt.run, opts)
}

/// Fits `spec` by maximum likelihood. Marshall-Olkin fits are also started
/// from the base-family optimum unless `seed_with_base` is off.
pub fn fit_mle(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    init: Option<&ParamVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    validate(data, spec)?;
    let mut starts = vec![match init {
        Some(p) => p.clone(),
        None => default_init(data, spec)?,
    }];
    if spec.family.is_marshall_olkin() && opts.seed_with_base {
        let base = fit_mle(data, &spec.restricted(), None, opts)?;
        starts.push(seed_from_restricted(&base, spec)?);
    }
    fit_from_starts(data, spec, &starts, opts)
}

/// Fits the base family and its Marshall-Olkin extension, the latter seeded
/// at the former, so that ℓ̂_full ≥ ℓ̂_restricted.
pub fn fit_nested(
    data: &SurvivalDataset,
    full: &ModelSpec,
    opts: &FitOptions,
) -> Result<(FitResult, FitResult)> {
    if !full.family.is_marshall_olkin() {
        return Err(Error::NotNested(format!(
            "{} has no restricted family",
            full.family
        )));
    }
    let restricted = fit_mle(data, &full.restricted(), None, opts)?;
    let starts = vec![
        seed_from_restricted(&restricted, full)?,
        default_init(data, full)?,
    ];
    let full_fit = fit_from_starts(data, full, &starts, opts)?;
    Ok((restricted, full_fit))
}

fn seed_from_restricted(base: &FitResult, full: &ModelSpec) -> Result<ParamVector> {
    ParamVector::from_natural(*full, base.theta_hat.a(), base.theta_hat.b(), Some(1.0))
}

fn assemble(
    data: &SurvivalDataset,
    theta: ParamVector,
    run: &BfgsResult,
    opts: &FitOptions,
) -> Result<FitResult> {
    let spec = *theta.spec();
    let eval = evaluate_internal(&spec, theta.internal(), data);
    let gradient_inf_norm = run.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut warnings = Vec::new();
    if eval.clamped_rows > 0 {
        warnings.push(format!(
            "alpha was clamped away from zero in {} rows",
            eval.clamped_rows
        ));
    }
    if !run.converged {
        warnings.push(format!(
            "optimizer did not converge ({:?}, gradient norm {gradient_inf_norm:.3e})",
            run.termination
        ));
    }

    let mut covariance_internal = None;
    let mut pseudo_inverse = false;
    if run.converged {
        match hessian_loglik(&theta, data) {
            Ok(h) => {
                let (cov, pseudo) = invert_information(&(-h));
                if pseudo {
                    warnings.push(
                        "observed information is singular or indefinite; covariance is a pseudo-inverse"
                            .into(),
                    );
                }
                pseudo_inverse = pseudo;
                covariance_internal = Some(cov);
            }
            Err(e) => warnings.push(format!("Hessian unavailable: {e}")),
        }
    }

    let covariance = covariance_internal
        .as_ref()
        .map(|c| natural_covariance(&theta, c));
    let std_errors = covariance
        .as_ref()
        .map(|c| (0..c.nrows()).map(|j| c[(j, j)].max(0.0).sqrt()).collect::<Vec<_>>());
    let natural = theta.natural();
    let ci = match &std_errors {
        Some(se) => Some(wald_intervals(&natural, se, opts.level)?),
        None => None,
    };
    let cure_estimates = pattern_cures(data, &theta)?;
    for w in &warnings {
        warn!("{} fit: {w}", spec.family);
    }

    Ok(FitResult {
        spec,
        theta_hat: theta,
        covariance,
        covariance_internal,
        pseudo_inverse,
        std_errors,
        ci,
        level: opts.level,
        loglik_max: eval.loglik,
        converged: run.converged,
        iterations: run.iterations,
        gradient_inf_norm,
        n_obs: data.len(),
        clamped_rows: eval.clamped_rows,
        cure_estimates,
        warnings,
    })
}

/// Inverse of a symmetric information matrix; falls back to the
/// pseudo-inverse over its positive eigenvalues when it is not positive
/// definite. The flag reports the fallback.
pub fn invert_information(info: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (info + info.transpose()) * 0.5;
    if let Some(chol) = sym.clone().cholesky() {
        let inv = chol.inverse();
        if inv.iter().all(|v| v.is_finite()) {
            return ((&inv + inv.transpose()) * 0.5, false);
        }
    }
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = top * 1e-12 * eig.eigenvalues.len() as f64;
    let d = eig.eigenvalues.len();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let ev = eig.eigenvalues[k];
        if ev > tol {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / ev;
        }
    }
    (out, true)
}

/// Delta method for λ = exp(log λ).
fn natural_covariance(theta: &ParamVector, cov: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = cov.clone();
    if let (Some(k), Some(lambda)) = (theta.spec().lambda_index(), theta.lambda()) {
        for j in 0..out.nrows() {
            out[(k, j)] *= lambda;
            out[(j, k)] *= lambda;
        }
    }
    out
}

/// Cure fractions at `theta` for each distinct covariate pattern, or none when
/// there are more than [`MAX_CURE_PATTERNS`].
pub fn pattern_cures(data: &SurvivalDataset, theta: &ParamVector) -> Result<Vec<PatternCure>> {
    let x = data.design();
    let Some(patterns) = x.unique_patterns(MAX_CURE_PATTERNS) else {
        return Ok(Vec::new());
    };
    let coef = theta.coefficients();
    let preds = linear_predictors(&coef, x)?;
    patterns
        .into_iter()
        .map(|(covariates, rows)| {
            let law = law_for(theta.spec().family, &preds[rows[0]], coef.lambda)?;
            Ok(PatternCure {
                covariates,
                n_rows: rows.len(),
                cure: law.cure_fraction(),
            })
        })
        .collect()
}

fn wald_intervals(est: &[f64], se: &[f64], level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    let z = std_normal_quantile(0.5 + 0.5 * level)?;
    Ok(est
        .iter()
        .zip(se)
        .map(|(&e, &s)| (e - z * s, e + z * s))
        .collect())
}

/// θ̂ ± z·SE on the natural scale.
pub fn wald_ci(fit: &FitResult, level: f64) -> Result<Vec<(f64, f64)>> {
    let se = fit.std_errors.as_ref().ok_or(Error::MissingCovariance)?;
    wald_intervals(&fit.estimates(), se, level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub warning: Option<String>,
}

/// S_LR = −2(ℓ̃ − ℓ̂) against χ²(df), df the difference in parameter count.
pub fn lr_test(restricted: &FitResult, full: &FitResult) -> Result<LrTest> {
    let (r, f) = (&restricted.spec, &full.spec);
    if r.n_alpha != f.n_alpha || r.n_beta != f.n_beta {
        return Err(Error::NotNested("coefficient layouts differ".into()));
    }
    if f.family.restricted() != r.family {
        return Err(Error::NotNested(format!(
            "{} is not a restriction of {}",
            r.family, f.family
        )));
    }
    if restricted.n_obs != full.n_obs {
        return Err(Error::NotNested("fits use different data".into()));
    }
    let df = f.dim() - r.dim();
    let raw = -2.0 * (restricted.loglik_max - full.loglik_max);
    let mut warning = None;
    let statistic = if raw < 0.0 {
        let msg = format!("negative LR statistic {raw:.3e} clamped to 0");
        warn!("{msg}");
        warning = Some(msg);
        0.0
    } else {
        raw
    };
    let p_value = if df == 0 {
        1.0
    } else {
        chi2_sf(statistic, df as f64)?
    };
    Ok(LrTest {
        statistic,
        df,
        p_value,
        warning,
    })
}
