//! End-to-end analysis of one dataset: fits, criteria, residuals, influence
//! and Kaplan-Meier overlays, written as `report.json`, `residuals.csv`,
//! `influence.csv`, `km_overlay.csv` and `summary.txt`.
//!
//! Row numbers in the outputs are 1-based data rows (header excluded).

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::bayes::{
    posterior_cures, posterior_summary, sample_posterior, PosteriorCure, PriorSpec, SamplerConfig,
    SamplerKind,
};
use crate::diagnostics::{case_deletion_influence, residuals, InfluenceOptions, ResidualReport};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_dataset, ColumnSpec};
use crate::km::KaplanMeier;
use crate::likelihood::{log_survival, ModelSpec, ParamVector, SurvivalDataset};
use crate::mle::{fit_mle, fit_nested, lr_test, FitOptions, FitResult, LrTest, PatternCure};
use crate::regression::Family;
use crate::selection::{bayes_criteria, fit_criteria, CriteriaReport};

/// Which inference engines a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    #[serde(alias = "frequentist")]
    Freq,
    #[serde(alias = "bayesian")]
    Bayes,
    Both,
}

impl EngineChoice {
    pub fn frequentist(self) -> bool {
        matches!(self, EngineChoice::Freq | EngineChoice::Both)
    }

    pub fn bayesian(self) -> bool {
        matches!(self, EngineChoice::Bayes | EngineChoice::Both)
    }
}

impl std::str::FromStr for EngineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "freq" | "frequentist" => Ok(Self::Freq),
            "bayes" | "bayesian" => Ok(Self::Bayes),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!(
                "unknown engine '{other}' (expected freq, bayes or both)"
            ))),
        }
    }
}

/// Hyperparameters shared by every coefficient: N(mean, var) on aₖ and bⱼ,
/// Gamma(shape, rate) on λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub normal_mean: f64,
    pub normal_var: f64,
    pub lambda_shape: f64,
    pub lambda_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            normal_mean: 0.0,
            normal_var: 100.0,
            lambda_shape: 0.01,
            lambda_rate: 0.01,
        }
    }
}

impl PriorConfig {
    pub fn to_spec(&self, spec: &ModelSpec) -> PriorSpec {
        PriorSpec::uniform_normal(
            spec,
            self.normal_mean,
            self.normal_var,
            self.lambda_shape,
            self.lambda_rate,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    pub family: Family,
    #[serde(flatten)]
    pub columns: ColumnSpec,
    pub engine: EngineChoice,
    pub prior: PriorConfig,
    pub iters: usize,
    pub burnin: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub level: f64,
    pub influence: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sampler = SamplerConfig::default();
        Self {
            input: PathBuf::new(),
            family: Family::MoGompertz,
            columns: ColumnSpec::default(),
            engine: EngineChoice::Freq,
            prior: PriorConfig::default(),
            iters: sampler.n_iter,
            burnin: sampler.burn_in,
            sampler: sampler.kind,
            seed: sampler.seed,
            level: 0.95,
            influence: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input file given".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must be in (0, 1), got {}", self.level)));
        }
        if self.engine.bayesian() && self.iters <= self.burnin {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iters, self.burnin
            )));
        }
        if self.influence && !self.engine.frequentist() {
            return Err(Error::Config(
                "influence diagnostics need the frequentist engine".into(),
            ));
        }
        Ok(())
    }

    fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.iters,
            burn_in: self.burnin,
            seed: self.seed,
            kind: self.sampler,
            thin: 1,
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            level: self.level,
            seed: self.seed,
            ..FitOptions::default()
        }
    }
}

/// Overall outcome: `Ok` when every requested fit converged cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedFit {
    pub family: Family,
    pub loglik: f64,
    pub converged: bool,
    pub parameters: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequentistReport {
    pub parameters: Vec<Estimate>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_inf_norm: f64,
    pub pseudo_inverse: bool,
    pub clamped_rows: usize,
    pub cure: Vec<PatternCure>,
    pub restricted: Option<RestrictedFit>,
    pub lr_test: Option<LrTest>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorParam {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: f64,
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesianReport {
    pub parameters: Vec<PosteriorParam>,
    pub n_draws: usize,
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub passes_gate: bool,
    pub pd_waic: f64,
    pub cpo_flagged: Vec<usize>,
    pub cure: Vec<PosteriorCure>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceSummary {
    /// 1-based rows.
    pub flagged: Vec<usize>,
    pub failed: Vec<usize>,
    pub gd_threshold: f64,
    pub ld_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub input: String,
    pub n: usize,
    pub n_events: usize,
    pub censoring_fraction: f64,
    pub alpha_covariates: Vec<String>,
    pub beta_covariates: Vec<String>,
}

/// The machine-readable report. Analyses that were not run are `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub status: RunStatus,
    pub family: Family,
    pub engine: EngineChoice,
    pub seed: u64,
    pub level: f64,
    pub data: DataSummary,
    pub frequentist: Option<FrequentistReport>,
    pub bayesian: Option<BayesianReport>,
    pub criteria: CriteriaReport,
    pub influence: Option<InfluenceSummary>,
    pub warnings: Vec<String>,
}

/// One series of a Kaplan-Meier overlay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlaySeries {
    pub stratum: String,
    /// "km" or "model".
    pub kind: &'static str,
    pub points: Vec<(f64, f64)>,
}

/// Kaplan-Meier step functions and model curves for each stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmOverlay {
    pub series: Vec<OverlaySeries>,
}

/// Largest number of covariate patterns drawn as separate strata.
pub const MAX_OVERLAY_STRATA: usize = 8;
const GRID_POINTS: usize = 201;

/// Kaplan-Meier curves per covariate pattern (one pooled stratum when the
/// design has more than [`MAX_OVERLAY_STRATA`] patterns), each with the
/// model survival averaged over the stratum's rows on a shared time grid.
pub fn km_overlay(data: &SurvivalDataset, theta: Option<&ParamVector>) -> Result<KmOverlay> {
    let x = data.design();
    let strata: Vec<(String, Vec<usize>)> = match x.unique_patterns(MAX_OVERLAY_STRATA) {
        Some(p) if p.len() > 1 => {
            let names: Vec<String> = x.x1_names()[1..]
                .iter()
                .chain(&x.x2_names()[1..])
                .cloned()
                .collect();
            p.into_iter()
                .map(|(cov, rows)| {
                    let label = names
                        .iter()
                        .zip(&cov)
                        .map(|(n, v)| format!("{n}={v}"))
                        .collect::<Vec<_>>()
                        .join(";");
                    (label, rows)
                })
                .collect()
        }
        _ => vec![("all".to_string(), (0..data.len()).collect())],
    };
    let t_max = data.times().iter().copied().fold(0.0, f64::max);
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| t_max * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let mut series = Vec::new();
    for (label, rows) in strata {
        let sub = data.select_rows(&rows);
        let km = KaplanMeier::fit(sub.times(), sub.events())?;
        let mut points = vec![(0.0, 1.0)];
        points.extend(km.times.iter().copied().zip(km.surv.iter().copied()));
        series.push(OverlaySeries {
            stratum: label.clone(),
            kind: "km",
            points,
        });
        if let Some(theta) = theta {
            let m = sub.len() as f64;
            let mut points = Vec::with_capacity(grid.len());
            for &t in &grid {
                let s = if t == 0.0 {
                    1.0
                } else {
                    let at_t = SurvivalDataset::new(vec![t; sub.len()], vec![false; sub.len()], sub.design().clone())?;
                    log_survival(theta, &at_t)?.iter().map(|l| l.exp()).sum::<f64>() / m
                };
                points.push((t, s));
            }
            series.push(OverlaySeries {
                stratum: label,
                kind: "model",
                points,
            });
        }
    }
    Ok(KmOverlay { series })
}

pub fn write_overlay_csv<W: Write>(overlay: &KmOverlay, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["stratum", "series", "time", "survival"])?;
    for s in &overlay.series {
        for &(t, v) in &s.points {
            w.write_record([s.stratum.as_str(), s.kind, &fmt_f64(t), &fmt_f64(v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything produced by [`run_fit`], before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: FitReport,
    pub residuals: Vec<(&'static str, ResidualReport)>,
    pub influence: Option<crate::diagnostics::InfluenceReport>,
    pub overlay: KmOverlay,
    pub data: SurvivalDataset,
    pub fit: Option<FitResult>,
}

fn estimates(fit: &FitResult) -> Vec<Estimate> {
    fit.names()
        .into_iter()
        .zip(fit.estimates())
        .enumerate()
        .map(|(j, (name, estimate))| Estimate {
            name,
            estimate,
            se: fit.std_errors.as_ref().map(|s| s[j]),
            lower: fit.ci.as_ref().map(|c| c[j].0),
            upper: fit.ci.as_ref().map(|c| c[j].1),
        })
        .collect()
}

/// Runs the configured analysis without touching the file system beyond
/// reading the input.
pub fn analyze(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let data = load_dataset(&cfg.input, &cfg.columns)?;
    info!(
        "loaded {}: n = {}, censoring {:.4}%",
        cfg.input.display(),
        data.len(),
        100.0 * data.censoring_fraction()
    );
    let spec = ModelSpec::for_design(cfg.family, data.design());
    let mut warnings = Vec::new();
    let mut status = RunStatus::Ok;

    let mut fit = None;
    let mut freq = None;
    let mut freq_criteria = None;
    if cfg.engine.frequentist() {
        let opts = cfg.fit_options();
        let (full, restricted) = if cfg.family.is_marshall_olkin() {
            let (r, f) = fit_nested(&data, &spec, &opts)?;
            (f, Some(r))
        } else {
            (fit_mle(&data, &spec, None, &opts)?, None)
        };
        if !full.converged || full.pseudo_inverse {
            status = RunStatus::Warning;
        }
        let lr = match &restricted {
            Some(r) => Some(lr_test(r, &full)?),
            None => None,
        };
        freq_criteria = Some(fit_criteria(&full)?);
        warnings.extend(full.warnings.iter().map(|w| format!("frequentist: {w}")));
        freq = Some(FrequentistReport {
            parameters: estimates(&full),
            loglik: full.loglik_max,
            converged: full.converged,
            iterations: full.iterations,
            gradient_inf_norm: full.gradient_inf_norm,
            pseudo_inverse: full.pseudo_inverse,
            clamped_rows: full.clamped_rows,
            cure: full.cure_estimates.clone(),
            restricted: restricted.as_ref().map(|r| RestrictedFit {
                family: r.spec.family,
                loglik: r.loglik_max,
                converged: r.converged,
                parameters: estimates(r),
            }),
            lr_test: lr,
            warnings: full.warnings.clone(),
        });
        fit = Some(full);
    }

    let mut bayes = None;
    let mut bayes_crit = None;
    let mut posterior_mean = None;
    if cfg.engine.bayesian() {
        let prior = cfg.prior.to_spec(&spec);
        let sample = sample_posterior(&data, &spec, &prior, &cfg.sampler_config())?;
        let summary = posterior_summary(&sample, cfg.level)?;
        let crit = bayes_criteria(&sample, &data)?;
        if !sample.passes_gate() {
            status = RunStatus::Warning;
        }
        warnings.extend(sample.warnings.iter().map(|w| format!("bayesian: {w}")));
        bayes = Some(BayesianReport {
            parameters: summary
                .into_iter()
                .enumerate()
                .map(|(j, s)| PosteriorParam {
                    name: s.name,
                    mean: s.mean,
                    sd: s.sd,
                    lower: s.lower,
                    upper: s.upper,
                    ess: sample.ess[j],
                    rhat: sample.rhat[j],
                })
                .collect(),
            n_draws: sample.n_draws(),
            burn_in: sample.burn_in,
            acceptance_rate: sample.acceptance_rate,
            passes_gate: sample.passes_gate(),
            pd_waic: crit.waic.pd,
            cpo_flagged: crit.cpo_flagged.iter().map(|i| i + 1).collect(),
            cure: posterior_cures(&sample, &data, cfg.level)?,
            warnings: sample.warnings.clone(),
        });
        posterior_mean = Some(sample.mean_params()?);
        bayes_crit = Some(crit);
    }

    let mut resid = Vec::new();
    if let Some(f) = &fit {
        resid.push(("frequentist", residuals(&f.theta_hat, &data)?));
    }
    if let Some(m) = &posterior_mean {
        resid.push(("bayesian", residuals(m, &data)?));
    }

    let influence = match (&fit, cfg.influence) {
        (Some(f), true) => {
            let opts = InfluenceOptions {
                seed: cfg.seed,
                ..InfluenceOptions::default()
            };
            let r = case_deletion_influence(f, &data, &opts)?;
            if !r.failed.is_empty() {
                warnings.push(format!("{} deleted-case refits failed", r.failed.len()));
            }
            Some(r)
        }
        _ => None,
    };

    let overlay_theta = fit.as_ref().map(|f| &f.theta_hat).or(posterior_mean.as_ref());
    let overlay = km_overlay(&data, overlay_theta)?;

    for w in &warnings {
        warn!("{w}");
    }
    let report = FitReport {
        status,
        family: cfg.family,
        engine: cfg.engine,
        seed: cfg.seed,
        level: cfg.level,
        data: DataSummary {
            input: cfg.input.display().to_string(),
            n: data.len(),
            n_events: data.n_events(),
            censoring_fraction: data.censoring_fraction(),
            alpha_covariates: cfg.columns.alpha_covariates.clone(),
            beta_covariates: cfg.columns.beta_covariates.clone(),
        },
        frequentist: freq,
        bayesian: bayes,
        criteria: CriteriaReport::new(freq_criteria.as_ref(), bayes_crit.as_ref()),
        influence: influence.as_ref().map(|r| InfluenceSummary {
            flagged: r.flagged.iter().map(|i| i + 1).collect(),
            failed: r.failed.iter().map(|i| i + 1).collect(),
            gd_threshold: r.gd_threshold,
            ld_threshold: r.ld_threshold,
        }),
        warnings,
    };
    Ok(RunOutput {
        report,
        residuals: resid,
        influence,
        overlay,
        data,
        fit,
    })
}

/// Analyzes and writes all artifacts into `cfg.out`.
pub fn run_fit(cfg: &RunConfig) -> Result<RunOutput> {
    let out = analyze(cfg)?;
    write_artifacts(&out, &cfg.out)?;
    Ok(out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = create(dir, "report.json")?;
    serde_json::to_writer_pretty(&mut f, &out.report)?;
    writeln!(f)?;
    f.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, "residuals.csv")?);
    w.write_record(["row", "time", "event", "engine", "martingale", "deviance"])?;
    for (engine, r) in &out.residuals {
        for i in 0..out.data.len() {
            w.write_record([
                (i + 1).to_string(),
                fmt_f64(out.data.times()[i]),
                u8::from(out.data.events()[i]).to_string(),
                engine.to_string(),
                fmt_f64(r.martingale[i]),
                fmt_f64(r.deviance[i]),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, "influence.csv")?);
    w.write_record(["row", "gd", "ld", "flagged"])?;
    if let Some(inf) = &out.influence {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt_f64);
        for i in 0..inf.gd.len() {
            w.write_record([
                (i + 1).to_string(),
                opt(inf.gd[i]),
                opt(inf.ld[i]),
                u8::from(inf.flagged.binary_search(&i).is_ok()).to_string(),
            ])?;
        }
    }
    w.flush()?;

    write_overlay_csv(&out.overlay, create(dir, "km_overlay.csv")?)?;

    let mut f = create(dir, "summary.txt")?;
    f.write_all(summary_text(&out.report).as_bytes())?;
    f.flush()?;
    Ok(())
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

/// Plain-text rendering of a report.
pub fn summary_text(r: &FitReport) -> String {
    let mut s = String::new();
    let d = &r.data;
    let _ = writeln!(s, "{} regression  ({})", r.family.display_name(), d.input);
    let _ = writeln!(
        s,
        "n = {}, events = {}, censored = {:.4}%",
        d.n,
        d.n_events,
        100.0 * d.censoring_fraction
    );
    let _ = writeln!(s, "status: {:?}\n", r.status);
    if let Some(f) = &r.frequentist {
        let _ = writeln!(s, "Maximum likelihood (log-likelihood {:.4})", f.loglik);
        let _ = writeln!(s, "{:<16}{:>12}{:>12}{:>12}{:>12}", "parameter", "estimate", "se", "lower", "upper");
        for p in &f.parameters {
            let _ = writeln!(
                s,
                "{:<16}{:>12.4}{:>12}{:>12}{:>12}",
                p.name,
                p.estimate,
                opt(p.se, 4),
                opt(p.lower, 4),
                opt(p.upper, 4)
            );
        }
        for c in &f.cure {
            let _ = writeln!(s, "cure fraction at {:?}: p = {:.4} (p0 = {:.4})", c.covariates, c.cure.p, c.cure.p0);
        }
        if let (Some(rf), Some(lr)) = (&f.restricted, &f.lr_test) {
            let _ = writeln!(
                s,
                "LR test vs {}: statistic {:.4}, df {}, p-value {:.4e} (restricted log-likelihood {:.4})",
                rf.family.display_name(),
                lr.statistic,
                lr.df,
                lr.p_value,
                rf.loglik
            );
        }
        let _ = writeln!(s);
    }
    if let Some(b) = &r.bayesian {
        let _ = writeln!(
            s,
            "Posterior ({} draws after {} burn-in, acceptance {:.3})",
            b.n_draws, b.burn_in, b.acceptance_rate
        );
        let _ = writeln!(
            s,
            "{:<16}{:>12}{:>12}{:>12}{:>12}{:>10}{:>8}",
            "parameter", "mean", "sd", "lower", "upper", "ess", "rhat"
        );
        for p in &b.parameters {
            let _ = writeln!(
                s,
                "{:<16}{:>12.4}{:>12.4}{:>12.4}{:>12.4}{:>10.0}{:>8.3}",
                p.name, p.mean, p.sd, p.lower, p.upper, p.ess, p.rhat
            );
        }
        for c in &b.cure {
            let _ = writeln!(s, "cure fraction at {:?}: p = {:.4} (sd {:.4}), at posterior mean {:.4}", c.covariates, c.mean, c.sd, c.plug_in);
        }
        let _ = writeln!(s);
    }
    let c = &r.criteria;
    let _ = writeln!(s, "Criteria");
    for (name, v) in [
        ("AICc", c.aicc),
        ("BIC", c.bic),
        ("HQIC", c.hqic),
        ("CAIC", c.caic),
        ("-2 LPML", c.minus2_lpml),
        ("DIC", c.dic),
        ("-2 WAIC", c.minus2_waic),
    ] {
        let _ = writeln!(s, "  {name:<8}{}", opt(v, 2));
    }
    if let Some(i) = &r.influence {
        let _ = writeln!(s, "\nInfluential rows: {:?}", i.flagged);
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
