//! Model comparison.
//!
//! Frequentist: AICc, BIC, HQIC and CAIC from a maximized log-likelihood.
//! Bayesian: CPO/LPML, DIC and WAIC from an S × n matrix of per-observation
//! log contributions δᵢ log f(tᵢ|θₛ) + (1 − δᵢ) log S(tᵢ|θₛ). Censored
//! observations therefore enter through their survival probability.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{mean_sd, PosteriorSample, MIN_DRAWS};
use crate::error::{Error, Result};
use crate::likelihood::{log_contributions_into, ParamVector, SurvivalDataset};
use crate::mle::FitResult;
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoCriteria {
    pub aicc: f64,
    pub bic: f64,
    pub hqic: f64,
    pub caic: f64,
}

/// AICc, BIC, HQIC and CAIC for a model with `k` parameters fitted to `n`
/// observations. Lower is better.
pub fn info_criteria(loglik: f64, k: usize, n: usize) -> Result<InfoCriteria> {
    if n <= k + 1 {
        return Err(Error::Domain(format!(
            "AICc needs n > k + 1 (n = {n}, k = {k})"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let m2l = -2.0 * loglik;
    Ok(InfoCriteria {
        aicc: m2l + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0),
        bic: m2l + kf * nf.ln(),
        hqic: m2l + 2.0 * kf * nf.ln().ln(),
        caic: m2l + kf * (nf.ln() + 1.0),
    })
}

pub fn fit_criteria(fit: &FitResult) -> Result<InfoCriteria> {
    info_criteria(fit.loglik_max, fit.n_params(), fit.n_obs)
}

/// S × n matrix of per-observation log contributions at each draw.
pub fn log_contribution_matrix(
    sample: &PosteriorSample,
    data: &SurvivalDataset,
) -> Result<DMatrix<f64>> {
    sample.spec.check_design(data.design())?;
    let s = sample.n_draws();
    let n = data.len();
    let rows: Vec<Vec<f64>> = (0..s)
        .into_par_iter()
        .map(|k| {
            let theta = ParamVector::from_natural_slice(sample.spec, &sample.draw(k))
                .expect("draws were validated on construction");
            let mut out = vec![0.0; n];
            log_contributions_into(&sample.spec, theta.internal(), data, &mut out);
            out
        })
        .collect();
    Ok(DMatrix::from_fn(s, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpoResult {
    pub log_cpo: Vec<f64>,
    pub cpo: Vec<f64>,
    pub lpml: f64,
    /// Observations whose CPO underflowed to zero or is not finite.
    pub flagged: Vec<usize>,
}

/// CPOᵢ = [S⁻¹ Σₛ 1/cᵢₛ]⁻¹, evaluated in log space; LPML = Σᵢ log CPOᵢ.
pub fn cpo_lpml(log_contrib: &DMatrix<f64>) -> CpoResult {
    let s = log_contrib.nrows() as f64;
    let mut log_cpo = Vec::with_capacity(log_contrib.ncols());
    let mut flagged = Vec::new();
    let mut neg = vec![0.0; log_contrib.nrows()];
    for (i, col) in log_contrib.column_iter().enumerate() {
        for (slot, v) in neg.iter_mut().zip(col.iter()) {
            *slot = -v;
        }
        let lc = s.ln() - log_sum_exp(&neg);
        let cpo = lc.exp();
        if !lc.is_finite() || cpo == 0.0 || !cpo.is_finite() {
            flagged.push(i);
        }
        log_cpo.push(lc);
    }
    let lpml = log_cpo.iter().sum();
    CpoResult {
        cpo: log_cpo.iter().map(|v| v.exp()).collect(),
        log_cpo,
        lpml,
        flagged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DicResult {
    pub dic: f64,
    /// Mean deviance over the retained draws.
    pub mean_deviance: f64,
    /// Sample variance of the deviance (denominator S − 1).
    pub deviance_variance: f64,
    /// Draws with non-finite deviance, left out of both moments.
    pub excluded: usize,
}

/// DIC = D̄ + ½·Var(D) with D(θ) = −2 Σᵢ log cᵢ(θ).
pub fn dic(log_contrib: &DMatrix<f64>) -> DicResult {
    let devs: Vec<f64> = log_contrib
        .row_iter()
        .map(|r| -2.0 * r.iter().sum::<f64>())
        .collect();
    dic_from_deviances(&devs)
}

/// DIC from per-draw deviances.
pub fn dic_from_deviances(deviances: &[f64]) -> DicResult {
    let finite: Vec<f64> = deviances.iter().copied().filter(|d| d.is_finite()).collect();
    let excluded = deviances.len() - finite.len();
    let (mean, sd) = mean_sd(&finite);
    let var = sd * sd;
    DicResult {
        dic: mean + 0.5 * var,
        mean_deviance: mean,
        deviance_variance: var,
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaicResult {
    /// Σᵢ log(S⁻¹ Σₛ cᵢₛ).
    pub lpd: f64,
    /// 2 Σᵢ [log(S⁻¹ Σₛ cᵢₛ) − S⁻¹ Σₛ log cᵢₛ].
    pub pd: f64,
    /// lpd − pd; larger is better.
    pub waic: f64,
    /// −2·waic; smaller is better.
    pub minus2_waic: f64,
    /// Observations with a non-finite term, left out of both sums.
    pub excluded: usize,
}

pub fn waic(log_contrib: &DMatrix<f64>) -> WaicResult {
    let s = log_contrib.nrows() as f64;
    let mut lpd = 0.0;
    let mut pd = 0.0;
    let mut excluded = 0;
    let mut buf = Vec::with_capacity(log_contrib.nrows());
    for col in log_contrib.column_iter() {
        buf.clear();
        buf.extend(col.iter().copied());
        let l = log_sum_exp(&buf) - s.ln();
        let mean_log = buf.iter().sum::<f64>() / s;
        if !(l.is_finite() && mean_log.is_finite()) {
            excluded += 1;
            continue;
        }
        lpd += l;
        pd += 2.0 * (l - mean_log);
    }
    let waic = lpd - pd;
    WaicResult {
        lpd,
        pd,
        waic,
        minus2_waic: -2.0 * waic,
        excluded,
    }
}

/// LPML, DIC and WAIC of a posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesCriteria {
    pub lpml: f64,
    pub minus2_lpml: f64,
    pub dic: DicResult,
    pub waic: WaicResult,
    pub cpo_flagged: Vec<usize>,
}

pub fn bayes_criteria(sample: &PosteriorSample, data: &SurvivalDataset) -> Result<BayesCriteria> {
    if sample.n_draws() < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            got: sample.n_draws(),
            need: MIN_DRAWS,
        });
    }
    let m = log_contribution_matrix(sample, data)?;
    let cpo = cpo_lpml(&m);
    Ok(BayesCriteria {
        lpml: cpo.lpml,
        minus2_lpml: -2.0 * cpo.lpml,
        dic: dic(&m),
        waic: waic(&m),
        cpo_flagged: cpo.flagged,
    })
}

/// Frequentist entries are present iff a fit was supplied, Bayesian entries
/// iff a posterior sample was.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub aicc: Option<f64>,
    pub bic: Option<f64>,
    pub hqic: Option<f64>,
    pub caic: Option<f64>,
    pub lpml: Option<f64>,
    pub minus2_lpml: Option<f64>,
    pub dic: Option<f64>,
    pub waic: Option<f64>,
    pub minus2_waic: Option<f64>,
}

impl CriteriaReport {
    pub fn new(freq: Option<&InfoCriteria>, bayes: Option<&BayesCriteria>) -> Self {
        Self {
            aicc: freq.map(|c| c.aicc),
            bic: freq.map(|c| c.bic),
            hqic: freq.map(|c| c.hqic),
            caic: freq.map(|c| c.caic),
            lpml: bayes.map(|b| b.lpml),
            minus2_lpml: bayes.map(|b| b.minus2_lpml),
            dic: bayes.map(|b| b.dic.dic),
            waic: bayes.map(|b| b.waic.waic),
            minus2_waic: bayes.map(|b| b.waic.minus2_waic),
        }
    }
}
