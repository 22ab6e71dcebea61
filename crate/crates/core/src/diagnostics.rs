//! Case-deletion influence (generalized Cook distance, likelihood
//! displacement), relative changes after dropping cases, and martingale and
//! deviance residuals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::percentile_sorted;
use crate::error::{Error, Result};
use crate::likelihood::{log_survival, loglik_internal, ParamVector, SurvivalDataset};
use crate::mle::{optimize, FitOptions, FitResult, RestartPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceOptions {
    /// GDᵢ above `gd_factor`·mean(GD)·dim θ is flagged.
    pub gd_factor: f64,
    /// LDᵢ above this percentile of the LD vector is flagged.
    pub ld_quantile: f64,
    /// Jittered restarts allowed for a deleted-case refit that fails.
    pub restart_budget: usize,
    pub seed: u64,
}

impl Default for InfluenceOptions {
    fn default() -> Self {
        Self {
            gd_factor: 2.0,
            ld_quantile: 0.99,
            restart_budget: 2,
            seed: 0x1f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceReport {
    /// Generalized Cook distance per case; `None` where the refit failed.
    pub gd: Vec<Option<f64>>,
    /// Likelihood displacement per case, on the full data.
    pub ld: Vec<Option<f64>>,
    /// Row indices (0-based) over either threshold, increasing.
    pub flagged: Vec<usize>,
    /// Row indices whose refit did not converge.
    pub failed: Vec<usize>,
    pub gd_threshold: f64,
    pub ld_threshold: f64,
}

/// Refits without each case in turn, starting at θ̂.
///
/// GDᵢ = (θ̂ − θ̂₍ᵢ₎)ᵀ(−H)(θ̂ − θ̂₍ᵢ₎) with H the full-data Hessian on the
/// internal scale, and LDᵢ = 2{ℓ(θ̂) − ℓ(θ̂₍ᵢ₎)} on the full data.
pub fn case_deletion_influence(
    fit: &FitResult,
    data: &SurvivalDataset,
    opts: &InfluenceOptions,
) -> Result<InfluenceReport> {
    if !fit.converged {
        return Err(Error::NonConvergence(
            "influence needs a converged fit".into(),
        ));
    }
    let cov = fit
        .covariance_internal
        .as_ref()
        .ok_or(Error::MissingCovariance)?;
    let (info, _) = crate::mle::invert_information(cov);
    let spec = fit.spec;
    if data.len() != fit.n_obs {
        return Err(Error::InvalidData(
            "data differ from those of the fit".into(),
        ));
    }
    let theta = fit.theta_hat.internal().to_vec();
    let l_full = loglik_internal(&spec, &theta, data);

    let results: Vec<Option<(f64, f64)>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let reduced = data.without_row(i);
            let fit_opts = FitOptions {
                restarts: opts.restart_budget,
                restart_policy: RestartPolicy::OnFailure,
                seed_with_base: false,
                seed: opts.seed.wrapping_add(i as u64),
                jitter: 0.1,
                ..FitOptions::default()
            };
            let opt = optimize(&reduced, &spec, &[fit.theta_hat.clone()], &fit_opts).ok()?;
            if !opt.converged {
                return None;
            }
            let d = DVector::from_iterator(
                theta.len(),
                theta.iter().zip(opt.theta.internal()).map(|(a, b)| a - b),
            );
            let gd = (d.transpose() * &info * &d)[(0, 0)].max(0.0);
            let li = loglik_internal(&spec, opt.theta.internal(), data);
            let ld = (2.0 * (l_full - li)).max(0.0);
            Some((gd, ld))
        })
        .collect();

    let gd: Vec<Option<f64>> = results.iter().map(|r| r.map(|v| v.0)).collect();
    let ld: Vec<Option<f64>> = results.iter().map(|r| r.map(|v| v.1)).collect();
    let failed: Vec<usize> = (0..results.len()).filter(|&i| results[i].is_none()).collect();
    let (flagged, gd_threshold, ld_threshold) =
        flag_cases(&gd, &ld, spec.dim(), opts.gd_factor, opts.ld_quantile);
    Ok(InfluenceReport {
        gd,
        ld,
        flagged,
        failed,
        gd_threshold,
        ld_threshold,
    })
}

/// Union of GD and LD exceedances; returns the flagged rows and both cutoffs.
pub fn flag_cases(
    gd: &[Option<f64>],
    ld: &[Option<f64>],
    dim: usize,
    gd_factor: f64,
    ld_quantile: f64,
) -> (Vec<usize>, f64, f64) {
    let gd_ok: Vec<f64> = gd.iter().flatten().copied().collect();
    let mut ld_ok: Vec<f64> = ld.iter().flatten().copied().collect();
    if gd_ok.is_empty() {
        return (Vec::new(), f64::NAN, f64::NAN);
    }
    let gd_mean = gd_ok.iter().sum::<f64>() / gd_ok.len() as f64;
    let gd_threshold = gd_factor * gd_mean * dim as f64;
    ld_ok.sort_by(f64::total_cmp);
    let ld_threshold = percentile_sorted(&ld_ok, ld_quantile);
    let flagged = (0..gd.len())
        .filter(|&i| {
            gd[i].is_some_and(|g| g > gd_threshold) || ld[i].is_some_and(|l| l > ld_threshold)
        })
        .collect();
    (flagged, gd_threshold, ld_threshold)
}

/// Percentage changes of one parameter after dropping cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeChange {
    pub name: String,
    /// |(θ̂ − θ̂₍I₎)/θ̂|·100; `None` when θ̂ = 0.
    pub rc_theta: Option<f64>,
    /// The same for the standard error; `None` when it is unavailable or 0.
    pub rc_se: Option<f64>,
}

fn rc(full: f64, dropped: f64) -> Option<f64> {
    (full != 0.0 && full.is_finite() && dropped.is_finite())
        .then(|| ((full - dropped) / full).abs() * 100.0)
}

pub fn relative_change(full: &FitResult, dropped: &FitResult) -> Result<Vec<RelativeChange>> {
    if full.spec != dropped.spec {
        return Err(Error::Config("fits have different model specifications".into()));
    }
    if !dropped.converged {
        return Err(Error::NonConvergence("the dropped-case fit did not converge".into()));
    }
    let (ef, ed) = (full.estimates(), dropped.estimates());
    Ok(full
        .names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| RelativeChange {
            name,
            rc_theta: rc(ef[j], ed[j]),
            rc_se: match (&full.std_errors, &dropped.std_errors) {
                (Some(a), Some(b)) => rc(a[j], b[j]),
                _ => None,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub martingale: Vec<f64>,
    pub deviance: Vec<f64>,
}

/// r_Mᵢ = δᵢ + log S(tᵢ) and r_Dᵢ = sign(r_Mᵢ)·√(−2[r_Mᵢ + δᵢ log(δᵢ − r_Mᵢ)]).
///
/// An event with S(tᵢ) = 1 gives r_M = 1 and r_D = +∞, the limit of the
/// formula.
pub fn residuals_from_log_surv(log_surv: &[f64], events: &[bool]) -> Result<ResidualReport> {
    if log_surv.len() != events.len() {
        return Err(Error::Dimension {
            what: "event indicators",
            expected: log_surv.len(),
            got: events.len(),
        });
    }
    let mut martingale = Vec::with_capacity(events.len());
    let mut deviance = Vec::with_capacity(events.len());
    for (&ls, &ev) in log_surv.iter().zip(events) {
        let d = f64::from(u8::from(ev));
        let rm = d + ls;
        let inner = if ev {
            // δ − r_M = −log S.
            rm + (-ls).ln()
        } else {
            rm
        };
        let sign = if rm > 0.0 {
            1.0
        } else if rm < 0.0 {
            -1.0
        } else {
            0.0
        };
        martingale.push(rm);
        deviance.push(sign * (-2.0 * inner).max(0.0).sqrt());
    }
    Ok(ResidualReport {
        martingale,
        deviance,
    })
}

/// Residuals at a parameter point: θ̂ for a frequentist fit, the posterior
/// mean for a Bayesian one.
pub fn residuals(theta: &ParamVector, data: &SurvivalDataset) -> Result<ResidualReport> {
    residuals_from_log_surv(&log_survival(theta, data)?, data.events())
}

pub fn fit_residuals(fit: &FitResult, data: &SurvivalDataset) -> Result<ResidualReport> {
    residuals(&fit.theta_hat, data)
}

/// GD for a given estimate pair and covariance (any consistent scale).
pub fn generalized_cook_distance(
    theta: &[f64],
    theta_deleted: &[f64],
    covariance: &DMatrix<f64>,
) -> Result<f64> {
    if theta.len() != theta_deleted.len() || covariance.nrows() != theta.len() {
        return Err(Error::Dimension {
            what: "parameter vectors",
            expected: theta.len(),
            got: theta_deleted.len(),
        });
    }
    let d = DVector::from_iterator(theta.len(), theta.iter().zip(theta_deleted).map(|(a, b)| a - b));
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
    Ok(d.dot(&chol.solve(&d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_triples() {
        let r = residuals_from_log_surv(&[0.0, 0.0, -1.0, -1.0], &[true, false, true, false]).unwrap();
        assert_eq!(r.martingale, vec![1.0, 0.0, 0.0, -1.0]);
        assert_eq!(r.deviance[1], 0.0);
        assert_eq!(r.deviance[2], 0.0);
        assert_eq!(r.deviance[3], -(2.0f64.sqrt()));
        assert_eq!(r.deviance[0], f64::INFINITY);
    }

    #[test]
    fn rc_arithmetic() {
        assert_eq!(rc(2.0, 1.5), Some(25.0));
        assert_eq!(rc(0.0, 1.0), None);
        assert_eq!(rc(-0.5, -0.5), Some(0.0));
    }

    #[test]
    fn flags_union_of_both_rules() {
        let gd: Vec<Option<f64>> = vec![Some(0.1), Some(0.1), Some(5.0), Some(0.1), None];
        let ld: Vec<Option<f64>> = vec![Some(0.0), Some(3.0), Some(0.0), Some(0.0), None];
        let (f, _, _) = flag_cases(&gd, &ld, 1, 2.0, 0.7);
        assert_eq!(f, vec![1, 2]);
    }
}
