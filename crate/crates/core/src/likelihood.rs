//! Censored log-likelihood Σ δᵢ log f(tᵢ) + (1 − δᵢ) log S(tᵢ) for the four
//! regression families, with central-difference gradient and Hessian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{base_logpdf_raw, base_logsurv_raw, mo_log_denominator, BaseFamily};
use crate::error::{Error, Result};
use crate::regression::{clamp_alpha, DesignMatrices, Family, RegressionCoefficients};

/// Model family plus the coefficient counts of each link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl ModelSpec {
    pub fn new(family: Family, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_alpha == 0 || n_beta == 0 {
            return Err(Error::Config(
                "each link needs at least an intercept coefficient".into(),
            ));
        }
        Ok(Self {
            family,
            n_alpha,
            n_beta,
        })
    }

    pub fn for_design(family: Family, x: &DesignMatrices) -> Self {
        Self {
            family,
            n_alpha: x.n_alpha(),
            n_beta: x.n_beta(),
        }
    }

    /// Total number of free parameters.
    pub fn dim(&self) -> usize {
        self.n_alpha + self.n_beta + usize::from(self.family.is_marshall_olkin())
    }

    /// Index of log λ in the packed vector, if present.
    pub fn lambda_index(&self) -> Option<usize> {
        self.family
            .is_marshall_olkin()
            .then_some(self.n_alpha + self.n_beta)
    }

    /// The same layout without λ.
    pub fn restricted(&self) -> Self {
        Self {
            family: self.family.restricted(),
            ..*self
        }
    }

    /// Parameter labels: a0.., b0.., lambda.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_alpha).map(|j| format!("a{j}")).collect();
        names.extend((0..self.n_beta).map(|j| format!("b{j}")));
        if self.family.is_marshall_olkin() {
            names.push("lambda".into());
        }
        names
    }

    pub(crate) fn check_design(&self, x: &DesignMatrices) -> Result<()> {
        if x.n_alpha() != self.n_alpha {
            return Err(Error::Dimension {
                what: "alpha design columns",
                expected: self.n_alpha,
                got: x.n_alpha(),
            });
        }
        if x.n_beta() != self.n_beta {
            return Err(Error::Dimension {
                what: "beta design columns",
                expected: self.n_beta,
                got: x.n_beta(),
            });
        }
        Ok(())
    }
}

/// Packed parameters (a, b, log λ). λ is held on the log scale internally and
/// reported on its natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    spec: ModelSpec,
    values: Vec<f64>,
}

impl ParamVector {
    /// From the internal (optimizer) scale.
    pub fn from_internal(spec: ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: spec.dim(),
                got: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    /// From natural-scale (a, b, λ).
    pub fn from_natural(spec: ModelSpec, a: &[f64], b: &[f64], lambda: Option<f64>) -> Result<Self> {
        if a.len() != spec.n_alpha {
            return Err(Error::Dimension {
                what: "alpha coefficients",
                expected: spec.n_alpha,
                got: a.len(),
            });
        }
        if b.len() != spec.n_beta {
            return Err(Error::Dimension {
                what: "beta coefficients",
                expected: spec.n_beta,
                got: b.len(),
            });
        }
        let mut values = Vec::with_capacity(spec.dim());
        values.extend_from_slice(a);
        values.extend_from_slice(b);
        match (spec.family.is_marshall_olkin(), lambda) {
            (true, Some(l)) if l > 0.0 && l.is_finite() => values.push(l.ln()),
            (true, Some(l)) => return Err(Error::Domain(format!("lambda must be > 0, got {l}"))),
            (true, None) => {
                return Err(Error::Config(format!(
                    "family {} requires lambda",
                    spec.family
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!(
                    "family {} does not take lambda",
                    spec.family
                )))
            }
            (false, None) => {}
        }
        Ok(Self { spec, values })
    }

    /// From a natural-scale vector laid out as (a, b, λ).
    pub fn from_natural_slice(spec: ModelSpec, natural: &[f64]) -> Result<Self> {
        if natural.len() != spec.dim() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: spec.dim(),
                got: natural.len(),
            });
        }
        let (a, rest) = natural.split_at(spec.n_alpha);
        let (b, l) = rest.split_at(spec.n_beta);
        Self::from_natural(spec, a, b, l.first().copied())
    }

    pub fn from_coefficients(spec: ModelSpec, coef: &RegressionCoefficients) -> Result<Self> {
        Self::from_natural(spec, &coef.a, &coef.b, coef.lambda)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn internal(&self) -> &[f64] {
        &self.values
    }

    pub fn into_internal(self) -> Vec<f64> {
        self.values
    }

    pub fn a(&self) -> &[f64] {
        &self.values[..self.spec.n_alpha]
    }

    pub fn b(&self) -> &[f64] {
        &self.values[self.spec.n_alpha..self.spec.n_alpha + self.spec.n_beta]
    }

    pub fn log_lambda(&self) -> Option<f64> {
        self.spec.lambda_index().map(|i| self.values[i])
    }

    pub fn lambda(&self) -> Option<f64> {
        self.log_lambda().map(f64::exp)
    }

    /// (a, b, λ) with λ on its natural scale.
    pub fn natural(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        if let Some(i) = self.spec.lambda_index() {
            v[i] = v[i].exp();
        }
        v
    }

    pub fn coefficients(&self) -> RegressionCoefficients {
        RegressionCoefficients {
            a: self.a().to_vec(),
            b: self.b().to_vec(),
            lambda: self.lambda(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Right-censored observations (tᵢ, δᵢ, xᵢ).
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    t: Vec<f64>,
    delta: Vec<bool>,
    x: DesignMatrices,
}

impl SurvivalDataset {
    pub fn new(t: Vec<f64>, delta: Vec<bool>, x: DesignMatrices) -> Result<Self> {
        if delta.len() != t.len() {
            return Err(Error::Dimension {
                what: "event indicators",
                expected: t.len(),
                got: delta.len(),
            });
        }
        if x.nrows() != t.len() {
            return Err(Error::Dimension {
                what: "design rows",
                expected: t.len(),
                got: x.nrows(),
            });
        }
        if let Some((i, &ti)) = t.iter().enumerate().find(|(_, &ti)| !(ti > 0.0 && ti.is_finite())) {
            return Err(Error::InvalidData(format!(
                "time at row {i} must be positive and finite, got {ti}"
            )));
        }
        Ok(Self { t, delta, x })
    }

    /// Accepts 0/1 event codes.
    pub fn from_codes(t: Vec<f64>, delta: &[u8], x: DesignMatrices) -> Result<Self> {
        let flags = delta
            .iter()
            .enumerate()
            .map(|(i, &d)| match d {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidData(format!(
                    "event indicator at row {i} must be 0 or 1, got {other}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(t, flags, x)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn events(&self) -> &[bool] {
        &self.delta
    }

    pub fn design(&self) -> &DesignMatrices {
        &self.x
    }

    pub fn n_events(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    /// Share of censored observations, in [0, 1].
    pub fn censoring_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            t: rows.iter().map(|&i| self.t[i]).collect(),
            delta: rows.iter().map(|&i| self.delta[i]).collect(),
            x: self.x.select_rows(rows),
        }
    }

    /// All rows except `row`.
    pub fn without_row(&self, row: usize) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != row).collect();
        self.select_rows(&keep)
    }

    /// All rows except those listed.
    pub fn without_rows(&self, rows: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|i| !rows.contains(i)).collect();
        self.select_rows(&keep)
    }
}

#[inline]
fn dot_row(m: &DMatrix<f64>, i: usize, coef: &[f64]) -> f64 {
    coef.iter().enumerate().map(|(j, c)| m[(i, j)] * c).sum()
}

/// Log-density and log-survival contribution of row `i`. Returns the
/// contribution and whether α was clamped.
#[inline]
fn row_contribution(
    base: BaseFamily,
    log_lambda: Option<f64>,
    a: &[f64],
    b: &[f64],
    data: &SurvivalDataset,
    i: usize,
) -> (f64, bool) {
    let x = &data.x;
    let (alpha, clamped) = clamp_alpha(dot_row(x.x1(), i, a));
    let beta = dot_row(x.x2(), i, b).exp();
    let t = data.t[i];
    let ls = base_logsurv_raw(base, t, alpha, beta);
    let event = data.delta[i];
    let value = match log_lambda {
        None => {
            if event {
                base_logpdf_raw(base, t, alpha, beta, ls)
            } else {
                ls
            }
        }
        Some(ll) => {
            let ld = mo_log_denominator(ls, ll.exp());
            if event {
                ll + base_logpdf_raw(base, t, alpha, beta, ls) - 2.0 * ld
            } else {
                ll + ls - ld
            }
        }
    };
    (value, clamped)
}

/// Log-likelihood together with the number of rows whose α was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loglik: f64,
    pub clamped_rows: usize,
}

/// Evaluates on the internal parameter scale. Non-finite totals become −∞.
pub fn evaluate_internal(spec: &ModelSpec, values: &[f64], data: &SurvivalDataset) -> Evaluation {
    debug_assert_eq!(values.len(), spec.dim());
    let a = &values[..spec.n_alpha];
    let b = &values[spec.n_alpha..spec.n_alpha + spec.n_beta];
    let log_lambda = spec.lambda_index().map(|k| values[k]);
    let base = spec.family.base();
    let mut total = 0.0;
    let mut clamped_rows = 0;
    for i in 0..data.len() {
        let (c, hit) = row_contribution(base, log_lambda, a, b, data, i);
        total += c;
        clamped_rows += usize::from(hit);
    }
    Evaluation {
        loglik: if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        },
        clamped_rows,
    }
}

pub(crate) fn loglik_internal(spec: &ModelSpec, values: &[f64], data: &SurvivalDataset) -> f64 {
    if values.iter().any(|v| !v.is_finite()) {
        return f64::NEG_INFINITY;
    }
    evaluate_internal(spec, values, data).loglik
}

fn check_compatible(theta: &ParamVector, data: &SurvivalDataset) -> Result<()> {
    theta.spec.check_design(&data.x)
}

/// Censored log-likelihood; −∞ when any term is not finite.
///
/// # Panics
/// If the design matrices do not match the parameter layout.
pub fn loglik(theta: &ParamVector, data: &SurvivalDataset) -> f64 {
    check_compatible(theta, data).expect("parameter layout does not match the design");
    loglik_internal(&theta.spec, &theta.values, data)
}

/// Per-observation terms δᵢ log f(tᵢ) + (1 − δᵢ) log S(tᵢ).
pub fn log_contributions(theta: &ParamVector, data: &SurvivalDataset) -> Result<Vec<f64>> {
    check_compatible(theta, data)?;
    let mut out = vec![0.0; data.len()];
    log_contributions_into(&theta.spec, &theta.values, data, &mut out);
    Ok(out)
}

pub(crate) fn log_contributions_into(
    spec: &ModelSpec,
    values: &[f64],
    data: &SurvivalDataset,
    out: &mut [f64],
) {
    let a = &values[..spec.n_alpha];
    let b = &values[spec.n_alpha..spec.n_alpha + spec.n_beta];
    let log_lambda = spec.lambda_index().map(|k| values[k]);
    let base = spec.family.base();
    for (i, o) in out.iter_mut().enumerate() {
        *o = row_contribution(base, log_lambda, a, b, data, i).0;
    }
}

/// Model log-survival log S(tᵢ) of every observation, events included.
pub fn log_survival(theta: &ParamVector, data: &SurvivalDataset) -> Result<Vec<f64>> {
    check_compatible(theta, data)?;
    let spec = theta.spec;
    let a = theta.a();
    let b = theta.b();
    let base = spec.family.base();
    let log_lambda = theta.log_lambda();
    Ok((0..data.len())
        .map(|i| {
            let x = &data.x;
            let (alpha, _) = clamp_alpha(dot_row(x.x1(), i, a));
            let beta = dot_row(x.x2(), i, b).exp();
            let ls = base_logsurv_raw(base, data.t[i], alpha, beta);
            match log_lambda {
                None => ls,
                Some(ll) => ll + ls - mo_log_denominator(ls, ll.exp()),
            }
        })
        .collect())
}

/// Gradient of the log-likelihood on the internal scale.
pub fn grad_loglik(theta: &ParamVector, data: &SurvivalDataset) -> Result<DVector<f64>> {
    check_compatible(theta, data)?;
    let spec = theta.spec;
    let f = |v: &[f64]| loglik_internal(&spec, v, data);
    if !f(&theta.values).is_finite() {
        return Err(Error::NonFiniteValue);
    }
    numerical_gradient(f, &theta.values)
}

/// Hessian of the log-likelihood on the internal scale.
pub fn hessian_loglik(theta: &ParamVector, data: &SurvivalDataset) -> Result<DMatrix<f64>> {
    check_compatible(theta, data)?;
    let spec = theta.spec;
    numerical_hessian(|v: &[f64]| loglik_internal(&spec, v, data), &theta.values)
}

#[inline]
fn step(x: f64, scale: f64) -> f64 {
    let h = scale * x.abs().max(1.0);
    // Make the step exactly representable relative to x.
    let xp = x + h;
    xp - x
}

/// Central-difference gradient with hⱼ = ε^{1/3}·max(1, |xⱼ|).
pub fn numerical_gradient<F>(f: F, x: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let scale = f64::EPSILON.cbrt();
    let mut work = x.to_vec();
    let mut g = DVector::zeros(x.len());
    for j in 0..x.len() {
        let h = step(x[j], scale);
        work[j] = x[j] + h;
        let fp = f(&work);
        work[j] = x[j] - h;
        let fm = f(&work);
        work[j] = x[j];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::NonFiniteNeighbor { coordinate: j });
        }
        g[j] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central second differences with hⱼ = ε^{1/4}·max(1, |xⱼ|), symmetrized.
pub fn numerical_hessian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    let scale = f64::EPSILON.powf(0.25);
    let h: Vec<f64> = x.iter().map(|&v| step(v, scale)).collect();
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    let mut work = x.to_vec();
    let eval = |work: &mut Vec<f64>, moves: &[(usize, f64)], coord: usize| -> Result<f64> {
        for &(j, s) in moves {
            work[j] = x[j] + s * h[j];
        }
        let v = f(work);
        for &(j, _) in moves {
            work[j] = x[j];
        }
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteNeighbor { coordinate: coord })
        }
    };
    let mut hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let fp = eval(&mut work, &[(j, 1.0)], j)?;
        let fm = eval(&mut work, &[(j, -1.0)], j)?;
        hess[(j, j)] = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
        for k in 0..j {
            let fpp = eval(&mut work, &[(j, 1.0), (k, 1.0)], j)?;
            let fpm = eval(&mut work, &[(j, 1.0), (k, -1.0)], j)?;
            let fmp = eval(&mut work, &[(j, -1.0), (k, 1.0)], j)?;
            let fmm = eval(&mut work, &[(j, -1.0), (k, -1.0)], j)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[k]);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok(sym)
}
