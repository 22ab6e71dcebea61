//! Covariate links: α = x₁ᵀa (identity link) and β = exp(x₂ᵀb) (log link),
//! with λ a single covariate-free parameter for the Marshall-Olkin families.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{BaseFamily, BaseLaw, CureFraction, Law, MoLaw};
use crate::error::{Error, Result};

/// |α| below this is pushed out to ±ALPHA_CLAMP before any law is evaluated.
pub const ALPHA_CLAMP: f64 = 1e-8;

/// The four regression families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gompertz,
    #[serde(rename = "ig")]
    InverseGaussian,
    MoGompertz,
    #[serde(rename = "mo-ig")]
    MoInverseGaussian,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Gompertz,
        Family::InverseGaussian,
        Family::MoGompertz,
        Family::MoInverseGaussian,
    ];

    pub fn base(self) -> BaseFamily {
        match self {
            Family::Gompertz | Family::MoGompertz => BaseFamily::Gompertz,
            Family::InverseGaussian | Family::MoInverseGaussian => BaseFamily::InverseGaussian,
        }
    }

    pub fn is_marshall_olkin(self) -> bool {
        matches!(self, Family::MoGompertz | Family::MoInverseGaussian)
    }

    /// The family without the Marshall-Olkin parameter.
    pub fn restricted(self) -> Family {
        match self {
            Family::MoGompertz => Family::Gompertz,
            Family::MoInverseGaussian => Family::InverseGaussian,
            f => f,
        }
    }

    pub fn marshall_olkin(self) -> Family {
        match self {
            Family::Gompertz => Family::MoGompertz,
            Family::InverseGaussian => Family::MoInverseGaussian,
            f => f,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gompertz => "gompertz",
            Family::InverseGaussian => "ig",
            Family::MoGompertz => "mo-gompertz",
            Family::MoInverseGaussian => "mo-ig",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::Gompertz => "Gompertz",
            Family::InverseGaussian => "inverse Gaussian",
            Family::MoGompertz => "Marshall-Olkin Gompertz",
            Family::MoInverseGaussian => "Marshall-Olkin inverse Gaussian",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gompertz" | "g" => Ok(Family::Gompertz),
            "ig" | "inverse-gaussian" | "invgauss" => Ok(Family::InverseGaussian),
            "mo-gompertz" | "mog" | "mo-g" => Ok(Family::MoGompertz),
            "mo-ig" | "moig" | "mo-inverse-gaussian" => Ok(Family::MoInverseGaussian),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Design matrices for α (`x1`) and β (`x2`), each with a leading intercept
/// column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    x1: DMatrix<f64>,
    x2: DMatrix<f64>,
    x1_names: Vec<String>,
    x2_names: Vec<String>,
}

impl DesignMatrices {
    /// Builds from full matrices that already carry the intercept column.
    pub fn new(x1: DMatrix<f64>, x2: DMatrix<f64>) -> Result<Self> {
        let x1_names = default_names(x1.ncols());
        let x2_names = default_names(x2.ncols());
        Self::with_names(x1, x2, x1_names, x2_names)
    }

    pub fn with_names(
        x1: DMatrix<f64>,
        x2: DMatrix<f64>,
        x1_names: Vec<String>,
        x2_names: Vec<String>,
    ) -> Result<Self> {
        if x1.nrows() != x2.nrows() {
            return Err(Error::Dimension {
                what: "design matrix rows",
                expected: x1.nrows(),
                got: x2.nrows(),
            });
        }
        for (m, label) in [(&x1, "x1"), (&x2, "x2")] {
            if m.ncols() == 0 {
                return Err(Error::InvalidData(format!(
                    "{label} needs at least the intercept column"
                )));
            }
            if m.column(0).iter().any(|&v| v != 1.0) {
                return Err(Error::InvalidData(format!(
                    "first column of {label} must be an intercept of ones"
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("{label} has non-finite entries")));
            }
        }
        if x1_names.len() != x1.ncols() {
            return Err(Error::Dimension {
                what: "x1 column names",
                expected: x1.ncols(),
                got: x1_names.len(),
            });
        }
        if x2_names.len() != x2.ncols() {
            return Err(Error::Dimension {
                what: "x2 column names",
                expected: x2.ncols(),
                got: x2_names.len(),
            });
        }
        Ok(Self {
            x1,
            x2,
            x1_names,
            x2_names,
        })
    }

    /// Prepends intercept columns to covariate rows. `alpha_rows[i]` and
    /// `beta_rows[i]` hold the covariates of observation i (possibly empty).
    pub fn from_covariates(
        alpha_rows: &[Vec<f64>],
        beta_rows: &[Vec<f64>],
        alpha_names: &[String],
        beta_names: &[String],
    ) -> Result<Self> {
        let n = alpha_rows.len();
        if beta_rows.len() != n {
            return Err(Error::Dimension {
                what: "covariate rows",
                expected: n,
                got: beta_rows.len(),
            });
        }
        let build = |rows: &[Vec<f64>], names: &[String]| -> Result<DMatrix<f64>> {
            let p = names.len();
            let mut m = DMatrix::from_element(n, p + 1, 1.0);
            for (i, r) in rows.iter().enumerate() {
                if r.len() != p {
                    return Err(Error::Dimension {
                        what: "covariates per row",
                        expected: p,
                        got: r.len(),
                    });
                }
                for (j, &v) in r.iter().enumerate() {
                    m[(i, j + 1)] = v;
                }
            }
            Ok(m)
        };
        let x1 = build(alpha_rows, alpha_names)?;
        let x2 = build(beta_rows, beta_names)?;
        let with_intercept = |names: &[String]| {
            std::iter::once("(intercept)".to_string())
                .chain(names.iter().cloned())
                .collect::<Vec<_>>()
        };
        Self::with_names(x1, x2, with_intercept(alpha_names), with_intercept(beta_names))
    }

    /// Intercept-only design for `n` observations.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            x1: DMatrix::from_element(n, 1, 1.0),
            x2: DMatrix::from_element(n, 1, 1.0),
            x1_names: default_names(1),
            x2_names: default_names(1),
        }
    }

    pub fn nrows(&self) -> usize {
        self.x1.nrows()
    }

    pub fn x1(&self) -> &DMatrix<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &DMatrix<f64> {
        &self.x2
    }

    pub fn x1_names(&self) -> &[String] {
        &self.x1_names
    }

    pub fn x2_names(&self) -> &[String] {
        &self.x2_names
    }

    /// Number of α coefficients (intercept included).
    pub fn n_alpha(&self) -> usize {
        self.x1.ncols()
    }

    pub fn n_beta(&self) -> usize {
        self.x2.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x1: self.x1.select_rows(rows),
            x2: self.x2.select_rows(rows),
            x1_names: self.x1_names.clone(),
            x2_names: self.x2_names.clone(),
        }
    }

    /// Concatenated covariate values (x1 then x2, intercepts dropped) of row `i`.
    pub fn pattern(&self, i: usize) -> Vec<f64> {
        self.x1
            .row(i)
            .iter()
            .skip(1)
            .chain(self.x2.row(i).iter().skip(1))
            .copied()
            .collect()
    }

    /// Distinct covariate patterns in first-appearance order, with the row
    /// indices that carry each. `None` when there are more than `max_patterns`.
    pub fn unique_patterns(&self, max_patterns: usize) -> Option<Vec<(Vec<f64>, Vec<usize>)>> {
        let mut out: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for i in 0..self.nrows() {
            let pat = self.pattern(i);
            match out.iter_mut().find(|(p, _)| p == &pat) {
                Some((_, rows)) => rows.push(i),
                None => {
                    if out.len() == max_patterns {
                        return None;
                    }
                    out.push((pat, vec![i]));
                }
            }
        }
        Some(out)
    }
}

fn default_names(k: usize) -> Vec<String> {
    (0..k)
        .map(|j| {
            if j == 0 {
                "(intercept)".to_string()
            } else {
                format!("x{j}")
            }
        })
        .collect()
}

/// Regression coefficients on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda: Option<f64>,
}

impl RegressionCoefficients {
    pub fn new(a: Vec<f64>, b: Vec<f64>, lambda: Option<f64>) -> Result<Self> {
        if let Some(l) = lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Domain(format!("lambda must be > 0, got {l}")));
            }
        }
        Ok(Self { a, b, lambda })
    }

    fn check_family(&self, family: Family) -> Result<()> {
        if family.is_marshall_olkin() != self.lambda.is_some() {
            return Err(Error::Config(format!(
                "family {family} {} a lambda coefficient",
                if family.is_marshall_olkin() {
                    "requires"
                } else {
                    "does not take"
                }
            )));
        }
        Ok(())
    }

    fn check_dims(&self, x: &DesignMatrices) -> Result<()> {
        if self.a.len() != x.n_alpha() {
            return Err(Error::Dimension {
                what: "alpha coefficients",
                expected: x.n_alpha(),
                got: self.a.len(),
            });
        }
        if self.b.len() != x.n_beta() {
            return Err(Error::Dimension {
                what: "beta coefficients",
                expected: x.n_beta(),
                got: self.b.len(),
            });
        }
        Ok(())
    }
}

/// (αᵢ, βᵢ) of one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPredictor {
    pub alpha: f64,
    pub beta: f64,
    /// α was within ±ALPHA_CLAMP of zero and was pushed out.
    pub clamped: bool,
}

#[inline]
pub(crate) fn clamp_alpha(alpha: f64) -> (f64, bool) {
    if alpha.abs() < ALPHA_CLAMP {
        (if alpha < 0.0 { -ALPHA_CLAMP } else { ALPHA_CLAMP }, true)
    } else {
        (alpha, false)
    }
}

/// Per-observation (αᵢ, βᵢ): αᵢ = x₁ᵢᵀa, βᵢ = exp(x₂ᵢᵀb).
pub fn linear_predictors(
    coef: &RegressionCoefficients,
    x: &DesignMatrices,
) -> Result<Vec<LinearPredictor>> {
    coef.check_dims(x)?;
    let n = x.nrows();
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    let a = DVector::from_column_slice(&coef.a);
    let b = DVector::from_column_slice(&coef.b);
    x.x1.mul_to(&a, &mut alpha);
    x.x2.mul_to(&b, &mut beta);
    Ok(alpha
        .iter()
        .zip(beta.iter())
        .map(|(&al, &eta)| {
            let (alpha, clamped) = clamp_alpha(al);
            LinearPredictor {
                alpha,
                beta: eta.exp(),
                clamped,
            }
        })
        .collect())
}

/// The law of one observation given its predictors.
pub fn law_for(family: Family, pred: &LinearPredictor, lambda: Option<f64>) -> Result<Law> {
    let base = BaseLaw::new(family.base(), pred.alpha, pred.beta)?;
    if family.is_marshall_olkin() {
        let lambda =
            lambda.ok_or_else(|| Error::Config(format!("family {family} requires lambda")))?;
        Ok(MoLaw::new(base, lambda)?.into())
    } else {
        Ok(base.into())
    }
}

/// Per-observation laws built from the links.
pub fn per_observation_laws(
    coef: &RegressionCoefficients,
    x: &DesignMatrices,
    family: Family,
) -> Result<Vec<Law>> {
    coef.check_family(family)?;
    linear_predictors(coef, x)?
        .iter()
        .map(|p| law_for(family, p, coef.lambda))
        .collect()
}

/// Per-observation cure fractions p₀ᵢ and pᵢ.
pub fn per_observation_cure(
    coef: &RegressionCoefficients,
    x: &DesignMatrices,
    family: Family,
) -> Result<Vec<CureFraction>> {
    Ok(per_observation_laws(coef, x, family)?
        .iter()
        .map(Law::cure_fraction)
        .collect())
}
