//! Defective Gompertz and inverse Gaussian laws and their Marshall-Olkin
//! extensions, as scalar functions of (α, β, λ).
//!
//! A law is *defective* when α < 0: its survival function levels off at a
//! positive cure fraction instead of decaying to zero. Survival and density are
//! always evaluated on the log scale; `S` itself is never formed and then logged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{log1mexp_unchecked, std_normal_logcdf, LN_SQRT_2PI};

/// The base families that a law can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    Gompertz,
    InverseGaussian,
}

/// A Gompertz or inverse Gaussian law with parameters (α, β).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseLaw {
    family: BaseFamily,
    alpha: f64,
    beta: f64,
}

/// Marshall-Olkin transform of a base law: S ↦ λS / (1 − (1 − λ)S).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoLaw {
    base: BaseLaw,
    lambda: f64,
}

/// Either a plain base law or its Marshall-Olkin extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Base(BaseLaw),
    MarshallOlkin(MoLaw),
}

/// Limiting survival probability of a law.
///
/// `p0` is the cure fraction of the base law and `p` the cure fraction after
/// the Marshall-Olkin transform (equal to `p0` for a plain base law).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CureFraction {
    pub p: f64,
    pub p0: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must be finite and > 0, got {beta}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha != 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must be finite and non-zero, got {alpha}"
        )))
    }
}

fn check_time(t: f64, strictly_positive: bool) -> Result<()> {
    let ok = if strictly_positive { t > 0.0 } else { t >= 0.0 };
    if ok && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "time must be {} 0, got {t}",
            if strictly_positive { ">" } else { ">=" }
        )))
    }
}

// Unchecked kernels used by the likelihood hot path. Callers guarantee t > 0
// (t >= 0 for survival), β > 0 and α ≠ 0.

#[inline]
pub(crate) fn gompertz_logsurv_raw(t: f64, alpha: f64, beta: f64) -> f64 {
    -(beta / alpha) * (alpha * t).exp_m1()
}

#[inline]
pub(crate) fn invgauss_logsurv_raw(t: f64, alpha: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    // S = Φ((1 − αt)/√(βt)) − e^{2α/β} Φ(−(αt + 1)/√(βt)); both terms are
    // lower-tail probabilities, combined in log space.
    let s = (beta * t).sqrt();
    let log_a = std_normal_logcdf((1.0 - alpha * t) / s);
    let log_b = 2.0 * alpha / beta + std_normal_logcdf(-(alpha * t + 1.0) / s);
    if log_b < log_a {
        log_a + log1mexp_unchecked(log_b - log_a)
    } else {
        f64::NEG_INFINITY
    }
}

#[inline]
pub(crate) fn invgauss_logpdf_raw(t: f64, alpha: f64, beta: f64) -> f64 {
    let r = 1.0 - alpha * t;
    -LN_SQRT_2PI - 0.5 * beta.ln() - 1.5 * t.ln() - r * r / (2.0 * beta * t)
}

#[inline]
pub(crate) fn base_logsurv_raw(family: BaseFamily, t: f64, alpha: f64, beta: f64) -> f64 {
    match family {
        BaseFamily::Gompertz => gompertz_logsurv_raw(t, alpha, beta),
        BaseFamily::InverseGaussian => invgauss_logsurv_raw(t, alpha, beta),
    }
}

/// Base log-density when the base log-survival at `t` is already known.
#[inline]
pub(crate) fn base_logpdf_raw(
    family: BaseFamily,
    t: f64,
    alpha: f64,
    beta: f64,
    log_surv: f64,
) -> f64 {
    match family {
        BaseFamily::Gompertz => beta.ln() + alpha * t + log_surv,
        BaseFamily::InverseGaussian => invgauss_logpdf_raw(t, alpha, beta),
    }
}

/// log(1 − (1 − λ)S) given log S.
#[inline]
pub(crate) fn mo_log_denominator(log_surv: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        0.0
    } else if lambda > 1.0 {
        ((lambda - 1.0) * log_surv.exp()).ln_1p()
    } else {
        log1mexp_unchecked((1.0 - lambda).ln() + log_surv)
    }
}

/// Gompertz log-density, log[β e^{αt} exp(−(β/α)(e^{αt} − 1))].
pub fn gompertz_logpdf(t: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_time(t, true)?;
    check_beta(beta)?;
    check_alpha(alpha)?;
    let ls = gompertz_logsurv_raw(t, alpha, beta);
    Ok(base_logpdf_raw(BaseFamily::Gompertz, t, alpha, beta, ls))
}

/// Gompertz log-survival, −(β/α)(e^{αt} − 1).
pub fn gompertz_logsurv(t: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_time(t, false)?;
    check_beta(beta)?;
    check_alpha(alpha)?;
    Ok(gompertz_logsurv_raw(t, alpha, beta))
}

/// Inverse Gaussian log-density, log[(2πβt³)^{−1/2} exp(−(1 − αt)²/(2βt))].
pub fn invgauss_logpdf(t: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_time(t, true)?;
    check_beta(beta)?;
    check_alpha(alpha)?;
    Ok(invgauss_logpdf_raw(t, alpha, beta))
}

/// Inverse Gaussian log-survival.
pub fn invgauss_logsurv(t: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_time(t, false)?;
    check_beta(beta)?;
    check_alpha(alpha)?;
    Ok(invgauss_logsurv_raw(t, alpha, beta))
}

/// Marshall-Olkin log-survival, log[λS / (1 − (1 − λ)S)].
pub fn mo_logsurv(t: f64, law: &MoLaw) -> Result<f64> {
    check_time(t, false)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let ls = law.base.logsurv_raw(t);
    Ok(law.lambda.ln() + ls - mo_log_denominator(ls, law.lambda))
}

/// Marshall-Olkin log-density, log[λf / (1 − (1 − λ)S)²].
pub fn mo_logpdf(t: f64, law: &MoLaw) -> Result<f64> {
    check_time(t, true)?;
    let b = &law.base;
    let ls = b.logsurv_raw(t);
    let lf = base_logpdf_raw(b.family, t, b.alpha, b.beta, ls);
    Ok(law.lambda.ln() + lf - 2.0 * mo_log_denominator(ls, law.lambda))
}

/// Cure fraction of any law; zero for a proper law (α > 0).
pub fn cure_fraction(law: &Law) -> CureFraction {
    law.cure_fraction()
}

/// Time `t` with F(t) = u, where F = 1 − S.
pub fn quantile(u: f64, law: &Law) -> Result<f64> {
    law.quantile(u)
}

/// Marshall-Olkin transform of a cure fraction: λp₀ / (1 − (1 − λ)p₀).
#[inline]
pub fn mo_cure_transform(p0: f64, lambda: f64) -> f64 {
    if p0 == 0.0 {
        0.0
    } else {
        lambda * p0 / (1.0 - (1.0 - lambda) * p0)
    }
}

impl BaseLaw {
    pub fn new(family: BaseFamily, alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        Ok(Self {
            family,
            alpha,
            beta,
        })
    }

    pub fn gompertz(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(BaseFamily::Gompertz, alpha, beta)
    }

    pub fn inverse_gaussian(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(BaseFamily::InverseGaussian, alpha, beta)
    }

    pub fn family(&self) -> BaseFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_defective(&self) -> bool {
        self.alpha < 0.0
    }

    #[inline]
    fn logsurv_raw(&self, t: f64) -> f64 {
        base_logsurv_raw(self.family, t, self.alpha, self.beta)
    }

    pub fn log_pdf(&self, t: f64) -> Result<f64> {
        check_time(t, true)?;
        let ls = self.logsurv_raw(t);
        Ok(base_logpdf_raw(self.family, t, self.alpha, self.beta, ls))
    }

    pub fn log_surv(&self, t: f64) -> Result<f64> {
        check_time(t, false)?;
        Ok(self.logsurv_raw(t))
    }

    /// Basal cure fraction: e^{β/α} (Gompertz) or 1 − e^{2α/β} (inverse
    /// Gaussian) when α < 0, otherwise 0.
    pub fn cure_fraction(&self) -> CureFraction {
        let p0 = if self.alpha > 0.0 {
            0.0
        } else {
            match self.family {
                BaseFamily::Gompertz => (self.beta / self.alpha).exp(),
                BaseFamily::InverseGaussian => -(2.0 * self.alpha / self.beta).exp_m1(),
            }
        };
        CureFraction { p: p0, p0 }
    }
}

impl MoLaw {
    pub fn new(base: BaseLaw, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda must be finite and > 0, got {lambda}"
            )));
        }
        Ok(Self { base, lambda })
    }

    pub fn base(&self) -> &BaseLaw {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_pdf(&self, t: f64) -> Result<f64> {
        mo_logpdf(t, self)
    }

    pub fn log_surv(&self, t: f64) -> Result<f64> {
        mo_logsurv(t, self)
    }

    pub fn cure_fraction(&self) -> CureFraction {
        let p0 = self.base.cure_fraction().p0;
        CureFraction {
            p: mo_cure_transform(p0, self.lambda),
            p0,
        }
    }
}

impl From<BaseLaw> for Law {
    fn from(l: BaseLaw) -> Self {
        Law::Base(l)
    }
}

impl From<MoLaw> for Law {
    fn from(l: MoLaw) -> Self {
        Law::MarshallOlkin(l)
    }
}

/// Iteration cap for the quantile root finder.
const QUANTILE_MAX_ITER: usize = 200;

impl Law {
    pub fn base(&self) -> &BaseLaw {
        match self {
            Law::Base(b) => b,
            Law::MarshallOlkin(m) => &m.base,
        }
    }

    /// λ of the Marshall-Olkin transform, or 1 for a plain base law.
    pub fn lambda(&self) -> f64 {
        match self {
            Law::Base(_) => 1.0,
            Law::MarshallOlkin(m) => m.lambda,
        }
    }

    pub fn log_pdf(&self, t: f64) -> Result<f64> {
        match self {
            Law::Base(b) => b.log_pdf(t),
            Law::MarshallOlkin(m) => m.log_pdf(t),
        }
    }

    pub fn log_surv(&self, t: f64) -> Result<f64> {
        match self {
            Law::Base(b) => b.log_surv(t),
            Law::MarshallOlkin(m) => m.log_surv(t),
        }
    }

    pub fn surv(&self, t: f64) -> Result<f64> {
        Ok(self.log_surv(t)?.exp())
    }

    /// F(t) = 1 − S(t), formed as −expm1(log S) to keep precision for small F.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(-self.log_surv(t)?.exp_m1())
    }

    pub fn cure_fraction(&self) -> CureFraction {
        match self {
            Law::Base(b) => b.cure_fraction(),
            Law::MarshallOlkin(m) => m.cure_fraction(),
        }
    }

    /// Solves F(t) = u for u in (0, 1 − p) by Brent's method.
    ///
    /// The upper end of the bracket starts at 1 and doubles until F exceeds u;
    /// the lower end is t = 0 where F = 0.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let p = self.cure_fraction().p;
        if !(u > 0.0 && u < 1.0 - p) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0, {}), got {u}",
                1.0 - p
            )));
        }
        let g = |t: f64| -> f64 {
            // t >= 0 by construction, so log_surv cannot fail.
            let ls = self.log_surv(t).unwrap_or(f64::NEG_INFINITY);
            -ls.exp_m1() - u
        };

        let mut hi = 1.0;
        let mut g_hi = g(hi);
        while g_hi <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::NonConvergence(format!(
                    "could not bracket quantile u = {u}"
                )));
            }
            g_hi = g(hi);
        }
        brent(g, 0.0, -u, hi, g_hi, QUANTILE_MAX_ITER)
    }
}

/// Brent's method on a sign-changing bracket [a, b] with g(a) < 0 < g(b).
fn brent<G: Fn(f64) -> f64>(
    g: G,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 || fb.abs() <= 1e-15 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation or secant step.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
    }
    Err(Error::NonConvergence(format!(
        "quantile root finder hit {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gompertz_density_at_origin() {
        let v = gompertz_logpdf(1e-300, 1.0, 1.0).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gompertz_logpdf(0.0, 1.0, 1.0).is_err());
        assert!(gompertz_logpdf(1.0, 1.0, 0.0).is_err());
        assert!(gompertz_logsurv(1.0, 0.0, 1.0).is_err());
        assert!(invgauss_logpdf(-1.0, 1.0, 1.0).is_err());
        assert!(invgauss_logsurv(1.0, 1.0, -2.0).is_err());
        assert!(BaseLaw::gompertz(0.0, 1.0).is_err());
        let b = BaseLaw::gompertz(-1.0, 1.0).unwrap();
        assert!(MoLaw::new(b, 0.0).is_err());
        assert!(MoLaw::new(b, f64::INFINITY).is_err());
    }

    #[test]
    fn survival_is_one_at_origin() {
        assert_eq!(gompertz_logsurv(0.0, -1.0, 2.0).unwrap(), 0.0);
        assert_eq!(invgauss_logsurv(0.0, -1.0, 2.0).unwrap(), 0.0);
        let base = BaseLaw::inverse_gaussian(0.5, 1.0).unwrap();
        for lambda in [0.01, 0.5, 1.0, 3.0, 100.0] {
            let m = MoLaw::new(base, lambda).unwrap();
            assert_eq!(mo_logsurv(0.0, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn proper_law_has_no_cure() {
        let l: Law = BaseLaw::gompertz(0.3, 1.0).unwrap().into();
        assert_eq!(l.cure_fraction(), CureFraction { p: 0.0, p0: 0.0 });
        let m: Law = MoLaw::new(BaseLaw::inverse_gaussian(0.3, 1.0).unwrap(), 4.0)
            .unwrap()
            .into();
        assert_eq!(m.cure_fraction().p, 0.0);
    }

    #[test]
    fn quantile_rejects_levels_beyond_plateau() {
        let l: Law = BaseLaw::gompertz(-1.0, 1.0).unwrap().into();
        let p = l.cure_fraction().p;
        assert!(l.quantile(1.0 - p).is_err());
        assert!(l.quantile(0.0).is_err());
        assert!(l.quantile(1.0 - p - 1e-6).is_ok());
    }

    #[test]
    fn quantile_tiny_level_is_near_origin() {
        let l: Law = BaseLaw::gompertz(1.0, 1.0).unwrap().into();
        let t = l.quantile(1e-12).unwrap();
        assert!(t > 0.0 && t < 1e-10);
        assert_relative_eq!(l.cdf(t).unwrap(), 1e-12, max_relative = 1e-6);
    }
}
