//! Scalar kernels shared by every model: the standard normal CDF and its log,
//! log-space helpers, the normal quantile and chi-squared tail probabilities.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use libm::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// `0.5 * ln(2π)`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF, Φ(x).
///
/// Evaluated through `erfc` on whichever side keeps the result a lower tail,
/// so Φ(x) and Φ(-x) are each computed to full relative precision and their sum
/// is 1 to within rounding. Saturates to exactly 0 or 1 far in the tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(x * FRAC_1_SQRT_2)
    }
}

/// Upper tail 1 − Φ(x) without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// log Φ(x), accurate deep into the lower tail where Φ itself underflows.
pub fn std_normal_logcdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        // Φ(x) = 1 - Φ(-x); Φ(-x) <= 1/2 so ln_1p is safe.
        return (-std_normal_cdf(-x)).ln_1p();
    }
    if x > -20.0 {
        return std_normal_cdf(x).ln();
    }
    // Asymptotic expansion of the Mills ratio:
    // Φ(x) = φ(x)/|x| * (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
    let z2 = x * x;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=12 {
        term *= -((2 * k - 1) as f64) / z2;
        series += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    -0.5 * z2 - (-x).ln() - LN_SQRT_2PI + series.ln()
}

/// log(1 − eˣ) for x < 0.
///
/// Switches between `ln(-expm1(x))` and `ln_1p(-exp(x))` at −ln 2, which keeps
/// the relative error near machine precision over the whole half-line.
pub fn log1mexp(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::Domain(format!("log1mexp requires x < 0, got {x}")));
    }
    Ok(log1mexp_unchecked(x))
}

#[inline]
pub(crate) fn log1mexp_unchecked(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// log(eᵃ + eᵇ)
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(xᵢ), stabilized by the running maximum. Empty input gives −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation followed by two Halley refinements against
/// [`std_normal_cdf`], which brings it to the accuracy of Φ itself.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires p in (0, 1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (-p).ln_1p()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    for _ in 0..2 {
        // Work on whichever tail is smaller so the residual keeps its precision.
        let e = if x < 0.0 {
            std_normal_cdf(x) - p
        } else {
            (1.0 - p) - std_normal_sf(x)
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// Upper tail of the chi-squared law, P(X > x) for X ~ χ²(df).
///
/// Goes through the regularized upper incomplete gamma Q(df/2, x/2), so tail
/// probabilities far below 1e-13 keep their relative precision.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("chi-squared df must be > 0, got {df}")));
    }
    if x.is_nan() {
        return Err(Error::Domain("chi-squared statistic is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(0.5 * df, 0.5 * x))
}
