mod common;

use common::reference::{CHI2_SF, NORMAL_LOGCDF, NORMAL_QUANTILE};
use common::{integrate, integrate_half_line, rel_err, richardson};
use curefit::special::{
    chi2_sf, log1mexp, log_add_exp, log_sum_exp, std_normal_cdf, std_normal_logcdf,
    std_normal_quantile, std_normal_sf,
};
use proptest::prelude::*;

#[test]
fn oracles_self_check() {
    let v = integrate_half_line(|t| (-t).exp(), 1e-13);
    assert!((v - 1.0).abs() < 1e-12, "{v}");
    let g = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13);
    assert!((g - 2.0).abs() < 1e-12, "{g}");
    let (d, _) = richardson(f64::exp, 1.0, 0.5);
    assert!(rel_err(d, 1f64.exp()) < 1e-12, "{d}");
}

#[test]
fn normal_cdf_against_quadrature() {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for x in [-3.0, -1.0, 0.3, 1.0, 2.5] {
        let want = 0.5 + integrate(phi, 0.0, x, 1e-15);
        assert!((std_normal_cdf(x) - want).abs() < 1e-14, "{x}");
    }
    assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    assert_eq!(std_normal_cdf(0.0), 0.5);
    assert_eq!(std_normal_cdf(40.0), 1.0);
}

#[test]
fn log_normal_cdf_reference() {
    for [x, want] in NORMAL_LOGCDF {
        assert!(rel_err(std_normal_logcdf(x), want) < 1e-12, "{x}");
    }
    assert_eq!(std_normal_logcdf(f64::NEG_INFINITY), f64::NEG_INFINITY);
}

#[test]
fn normal_quantile_reference() {
    for [p, want] in NORMAL_QUANTILE {
        assert!(rel_err(std_normal_quantile(p).unwrap(), want) < 1e-12, "{p}");
    }
    assert!(std_normal_quantile(0.0).is_err());
    assert!(std_normal_quantile(1.0).is_err());
}

#[test]
fn chi2_reference() {
    for [x, k, want] in CHI2_SF {
        assert!(rel_err(chi2_sf(x, k).unwrap(), want) < 1e-10, "{x} {k}");
    }
}

#[test]
fn log1mexp_examples() {
    let l2 = 2f64.ln();
    assert!((log1mexp(-l2).unwrap() + l2).abs() < 1e-16);
    assert!(rel_err(log1mexp(-50.0).unwrap(), -(-50f64).exp()) < 1e-15);
    assert!(rel_err(log1mexp(-0.1).unwrap(), -2.352_168_461_044_090_6) < 1e-15);
    assert!(log1mexp(0.5).is_err());
}

proptest! {
    #[test]
    fn cdf_and_sf_are_complementary(x in -30.0f64..30.0) {
        prop_assert!((std_normal_cdf(x) + std_normal_sf(x) - 1.0).abs() < 1e-15);
        prop_assert_eq!(std_normal_sf(x), std_normal_cdf(-x));
    }

    #[test]
    fn quantile_round_trip(p in 1e-12f64..0.999_999) {
        let z = std_normal_quantile(p).unwrap();
        prop_assert!(rel_err(std_normal_cdf(z), p) < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_shift_equivariant(xs in prop::collection::vec(-50.0f64..50.0, 1..20), c in -500.0f64..500.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((log_sum_exp(&shifted) - log_sum_exp(&xs) - c).abs() < 1e-9);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(log_sum_exp(&xs) >= max);
    }

    #[test]
    fn log_add_exp_matches_direct(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        prop_assert!(rel_err(log_add_exp(a, b), (a.exp() + b.exp()).ln()) < 1e-14);
    }
}
