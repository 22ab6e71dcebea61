mod common;

use common::fixtures::{spec, synthetic};
use common::rel_err;
use curefit::diagnostics::{
    case_deletion_influence, fit_residuals, flag_cases, generalized_cook_distance,
    relative_change, residuals_from_log_surv, InfluenceOptions,
};
use curefit::likelihood::{log_survival, ParamVector, SurvivalDataset};
use curefit::mle::{fit_mle, FitOptions, FitResult};
use curefit::regression::{DesignMatrices, Family};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit(data: &SurvivalDataset, family: Family) -> FitResult {
    fit_mle(data, &spec(family), None, &FitOptions::default()).unwrap()
}

#[test]
fn residual_hand_triples() {
    let r = residuals_from_log_surv(&[0.0, 0.0, -1.0, -1.0], &[true, false, true, false]).unwrap();
    assert_eq!(r.martingale, vec![1.0, 0.0, 0.0, -1.0]);
    assert_eq!(r.deviance[1], 0.0);
    assert_eq!(r.deviance[2], 0.0);
    assert_eq!(r.deviance[3], -(2f64.sqrt()));
    // r_M = 1 with an event: the deviance formula diverges.
    assert_eq!(r.deviance[0], f64::INFINITY);
    // Censored: r_D = sign(r_M)·√(−2 r_M).
    let r = residuals_from_log_surv(&[-0.5], &[false]).unwrap();
    assert_eq!(r.deviance[0], -1.0);
    assert!(residuals_from_log_surv(&[0.0], &[true, false]).is_err());
}

#[test]
fn fitted_residuals_use_the_model_survival() {
    let data = synthetic(Family::MoInverseGaussian, 300, 8);
    let f = fit(&data, Family::MoInverseGaussian);
    let r = fit_residuals(&f, &data).unwrap();
    let ls = log_survival(&f.theta_hat, &data).unwrap();
    for i in 0..data.len() {
        let d = f64::from(u8::from(data.events()[i]));
        assert_eq!(r.martingale[i], d + ls[i]);
        assert!(r.martingale[i] <= d);
        assert!(r.deviance[i].signum() * r.martingale[i].signum() >= 0.0);
    }
    // Martingale residuals of a well-fitting model sum to about zero.
    let total: f64 = r.martingale.iter().sum();
    assert!(total.abs() < 0.05 * data.len() as f64, "{total}");
}

proptest! {
    #[test]
    fn residual_contracts(ls in prop::collection::vec(-20.0f64..-1e-12, 1..50), ev in prop::collection::vec(any::<bool>(), 50)) {
        let ev = &ev[..ls.len()];
        let r = residuals_from_log_surv(&ls, ev).unwrap();
        for i in 0..ls.len() {
            let d = f64::from(u8::from(ev[i]));
            prop_assert!(r.martingale[i] <= d);
            prop_assert!(r.martingale[i] <= 1.0);
            let sm = r.martingale[i].partial_cmp(&0.0).unwrap();
            let sd = r.deviance[i].partial_cmp(&0.0).unwrap();
            prop_assert_eq!(sm, sd, "r_M = {}, r_D = {}", r.martingale[i], r.deviance[i]);
        }
    }

    #[test]
    fn deviance_grows_with_martingale_magnitude(a in -20.0f64..-1e-9, b in -20.0f64..-1e-9, ev in any::<bool>()) {
        let r = residuals_from_log_surv(&[a, b], &[ev, ev]).unwrap();
        let (ma, mb) = (r.martingale[0].abs(), r.martingale[1].abs());
        let (da, db) = (r.deviance[0].abs(), r.deviance[1].abs());
        if ev {
            // Monotone on each side of r_M = 0.
            prop_assume!(r.martingale[0].signum() == r.martingale[1].signum());
        }
        if ma < mb {
            prop_assert!(da <= db);
        } else if mb < ma {
            prop_assert!(db <= da);
        }
    }
}

#[test]
fn cook_distance_is_invariant_to_linear_maps() {
    let data = synthetic(Family::MoGompertz, 300, 4);
    let full = fit(&data, Family::MoGompertz);
    let dropped = fit(&data.without_row(0), Family::MoGompertz);
    let cov = full.covariance_internal.clone().unwrap();
    let (t, td) = (full.theta_hat.internal().to_vec(), dropped.theta_hat.internal().to_vec());
    let gd = generalized_cook_distance(&t, &td, &cov).unwrap();
    assert!(gd > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = t.len();
    let a = DMatrix::from_fn(k, k, |i, j| rng.random_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
    let map = |v: &[f64]| (&a * nalgebra::DVector::from_column_slice(v)).iter().copied().collect::<Vec<_>>();
    let cov2 = &a * &cov * a.transpose();
    let gd2 = generalized_cook_distance(&map(&t), &map(&td), &cov2).unwrap();
    assert!(rel_err(gd2, gd) < 1e-6, "{gd2} vs {gd}");
}

#[test]
fn influence_report_contracts() {
    let data = synthetic(Family::MoGompertz, 120, 10);
    let f = fit(&data, Family::MoGompertz);
    let opts = InfluenceOptions::default();
    let r = case_deletion_influence(&f, &data, &opts).unwrap();
    assert_eq!(r.gd.len(), data.len());
    assert!(r.failed.is_empty(), "{:?}", r.failed);
    assert!(r.gd.iter().flatten().all(|&g| g >= 0.0));
    assert!(r.ld.iter().flatten().all(|&l| l >= -1e-8));
    let (flagged, gt, lt) = flag_cases(&r.gd, &r.ld, f.n_params(), opts.gd_factor, opts.ld_quantile);
    assert_eq!((flagged, gt, lt), (r.flagged.clone(), r.gd_threshold, r.ld_threshold));

    // GD of row 3 agrees with a direct refit.
    let refit = fit_mle(&data.without_row(3), &f.spec, Some(&f.theta_hat), &FitOptions::default()).unwrap();
    let direct = generalized_cook_distance(
        f.theta_hat.internal(),
        refit.theta_hat.internal(),
        f.covariance_internal.as_ref().unwrap(),
    )
    .unwrap();
    assert!(rel_err(r.gd[3].unwrap(), direct) < 1e-3, "{:?} vs {direct}", r.gd[3]);
}

fn duplicated(data: &SurvivalDataset) -> SurvivalDataset {
    let rows: Vec<usize> = (0..data.len()).chain(0..data.len()).collect();
    data.select_rows(&rows)
}

#[test]
fn deleting_one_copy_of_a_duplicated_row_barely_moves_the_fit() {
    let data = synthetic(Family::Gompertz, 80, 12);
    let once = case_deletion_influence(&fit(&data, Family::Gompertz), &data, &InfluenceOptions::default()).unwrap();
    let twice_data = duplicated(&data);
    let twice = case_deletion_influence(&fit(&twice_data, Family::Gompertz), &twice_data, &InfluenceOptions::default()).unwrap();
    let mean_once = once.gd.iter().flatten().sum::<f64>() / data.len() as f64;
    for i in 0..data.len() {
        let (g1, g2) = (once.gd[i].unwrap(), twice.gd[i].unwrap());
        // Half the leverage of the single-copy case, to first order.
        assert!(g2 <= 0.75 * g1 + 1e-3 * mean_once, "row {i}: {g2} vs {g1}");
        assert!(twice.ld[i].unwrap() <= 0.75 * once.ld[i].unwrap() + 1e-3 * mean_once);
    }
}

#[test]
fn gross_outlier_has_the_largest_cook_distance() {
    let data = synthetic(Family::MoGompertz, 100, 14);
    let max_t = data.times().iter().copied().fold(0.0, f64::max);
    let i = (0..data.len()).find(|&i| data.events()[i]).unwrap();
    let mut t = data.times().to_vec();
    t[i] = 20.0 * max_t;
    let x: &DesignMatrices = data.design();
    let bad = SurvivalDataset::new(t, data.events().to_vec(), x.clone()).unwrap();
    let f = fit(&bad, Family::MoGompertz);
    let r = case_deletion_influence(&f, &bad, &InfluenceOptions::default()).unwrap();
    let argmax = (0..bad.len()).max_by(|&a, &b| r.gd[a].unwrap_or(0.0).total_cmp(&r.gd[b].unwrap_or(0.0))).unwrap();
    assert_eq!(argmax, i);
    assert!(r.flagged.contains(&i));
}

#[test]
fn relative_changes() {
    let data = synthetic(Family::Gompertz, 200, 3);
    let f = fit(&data, Family::Gompertz);
    for rc in relative_change(&f, &f).unwrap() {
        assert_eq!((rc.rc_theta, rc.rc_se), (Some(0.0), Some(0.0)));
    }
    let mut full = f.clone();
    let mut dropped = f.clone();
    let mut v = f.estimates();
    v[0] = 2.0;
    full.theta_hat = ParamVector::from_natural_slice(f.spec, &v).unwrap();
    v[0] = 1.5;
    dropped.theta_hat = ParamVector::from_natural_slice(f.spec, &v).unwrap();
    let rc = relative_change(&full, &dropped).unwrap();
    assert_eq!(rc[0].rc_theta, Some(25.0));
    v[0] = 0.0;
    full.theta_hat = ParamVector::from_natural_slice(f.spec, &v).unwrap();
    assert_eq!(relative_change(&full, &dropped).unwrap()[0].rc_theta, None);

    let other = fit(&synthetic(Family::MoGompertz, 200, 3), Family::MoGompertz);
    assert!(relative_change(&f, &other).is_err());
}

#[test]
fn influence_needs_a_usable_fit() {
    let data = synthetic(Family::Gompertz, 60, 3);
    let mut f = fit(&data, Family::Gompertz);
    f.covariance_internal = None;
    assert!(case_deletion_influence(&f, &data, &InfluenceOptions::default()).is_err());
    let mut f = fit(&data, Family::Gompertz);
    f.converged = false;
    assert!(case_deletion_influence(&f, &data, &InfluenceOptions::default()).is_err());
}
