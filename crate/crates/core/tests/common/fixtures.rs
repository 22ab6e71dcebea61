//! Synthetic datasets built with the library's generator. These are inputs,
//! not oracles.

use curefit::likelihood::{ModelSpec, ParamVector, SurvivalDataset};
use curefit::regression::{Family, RegressionCoefficients};
use curefit::simulation::{generate_dataset, mo_gompertz_truth, mo_ig_truth, SimConfig};

pub fn truth(family: Family) -> RegressionCoefficients {
    let t = match family.marshall_olkin() {
        Family::MoInverseGaussian => mo_ig_truth(),
        _ => mo_gompertz_truth(),
    };
    if family.is_marshall_olkin() {
        t
    } else {
        RegressionCoefficients::new(t.a, t.b, None).unwrap()
    }
}

pub fn sim_config(family: Family, n: usize, seed: u64) -> SimConfig {
    SimConfig {
        family,
        truth: truth(family),
        n,
        replicates: 1,
        seed,
    }
}

pub fn synthetic(family: Family, n: usize, seed: u64) -> SurvivalDataset {
    generate_dataset(&sim_config(family, n, seed), 0).unwrap()
}

pub fn spec(family: Family) -> ModelSpec {
    ModelSpec::new(family, 3, 3).unwrap()
}

pub fn truth_params(family: Family) -> ParamVector {
    ParamVector::from_coefficients(spec(family), &truth(family)).unwrap()
}

/// The colon export with node4 in both links, when COLON_CSV is set.
pub fn colon() -> Option<SurvivalDataset> {
    let cols = curefit::io::ColumnSpec {
        alpha_covariates: vec!["node4".into()],
        beta_covariates: vec!["node4".into()],
        ..Default::default()
    };
    super::colon_csv().map(|p| curefit::io::load_dataset(p, &cols).unwrap())
}
