mod common;

use std::fs;

use common::fixtures::{colon, synthetic};
use curefit::io::{load_dataset, read_dataset, write_dataset, ColumnSpec};
use curefit::km::KaplanMeier;
use curefit::mle::{fit_mle, FitOptions};
use curefit::regression::Family;
use curefit::report::{km_overlay, run_fit, EngineChoice, RunConfig, RunStatus};
use curefit::likelihood::ModelSpec;

fn cols(alpha: &[&str], beta: &[&str]) -> ColumnSpec {
    ColumnSpec {
        alpha_covariates: alpha.iter().map(|s| s.to_string()).collect(),
        beta_covariates: beta.iter().map(|s| s.to_string()).collect(),
        ..ColumnSpec::default()
    }
}

fn read(text: &str, c: &ColumnSpec) -> curefit::Result<curefit::likelihood::SurvivalDataset> {
    read_dataset(text.as_bytes(), c)
}

#[test]
fn generated_data_round_trip() {
    let data = synthetic(Family::MoInverseGaussian, 250, 6);
    let mut buf = Vec::new();
    let c = write_dataset(&data, &mut buf).unwrap();
    assert_eq!(c, cols(&["x11", "x12"], &["x21", "x22"]));
    let back = read(std::str::from_utf8(&buf).unwrap(), &c).unwrap();
    assert_eq!(back, data);
}

#[test]
fn reading_errors() {
    let c = cols(&["x"], &["x"]);
    assert!(read("", &c).is_err());
    assert!(read("time,event,x\n", &c).is_err());
    let e = read("time,event,x\n1.0,1,0\n2.0,2,1\n", &c).unwrap_err().to_string();
    assert!(e.contains("line 3") && e.contains('2'), "{e}");
    let e = read("time,event,x\n1.0,1,0\n-2.0,0,1\n", &c).unwrap_err().to_string();
    assert!(e.contains("line 3") && e.contains("positive"), "{e}");
    let e = read("time,event,x\n0,1,0\n", &c).unwrap_err().to_string();
    assert!(e.contains("positive"), "{e}");
    let e = read("time,event,x\n1.0,1,\n", &c).unwrap_err().to_string();
    assert!(e.contains("line 2") && e.contains("missing"), "{e}");
    let e = read("time,event,x\n1.0,1,abc\n", &c).unwrap_err().to_string();
    assert!(e.contains("not numeric"), "{e}");
    let e = read("time,event\n1.0,1\n", &c).unwrap_err().to_string();
    assert!(e.contains("'x'"), "{e}");
    assert!(read("time,event,x\n1.0,1,0\n2.0,0\n", &c).is_err());
    assert!(load_dataset("/nonexistent/data.csv", &c).is_err());
}

#[test]
fn separate_covariates_per_link() {
    let d = read("event,time,a,b\n1,0.5,1,0.25\n0,1.5,0,0.75\n", &cols(&["a"], &["b"])).unwrap();
    assert_eq!(d.times(), &[0.5, 1.5]);
    assert_eq!(d.events(), &[true, false]);
    assert_eq!(d.design().x1()[(1, 1)], 0.0);
    assert_eq!(d.design().x2()[(0, 1)], 0.25);
    assert_eq!(d.design().n_alpha(), 2);
    let d = read("time,event\n1,1\n", &ColumnSpec::default()).unwrap();
    assert_eq!((d.design().n_alpha(), d.design().n_beta()), (1, 1));
}

#[test]
fn colon_export_summary() {
    let Some(d) = colon() else {
        eprintln!("COLON_CSV not set; skipping");
        return;
    };
    assert_eq!(d.len(), 929);
    assert!((100.0 * d.censoring_fraction() - 51.3455).abs() < 5e-5);
}

#[test]
fn kaplan_meier_examples() {
    let km = KaplanMeier::fit(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
    assert_eq!(km.eval(0.999), 1.0);
    assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((km.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((km.eval(2.999) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(km.eval(3.0), 0.0);

    let one = KaplanMeier::fit(&[5.0], &[true]).unwrap();
    assert_eq!((one.eval(4.999), one.eval(5.0)), (1.0, 0.0));

    let censored = KaplanMeier::fit(&[1.0, 4.0, 2.0], &[false, false, false]).unwrap();
    assert!([0.0, 1.0, 3.0, 10.0].iter().all(|&t| censored.eval(t) == 1.0));
    assert_eq!(censored.final_value(), 1.0);

    // Tied event and censoring at t = 2: the censored subject is at risk.
    let tied = KaplanMeier::fit(&[2.0, 2.0, 3.0, 4.0], &[true, false, true, false]).unwrap();
    assert!((tied.eval(2.0) - 0.75).abs() < 1e-15);
    assert!((tied.eval(3.0) - 0.375).abs() < 1e-15);
    assert!(KaplanMeier::fit(&[], &[]).is_err());
}

#[test]
fn overlay_curves_are_monotone_and_start_at_one() {
    let data = synthetic(Family::MoGompertz, 400, 2);
    // Continuous covariates give a single pooled stratum.
    let spec = ModelSpec::for_design(Family::MoGompertz, data.design());
    let fit = fit_mle(&data, &spec, None, &FitOptions::default()).unwrap();
    let overlay = km_overlay(&data, Some(&fit.theta_hat)).unwrap();
    assert_eq!(overlay.series.len(), 2);
    assert_eq!(overlay.series[0].stratum, "all");
    for s in &overlay.series {
        assert_eq!(s.points[0], (0.0, 1.0), "{} {}", s.stratum, s.kind);
        for w in s.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 <= w[0].1 + 1e-15, "{} {}: {:?}", s.stratum, s.kind, w);
        }
    }
}

#[test]
fn overlay_strata_follow_covariate_patterns() {
    let text = "time,event,g\n1,1,0\n2,0,0\n3,1,1\n4,1,1\n5,0,1\n";
    let d = read(text, &cols(&["g"], &[])).unwrap();
    let overlay = km_overlay(&d, None).unwrap();
    let labels: Vec<&str> = overlay.series.iter().map(|s| s.stratum.as_str()).collect();
    assert_eq!(labels, ["g=0", "g=1"]);
    assert!(overlay.series.iter().all(|s| s.kind == "km"));
    let want = [(0.0, 1.0), (3.0, 2.0 / 3.0), (4.0, 1.0 / 3.0)];
    let got = &overlay.series[1].points;
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!(g.0 == w.0 && (g.1 - w.1).abs() < 1e-15, "{got:?}");
    }
}

fn write_synthetic(dir: &std::path::Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("data.csv");
    let data = synthetic(Family::MoGompertz, n, 4);
    write_dataset(&data, fs::File::create(&path).unwrap()).unwrap();
    path
}

const TOP_KEYS: [&str; 11] = [
    "status", "family", "engine", "seed", "level", "data", "frequentist", "bayesian", "criteria",
    "influence", "warnings",
];
const CRITERIA_KEYS: [&str; 9] = [
    "aicc", "bic", "hqic", "caic", "lpml", "minus2_lpml", "dic", "waic", "minus2_waic",
];

#[test]
fn run_fit_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_synthetic(dir.path(), 300);
    let out = dir.path().join("out");
    let cfg = RunConfig {
        input,
        family: Family::MoGompertz,
        columns: cols(&["x11", "x12"], &["x21", "x22"]),
        engine: EngineChoice::Freq,
        out: out.clone(),
        ..RunConfig::default()
    };
    let r = run_fit(&cfg).unwrap();
    assert_eq!(r.report.status, RunStatus::Ok);
    for f in ["report.json", "residuals.csv", "influence.csv", "km_overlay.csv", "summary.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for k in TOP_KEYS {
        assert!(json.get(k).is_some(), "missing key {k}");
    }
    for k in CRITERIA_KEYS {
        assert!(json["criteria"].get(k).is_some(), "missing criteria key {k}");
    }
    assert!(json["bayesian"].is_null() && json["influence"].is_null() && json["criteria"]["dic"].is_null());
    assert!(json["criteria"]["aicc"].is_number());
    let f = &json["frequentist"];
    assert_eq!(f["parameters"].as_array().unwrap().len(), 7);
    assert!(f["lr_test"]["statistic"].as_f64().unwrap() >= 0.0);
    assert_eq!(f["restricted"]["family"], "gompertz");

    let residuals = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().next().unwrap(), "row,time,event,engine,martingale,deviance");
    assert_eq!(residuals.lines().count(), 301);
    let overlay = fs::read_to_string(out.join("km_overlay.csv")).unwrap();
    assert_eq!(overlay.lines().next().unwrap(), "stratum,series,time,survival");
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("Maximum likelihood"));

    // Same input and seed: byte-identical report.
    let again = dir.path().join("again");
    run_fit(&RunConfig { out: again.clone(), ..cfg }).unwrap();
    assert_eq!(fs::read(out.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
}

#[test]
fn run_fit_with_both_engines_and_influence() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_synthetic(dir.path(), 150);
    let cfg = RunConfig {
        input,
        family: Family::Gompertz,
        columns: cols(&["x11"], &["x21"]),
        engine: EngineChoice::Both,
        iters: 3000,
        burnin: 500,
        influence: true,
        out: dir.path().join("out"),
        ..RunConfig::default()
    };
    let r = run_fit(&cfg).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    for k in CRITERIA_KEYS {
        assert!(json["criteria"][k].is_number(), "{k}");
    }
    assert!(json["bayesian"]["parameters"].is_array());
    assert!(json["frequentist"]["lr_test"].is_null());
    assert!(json["influence"]["flagged"].is_array());
    assert_eq!(r.residuals.len(), 2);
    let infl = fs::read_to_string(dir.path().join("out/influence.csv")).unwrap();
    assert_eq!(infl.lines().count(), 151);
}

#[test]
fn run_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_synthetic(dir.path(), 60);
    let base = RunConfig {
        input: input.clone(),
        columns: cols(&["x11"], &["x21"]),
        out: dir.path().join("out"),
        ..RunConfig::default()
    };
    assert!(run_fit(&RunConfig { input: "".into(), ..base.clone() }).is_err());
    assert!(run_fit(&RunConfig { level: 1.5, ..base.clone() }).is_err());
    assert!(run_fit(&RunConfig { engine: EngineChoice::Bayes, iters: 100, burnin: 100, ..base.clone() }).is_err());
    assert!(run_fit(&RunConfig { engine: EngineChoice::Bayes, influence: true, ..base.clone() }).is_err());
    assert!(run_fit(&RunConfig { columns: cols(&["nope"], &[]), ..base.clone() }).is_err());
    assert!(run_fit(&RunConfig { input: dir.path().join("missing.csv"), ..base }).is_err());
}

#[test]
fn short_chain_is_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_synthetic(dir.path(), 150);
    let cfg = RunConfig {
        input,
        family: Family::Gompertz,
        columns: cols(&["x11"], &["x21"]),
        engine: EngineChoice::Bayes,
        iters: 1100,
        burnin: 100,
        out: dir.path().join("out"),
        ..RunConfig::default()
    };
    assert_eq!(run_fit(&cfg).unwrap().report.status, RunStatus::Warning);
}
