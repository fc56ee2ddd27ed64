use std::fs;
use std::path::Path;

use serde::Deserialize;

use sectorcast::diagnose::{anderson_darling, qq_csv, qq_points, residual_csv, residual_diagnostics, shapiro_wilk};
use sectorcast::regress::{fit_spec, ModelSpec, TermId};
use sectorcast::synth;
use sectorcast::Error;

#[derive(Deserialize)]
struct Golden {
    name: String,
    n: usize,
    sw_w: f64,
    sw_p: f64,
    ad_a2: f64,
    ad_p: f64,
}

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/normality"))
}

fn load(name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(fixtures().join(format!("{name}.csv"))).unwrap();
    rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect()
}

#[test]
fn golden_fixtures_within_tolerance() {
    let golden: Vec<Golden> = serde_json::from_str(&fs::read_to_string(fixtures().join("expected.json")).unwrap()).unwrap();
    assert_eq!(golden.len(), 7);
    for g in golden {
        let x = load(&g.name);
        assert_eq!(x.len(), g.n);
        let sw = shapiro_wilk(&x).unwrap();
        let ad = anderson_darling(&x).unwrap();
        assert!((sw.statistic - g.sw_w).abs() < 1e-6, "{}: W {} vs {}", g.name, sw.statistic, g.sw_w);
        assert!((sw.p_value - g.sw_p).abs() < 1e-4, "{}: SW p {} vs {}", g.name, sw.p_value, g.sw_p);
        assert!((ad.statistic - g.ad_a2).abs() < 1e-6, "{}: A2 {} vs {}", g.name, ad.statistic, g.ad_a2);
        assert!((ad.p_value - g.ad_p).abs() < 1e-4, "{}: AD p {} vs {}", g.name, ad.p_value, g.ad_p);
    }
}

#[test]
fn normal_sample_is_not_rejected_and_skewed_is() {
    let normal = load("normal_100");
    let exp = load("exponential_100");
    assert!(shapiro_wilk(&normal).unwrap().p_value > 0.05);
    assert!(anderson_darling(&normal).unwrap().p_value > 0.05);
    assert!(shapiro_wilk(&exp).unwrap().p_value < 0.001);
    assert!(anderson_darling(&exp).unwrap().p_value < 0.001);
}

#[test]
fn size_limits() {
    assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::SampleSizeOutOfRange { .. })));
    assert!(matches!(shapiro_wilk(&[3.0; 10]), Err(Error::DegenerateSample)));
    let big: Vec<f64> = (0..5001).map(|i| (i as f64).sin()).collect();
    assert!(matches!(shapiro_wilk(&big), Err(Error::SampleSizeOutOfRange { .. })));
}

#[test]
fn qq_pairs_are_sorted_and_symmetric() {
    let x = load("normal_50");
    let qq = qq_points(&x).unwrap();
    assert_eq!(qq.len(), 50);
    assert!(qq.windows(2).all(|w| w[0].theoretical < w[1].theoretical && w[0].sample <= w[1].sample));
    assert!((qq[0].theoretical + qq[49].theoretical).abs() < 1e-12);
    let csv = qq_csv(&qq);
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("theoretical,sample\n"));
}

#[test]
fn residual_report_of_intercept_model() {
    let data = synth::training_set(80, 1.0, 4, |z| z[0]);
    let spec = ModelSpec::new([TermId::Main(1)]).unwrap();
    let fit = fit_spec(&data, &spec).unwrap();
    let report = residual_diagnostics(&fit).unwrap();
    assert_eq!(report.n, 80);
    assert!(report.sum_residual.abs() < 1e-10);
    assert!(report.shapiro.p_value > 0.01);
    assert_eq!(report.residual_vs_fitted.len(), 80);
    let csv = residual_csv(&report.residual_vs_fitted);
    assert_eq!(csv.lines().count(), 81);
}

#[test]
fn exact_fit_has_near_zero_residuals() {
    let data = synth::training_set(40, 0.0, 5, |z| 2.0 + z[0] - z[1] + 1e-9 * z[2].sin());
    let spec = ModelSpec::new([TermId::Main(1), TermId::Main(2)]).unwrap();
    let fit = fit_spec(&data, &spec).unwrap();
    assert!(fit.residuals.iter().all(|e| e.abs() < 1e-8));
    let report = residual_diagnostics(&fit).unwrap();
    assert!(report.residual_vs_fitted.iter().all(|p| p.residual.abs() < 1e-8));
}
