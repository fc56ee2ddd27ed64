use nalgebra::DMatrix;
use proptest::prelude::*;

use sectorcast::regress::{build_design, fit_ols, fit_spec, FittedModel, ModelDocument, ModelSpec, TermId};
use sectorcast::synth;
use sectorcast::{Error, ScalerParams};

fn normal_equation_oracle(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let xt = x.transpose();
    let xtx = &xt * x;
    let xty = &xt * DMatrix::from_column_slice(y.len(), 1, y);
    xtx.lu().solve(&xty).unwrap().column(0).iter().copied().collect()
}

#[test]
fn spec_examples() {
    // y = 1 + 2x exactly.
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
    let fit = fit_ols(&x, &[1.0, 3.0, 5.0]).unwrap();
    assert!((fit.coefficients[0] - 1.0).abs() < 1e-12 && (fit.coefficients[1] - 2.0).abs() < 1e-12);
    assert!(fit.sse < 1e-20);

    let dup = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 4.0, 8.0]);
    assert!(matches!(fit_ols(&dup, &[1.0, 2.0, 3.0, 5.0]), Err(Error::RankDeficient { .. })));

    let tall = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    assert!(matches!(fit_ols(&tall, &[1.0, 2.0]), Err(Error::InsufficientObservations { .. })));
}

#[test]
fn full_design_has_56_columns() {
    let data = synth::training_set(80, 0.1, 1, |z| z[0]);
    let x = build_design(data.features(), &ModelSpec::full());
    assert_eq!(x.ncols(), 56);
    assert_eq!(ModelSpec::full().len(), 55);
    let z = &data.features()[3];
    assert_eq!(x[(3, 11)], z[0] * z[1]);
    assert_eq!(x[(3, 55)], z[8] * z[9]);
}

#[test]
fn interaction_model_inference() {
    let data = synth::training_set(150, 0.2, 2, synth::planted_index_signal);
    let spec: ModelSpec = serde_json::from_str(r#"["X3","X5","X7","X10","X5:X7"]"#).unwrap();
    let fit = fit_spec(&data, &spec).unwrap();
    assert_eq!(fit.n_params, 6);
    assert!((fit.coefficients[5] - -0.3).abs() < 0.05, "{:?}", fit.coefficients);
    assert!(fit.p_values[5] < 1e-6);
    assert!((fit.sigma2 - fit.sse / (150.0 - 6.0)).abs() < 1e-12);
    let lev: f64 = fit.leverage.iter().sum();
    assert!((lev - 6.0).abs() < 1e-8);
}

#[test]
fn model_document_roundtrip() {
    let data = synth::training_set(60, 0.1, 3, |z| 1.0 + z[0] - z[1] * z[2]);
    let spec = ModelSpec::new([TermId::Main(1), TermId::Main(2), TermId::Main(3), TermId::Interaction(2, 3)]).unwrap();
    let est = fit_spec(&data, &spec).unwrap();
    let model = FittedModel::from_estimate(spec, est, ScalerParams::identity(), synth::price_transform());
    let text = serde_json::to_string_pretty(&model.to_document("fitted", None)).unwrap();
    let doc: ModelDocument = serde_json::from_str(&text).unwrap();
    let back = FittedModel::from_document(&doc).unwrap();
    assert_eq!(back, model);
}

proptest! {
    #[test]
    fn qr_matches_normal_equations_and_residuals_are_orthogonal(seed in 0u64..10_000, n in 8usize..40) {
        let data = synth::training_set(n, 0.5, seed, |z| 0.3 + z[0] - 0.5 * z[1] * z[2]);
        let spec = ModelSpec::new([TermId::Main(1), TermId::Main(2), TermId::Interaction(2, 3)]).unwrap();
        let x = build_design(data.features(), &spec);
        let fit = fit_ols(&x, data.response()).unwrap();
        let oracle = normal_equation_oracle(&x, data.response());
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
        for j in 0..x.ncols() {
            let dot: f64 = x.column(j).iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-9 * (n as f64));
        }
        prop_assert!(fit.r_squared >= 0.0 && fit.r_squared <= 1.0);
        prop_assert!(fit.adj_r_squared <= fit.r_squared + 1e-15);
        prop_assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn term_text_roundtrip(i in 1usize..=10, j in 1usize..=10) {
        let t = if i == j { TermId::main(i).unwrap() } else { TermId::interaction(i, j).unwrap() };
        prop_assert_eq!(t.to_string().parse::<TermId>().unwrap(), t);
    }
}
