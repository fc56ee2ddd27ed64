use sectorcast::refmodel::{predict_published, published_spec, table3_fixtures, COEFFICIENTS, INTERCEPT};
use sectorcast::regress::TermId;

#[test]
fn published_structure() {
    let m = published_spec();
    let spec = m.spec();
    assert_eq!(spec.len(), 19);
    assert_eq!(spec.terms().filter(|t| t.is_interaction()).count(), 9);
    assert_eq!(m.coefficient(TermId::Interaction(5, 7)), Some(-0.6059));
    assert_eq!(m.coefficient(TermId::Main(10)), Some(0.6781));
    assert_eq!(m.coefficient(TermId::Interaction(1, 2)), None);
    assert_eq!(COEFFICIENTS.len(), 19);
    // Every interaction's mains are present.
    for t in spec.terms() {
        if let TermId::Interaction(i, j) = t {
            assert!(spec.contains(TermId::Main(i)) && spec.contains(TermId::Main(j)));
        }
    }
}

#[test]
fn zero_vector_prediction() {
    let z = [0.0; 10];
    assert_eq!(published_spec().transformed(&z), INTERCEPT);
    assert!((predict_published(&z).unwrap() - 1179.0381122573563).abs() < 1e-9);
}

#[test]
fn unit_x10_prediction() {
    // t = 0.0732 + 0.6781 = 0.7513
    let mut z = [0.0; 10];
    z[9] = 1.0;
    assert!((published_spec().transformed(&z) - 0.7513).abs() < 1e-15);
    assert!((predict_published(&z).unwrap() - 1328.4630590365277).abs() < 1e-9);
}

#[test]
fn fitted_form_agrees() {
    let fitted = published_spec().to_fitted();
    let z = [0.3, -1.0, 0.5, 0.2, 1.1, -0.4, 0.9, 0.0, -0.2, 1.5];
    assert!((fitted.predict_price(&z).unwrap() - predict_published(&z).unwrap()).abs() < 1e-9);
    assert!(predict_published(&[f64::NAN; 10]).is_err());
}

#[test]
fn table3_has_thirty_pairs() {
    let t = table3_fixtures();
    assert_eq!(t.len(), 30);
    assert!(t.iter().all(|p| p.observed > 0.0 && p.predicted > 0.0));
}
