use proptest::prelude::*;

use sectorcast::regress::{fit_spec, ModelSpec, TermId};
use sectorcast::select::{backward_eliminate, correlation_matrix, vif, vif_columns, EliminationOptions};
use sectorcast::synth;
use sectorcast::Error;

#[test]
fn planted_index_terms_survive_from_the_full_model() {
    let data = synth::training_set(160, 0.05, 21, synth::planted_index_signal);
    let (spec, trace) = backward_eliminate(&data, &ModelSpec::full(), &EliminationOptions::default()).unwrap();
    for t in ["X3", "X5", "X10", "X5:X7"] {
        assert!(spec.contains(t.parse().unwrap()), "{t} missing from {spec:?}");
    }
    // weak heredity keeps X7 because X5:X7 stays
    assert!(spec.contains(TermId::Main(7)));
    assert_eq!(trace.steps.len(), 55 - spec.len());
    assert!(trace.table().lines().count() >= trace.steps.len());
}

#[test]
fn unfittable_start_is_rejected() {
    let data = synth::training_set(40, 0.1, 1, |z| z[0]);
    assert!(matches!(
        backward_eliminate(&data, &ModelSpec::full(), &EliminationOptions::default()),
        Err(Error::UnfittableStart { .. })
    ));
}

#[test]
fn vif_matches_one_over_one_minus_r2() {
    let data = synth::index_dataset(300, 0.1, 5);
    let report = vif(&data).unwrap();
    assert_eq!(report.entries.len(), 10);
    // Independent synthetic indicators: VIFs near 1, none flagged.
    assert!(report.entries.iter().all(|e| e.vif >= 1.0 && e.vif < 1.2 && !e.flagged));

    let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos()).collect();
    let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
    assert!(matches!(vif_columns(&[a, b, c]), Err(Error::RankDeficient { .. })));
}

#[test]
fn correlation_matrix_is_symmetric_with_unit_diagonal() {
    let data = synth::index_dataset(100, 0.1, 8);
    let m = correlation_matrix(&data).unwrap();
    for i in 0..10 {
        assert!((m.values[i][i] - 1.0).abs() < 1e-12);
        for j in 0..10 {
            assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn elimination_invariants(seed in any::<u64>(), alpha in 0.01f64..0.2, heredity in any::<bool>()) {
        let data = synth::training_set(120, 0.3, seed, |z| 0.5 * z[0] + 0.4 * z[1] * z[2]);
        let start = ModelSpec::new(
            (1..=5).map(TermId::Main).chain([TermId::Interaction(2, 3), TermId::Interaction(1, 4), TermId::Interaction(4, 5)]),
        ).unwrap();
        let opts = EliminationOptions { alpha, heredity };
        let (spec, trace) = backward_eliminate(&data, &start, &opts).unwrap();
        prop_assert!(spec.is_subset(&start));
        prop_assert_eq!(trace.steps.len(), start.len() - spec.len());
        let mut current = start.clone();
        for step in &trace.steps {
            prop_assert!(current.contains(step.dropped));
            prop_assert!(step.p_value > alpha);
            current = current.without(step.dropped);
        }
        prop_assert_eq!(&current, &spec);
        // Every surviving term is significant or protected by an interaction.
        let fit = fit_spec(&data, &spec).unwrap();
        for (k, t) in spec.terms().enumerate() {
            let protected = heredity
                && matches!(t, TermId::Main(i) if spec.terms().any(|u| u.is_interaction() && u.involves(i as usize)));
            prop_assert!(fit.p_values[k + 1] <= alpha || protected);
        }
        // Same inputs, same answer.
        prop_assert_eq!(backward_eliminate(&data, &start, &opts).unwrap().0, spec);
    }
}
