use svperturb_web::{debias_view, perturbation_view, projector_view, MAX_DEMO_DIM};

#[test]
fn perturbation_view_respects_bounds_in_regime() {
    let v = perturbation_view(40, 30, "20, 12, 12, 5", 0.2, 2, 1).unwrap();
    assert_eq!(v.signal_singular_values[..4], [20.0, 12.0, 12.0, 5.0]);
    assert!(v.in_regime);
    assert!(v.deviation_norm <= v.deviation_bound);
    assert!(v.remainder_norm <= v.remainder_bound);
    assert!(v.max_eigenvalue_shift <= v.norm_gamma + 1e-9);
}

#[test]
fn projector_view_matches_contour() {
    let v = projector_view(8, 6, "4, 4, 2.5, 1", 3).unwrap();
    assert_eq!(v.clusters.len(), 3);
    assert_eq!(v.clusters[0].multiplicity, 2);
    assert_eq!(v.zero_multiplicity, 8 + 6 - 2 * 4);
    assert!(v.invariant_defect < 1e-10);
    assert!(v.clusters.iter().all(|c| c.contour_deviation < 1e-8));
}

#[test]
fn debias_view_reduces_alignment_error() {
    let v = debias_view(40, 2.3, 60, 0.25, 5).unwrap();
    assert_eq!(v.pairs, 60);
    assert!(v.mean_debiased_error.abs() < v.mean_naive_error.abs());
}

#[test]
fn oversized_or_malformed_input_is_rejected() {
    assert!(perturbation_view(MAX_DEMO_DIM, 1, "1", 0.1, 1, 0).is_err());
    assert!(projector_view(4, 4, "1, 2", 0).is_err());
    assert!(projector_view(4, 4, "a", 0).is_err());
    assert!(debias_view(20, 2.0, 5, 0.25, 0).is_err());
}
