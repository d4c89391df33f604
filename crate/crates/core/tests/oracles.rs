mod common {
    pub mod oracles;
}

use common::oracles::*;

#[test]
fn truncation_bounds_hold_on_random_triples() {
    let st = truncation_suite(20_000, 11);
    assert!(st.two_sided_violation <= 1e-12, "{}", st.two_sided_violation);
    assert!(st.subspace_violation <= 1e-12, "{}", st.subspace_violation);
}

#[test]
fn householder_reflects_exactly() {
    let (qx, gram) = householder_suite(2_000, 5);
    assert!(qx <= 1e-12 && gram <= 1e-12, "{qx} {gram}");
}

#[test]
fn ortho_basis_has_equal_first_coordinates() {
    let (first, gram) = ortho_basis_suite(2..=64);
    assert!(first <= 1e-10 && gram <= 1e-10, "{first} {gram}");
}

#[test]
fn jacobi_oracle_agrees_on_known_spectra() {
    let m = spca_core::SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let ev = jacobi_eigenvalues(&m);
    assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
}

#[test]
fn eigensolver_matches_jacobi_up_to_dimension_six() {
    let worst = eig_vs_jacobi(600, 3);
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn baselines_match_naive_transcriptions() {
    assert_eq!(baseline_mismatches(100, 17), 0);
}

#[test]
fn matrix_free_iterates_match_dense() {
    let worst = matrix_free_vs_dense(50, 400, 8, 15, 2);
    assert!(worst <= 1e-10, "{worst}");
}
