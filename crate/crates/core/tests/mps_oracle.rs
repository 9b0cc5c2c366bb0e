mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmps_core::haar::{self, RngStream};
use rmps_core::linalg::{self, c, CMatrix};
use rmps_core::mps::{
    cp_apply, dense_transfer_matrix, sample_rmps, sample_rmps_stream, transfer_spectrum, Boundary, BoundaryKind, Mps,
    ObservableSpec, SiteSet,
};

#[test]
fn normalized_sample_matches_dense_norm() {
    let mps = sample_rmps_stream(6, 2, 3, BoundaryKind::Open, true, RngStream::new(1, 0));
    assert!((mps.norm_squared().unwrap() - 1.0).abs() < 1e-10);
    let psi = mps.dense_statevector().unwrap();
    assert!((psi.norm_squared() - 1.0).abs() < 1e-10);
}

#[test]
fn raw_norm_matches_dense_amplitudes() {
    let mut rng = RngStream::new(2, 0).rng();
    let site = haar::random_site(2, 2, &mut rng);
    let mps = Mps::new(4, Boundary::open_default(2), SiteSet::Homogeneous(site)).unwrap();
    let psi = mps.dense_statevector().unwrap();
    assert!((mps.norm_squared().unwrap() - psi.norm_squared()).abs() < 1e-10);
    // the raw sequential state is not unit norm in general
    assert!((psi.norm_squared() - 1.0).abs() > 1e-6);
}

#[test]
fn sigma_x_expectation_matches_dense() {
    let mps = sample_rmps_stream(6, 2, 3, BoundaryKind::Open, true, RngStream::new(3, 0));
    let obs = ObservableSpec::new(2, vec![linalg::pauli_x()]).unwrap();
    let psi = mps.dense_statevector().unwrap();
    let dense = dense_expectation(&psi, obs.ops(), 2, 6, 2);
    let got = mps.expectation(&obs).unwrap();
    assert!((got - dense).norm() < 1e-10);
    assert!(got.im.abs() < 1e-9);
}

#[test]
fn identity_observable_gives_one() {
    for boundary in [BoundaryKind::Open, BoundaryKind::Periodic] {
        let mps = sample_rmps_stream(5, 2, 3, boundary, true, RngStream::new(4, 1));
        let obs = ObservableSpec::new(1, vec![linalg::identity(2); 3]).unwrap();
        assert!((mps.expectation(&obs).unwrap() - c(1.0, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn product_state_expectation_is_local() {
    let mps = sample_rmps_stream(4, 2, 1, BoundaryKind::Open, false, RngStream::new(5, 2));
    for k in 0..4 {
        let a0 = mps.site(k).matrix(0)[(0, 0)];
        let a1 = mps.site(k).matrix(1)[(0, 0)];
        let local = a0.norm_sqr() - a1.norm_sqr();
        let norm = a0.norm_sqr() + a1.norm_sqr();
        let obs = ObservableSpec::new(k, vec![linalg::pauli_z()]).unwrap();
        assert!((mps.expectation(&obs).unwrap().re - local / norm).abs() < 1e-12);
    }
}

#[test]
fn periodic_state_matches_dense() {
    let mps = sample_rmps_stream(5, 2, 3, BoundaryKind::Periodic, false, RngStream::new(6, 0));
    let psi = mps.dense_statevector().unwrap();
    assert!((psi.norm_squared() - 1.0).abs() < 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ops = vec![random_hermitian(&mut rng, 2), random_hermitian(&mut rng, 2)];
    let obs = ObservableSpec::new(3, ops.clone()).unwrap();
    let dense = dense_expectation(&psi, &ops, 3, 5, 2);
    assert!((mps.expectation(&obs).unwrap() - dense).norm() < 1e-10);
    let rho = mps.reduced_density_matrix(1, 2).unwrap();
    assert!(max_dev(&rho, &partial_trace(&psi, 1, 2, 5, 2)) < 1e-10);
}

#[test]
fn rdm_matches_partial_trace() {
    let mps = sample_rmps_stream(6, 2, 3, BoundaryKind::Open, true, RngStream::new(7, 0));
    let psi = mps.dense_statevector().unwrap();
    for (start, len) in [(0, 2), (2, 2), (4, 2), (1, 3), (5, 1)] {
        let rho = mps.reduced_density_matrix(start, len).unwrap();
        assert!(max_dev(&rho, &partial_trace(&psi, start, len, 6, 2)) < 1e-10, "{start},{len}");
    }
}

#[test]
fn rdm_is_a_density_matrix_over_many_samples() {
    for s in 0..100 {
        let mps = sample_rmps_stream(7, 2, 4, BoundaryKind::Open, s % 2 == 0, RngStream::new(8, s));
        let rho = mps.reduced_density_matrix(3, 2).unwrap();
        assert!(linalg::hermitian_defect(&rho) < 1e-10);
        assert!((linalg::trace(&rho) - c(1.0, 0.0)).norm() < 1e-10);
        let ev = linalg::hermitian_eigenvalues(&rho).unwrap();
        assert!(ev[0] >= -1e-10);
    }
}

#[test]
fn cp_apply_matches_dense_transfer_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let site = haar::random_site(2, 2, &mut rng);
        let op = random_complex_matrix(&mut rng, 2);
        let x = random_complex_matrix(&mut rng, 2);
        let lhs = linalg::vec_cols(&cp_apply(&x, &op, &site).unwrap());
        let rhs = dense_transfer_matrix(Some(&op), &site) * linalg::vec_cols(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}

#[test]
fn transfer_spectrum_matches_dense_oracle() {
    for s in 0..10 {
        let mut rng = RngStream::new(10, s).rng();
        let site = haar::random_site(2, 2, &mut rng);
        let implicit = transfer_spectrum(&site, 4).unwrap();
        let dense = linalg::general_eigenvalues(&dense_transfer_matrix(None, &site)).unwrap();
        for (a, b) in implicit.eigenvalues.iter().zip(&dense) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
        for a in &implicit.eigenvalues {
            assert!(dense.iter().any(|b| (a - b).norm() < 1e-8));
        }
    }
}

#[test]
fn larger_transfer_spectrum_has_unit_radius() {
    let mut rng = RngStream::new(11, 0).rng();
    let site = haar::random_site(2, 12, &mut rng);
    assert!(site.isometry_defect() < 1e-10);
    let spec = transfer_spectrum(&site, 4).unwrap();
    assert!((spec.leading() - c(1.0, 0.0)).norm() < 1e-8);
    assert!(spec.second_modulus().unwrap() < 1.0);
}

fn random_observable<R: Rng>(rng: &mut R, n: usize) -> (usize, Vec<CMatrix>) {
    let len = rng.random_range(1..=n.min(3));
    let start = rng.random_range(0..=n - len);
    ((start), (0..len).map(|_| random_hermitian(rng, 2)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn contraction_matches_dense_oracle(seed in any::<u64>(), n in 1usize..=10, chi in 1usize..=4, homogeneous in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mps = sample_rmps(n, 2, chi, BoundaryKind::Open, homogeneous, &mut rng);
        let psi = mps.dense_statevector().unwrap();
        let (start, ops) = random_observable(&mut rng, n);
        let obs = ObservableSpec::new(start, ops.clone()).unwrap();
        let got = mps.expectation(&obs).unwrap();
        let want = dense_expectation(&psi, &ops, start, n, 2);
        prop_assert!((got - want).norm() < 1e-10);
        prop_assert!(got.im.abs() < 1e-9);
    }

    #[test]
    fn appending_identities_changes_nothing(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mps = sample_rmps(n, 2, 3, BoundaryKind::Open, true, &mut rng);
        let op = random_hermitian(&mut rng, 2);
        let start = rng.random_range(0..n - 1);
        let plain = mps.expectation(&ObservableSpec::new(start, vec![op.clone()]).unwrap()).unwrap();
        let padded = mps
            .expectation(&ObservableSpec::new(start, vec![op, linalg::identity(2)]).unwrap())
            .unwrap();
        prop_assert!((plain - padded).norm() < 1e-12);
    }
}
