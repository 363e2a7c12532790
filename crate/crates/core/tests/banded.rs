use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torsionlab_core::banded::BandedHermitian;
use torsionlab_core::linalg::{herm_eigvals, CVec, C64};

fn random_band(n: usize, p: usize, seed: u64, complex: bool) -> BandedHermitian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Vec::new();
    for i in 0..n {
        for k in 0..=p.min(i) {
            let im = if complex && k > 0 { rng.random::<f64>() - 0.5 } else { 0.0 };
            e.push((i, i - k, C64::new(2.0 * rng.random::<f64>() - 1.0, im)));
        }
    }
    BandedHermitian::from_lower_entries(n, &e).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn bisection_matches_dense(n in 2usize..40, p in 0usize..5, seed in 0u64..1000, complex in any::<bool>()) {
        let a = random_band(n, p, seed, complex);
        let dense = herm_eigvals(&a.to_dense());
        let band = a.eigenvalues_by_index(0, n);
        for (x, y) in dense.iter().zip(&band) {
            prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn inverse_iteration_gives_eigenvectors(n in 4usize..40, p in 1usize..4, seed in 0u64..1000) {
        let a = random_band(n, p, seed, true);
        let (vals, vecs) = a.eigenpairs_in(-0.5, 0.5).unwrap();
        for (l, v) in vals.iter().zip(&vecs) {
            let r = a.matvec(v) - v * C64::new(*l, 0.0);
            prop_assert!(r.norm() < 1e-9, "residual {}", r.norm());
        }
    }
}

#[test]
fn zero_diagonal_tridiagonal_has_symmetric_spectrum_and_kernel() {
    // path graph incidence operator: singular values 2 sin(kπ/(2n))
    let n = 41;
    let e: Vec<_> = (1..n).map(|i| (i, i - 1, C64::new(1.0, 0.0))).collect();
    let a = BandedHermitian::from_lower_entries(n, &e).unwrap();
    let v = a.eigenvalues_by_index(0, n);
    for k in 0..n {
        assert!((v[k] + v[n - 1 - k]).abs() < 1e-12);
    }
    assert!(v[n / 2].abs() < 1e-14);
    let (vals, vecs) = a.eigenpairs_in(-1e-8, 1e-8).unwrap();
    assert_eq!(vals.len(), 1);
    assert!(a.matvec(&vecs[0]).norm() < 1e-12);
}

#[test]
fn degenerate_cluster_is_orthonormalized() {
    let n = 30;
    let e: Vec<_> = (0..n).map(|i| (i, i, C64::new(if i < 3 { 0.0 } else { 1.0 + i as f64 }, 0.0))).collect();
    let a = BandedHermitian::from_lower_entries(n, &e).unwrap();
    let (vals, vecs) = a.eigenpairs_in(-0.5, 0.5).unwrap();
    assert_eq!(vals.len(), 3);
    for i in 0..3 {
        for j in 0..3 {
            let g = vecs[i].dotc(&vecs[j]).norm();
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}

#[test]
fn shifted_solve() {
    let a = random_band(25, 3, 7, true);
    let x = CVec::from_fn(25, |i, _| C64::new(i as f64, 1.0));
    let b = a.matvec(&x) - &x * C64::new(0.3, 0.0);
    let y = a.solve_shifted(0.3, &b).unwrap();
    assert!((y - x).norm() < 1e-9);
}
