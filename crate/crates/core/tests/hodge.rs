use proptest::prelude::*;
use rand::Rng;
use torsionlab_core::hodge::{self, GradedComplex, MetricFamily, SpectralSet};
use torsionlab_core::linalg::{self, CMat, CVec};
use torsionlab_core::random;

fn instance(seed: u64, len: usize, cap: usize, cond: f64) -> (GradedComplex, MetricFamily) {
    let mut rng = random::case_rng(seed, 0);
    let dims: Vec<usize> = (0..len).map(|_| rng.random_range(0..=cap)).collect();
    let ranks = random::random_ranks(&mut rng, &dims);
    let cx = random::complex_with_ranks(&mut rng, &dims, &ranks, cond).unwrap();
    let h = random::metric(&mut rng, &dims, cond).unwrap();
    (cx, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projectors_decompose_identity(seed in any::<u64>(), len in 2usize..=5) {
        let (cx, h) = instance(seed, len, 8, 10.0);
        let hd = hodge::hodge_decompose(&cx, &h).unwrap();
        let (ph, pi, pc) = (hd.harmonic_projector(), hd.image_projector(), hd.coimage_projector());
        let n = cx.total_dim();
        prop_assert!(linalg::max_abs(&(&ph + &pi + &pc - linalg::eye(n))) < 1e-10);
        let ht = h.total();
        for p in [&ph, &pi, &pc] {
            prop_assert!(linalg::max_abs(&(p * p - p)) < 1e-10);
            // h-self-adjoint
            prop_assert!(linalg::max_abs(&(&ht * p - p.adjoint() * &ht)) < 1e-9);
        }
        prop_assert!(linalg::max_abs(&(&ph * &pi)) < 1e-10);
        prop_assert!(linalg::max_abs(&(&pi * &pc)) < 1e-10);
        // the image of ∂ is what the image projector fixes
        let d = cx.total_diff();
        prop_assert!(linalg::max_abs(&(&pi * &d - &d)) < 1e-9 * linalg::max_abs(&d).max(1.0));
    }

    #[test]
    fn betti_numbers_agree(seed in any::<u64>(), len in 1usize..=5) {
        let (cx, h) = instance(seed, len, 8, 10.0);
        let hd = hodge::hodge_decompose(&cx, &h).unwrap();
        prop_assert_eq!(&hd.betti, &hodge::betti_by_rank(&hd));
        let euler: i64 = hd.betti.iter().enumerate().map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) }).sum();
        prop_assert_eq!(euler, cx.euler_characteristic());
    }

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>(), len in 2usize..=5) {
        let (cx, h) = instance(seed, len, 6, 30.0);
        let adj = hodge::adjoint(&cx, &h).unwrap();
        // the adjoint of ∂*_k: W^{k+1} → W^k is h_{k+1}^{-1} (∂*_k)† h_k
        for (k, a) in adj.iter().enumerate() {
            let back = linalg::inverse(&h.mats()[k + 1]).unwrap() * a.adjoint() * &h.mats()[k];
            let d = &cx.diff()[k];
            prop_assert!(linalg::max_abs(&(back - d)) <= 1e-12 * linalg::max_abs(d).max(1.0) * 30.0);
        }
        // on the dual complex with inverse metrics, ∂* is ∂ conjugated by the metrics
        let dual = cx.dual();
        let inv = h.inverse().unwrap();
        let rev = MetricFamily::new(inv.mats().iter().rev().cloned().collect()).unwrap();
        let dadj = hodge::adjoint(&dual, &rev).unwrap();
        let n = cx.len();
        for k in 0..n - 1 {
            let j = n - 2 - k;
            let expect = &h.mats()[j + 1] * &cx.diff()[j] * linalg::inverse(&h.mats()[j]).unwrap();
            let got = dadj[k].clone();
            prop_assert!(linalg::max_abs(&(got - &expect)) < 1e-9 * linalg::max_abs(&expect).max(1.0));
        }
    }

    #[test]
    fn laplacian_spectrum_is_h_self_adjoint(seed in any::<u64>(), len in 2usize..=4) {
        let (cx, h) = instance(seed, len, 6, 10.0);
        let hd = hodge::hodge_decompose(&cx, &h).unwrap();
        let ht = h.total();
        let dirac = hd.total_dirac(&cx);
        prop_assert!(linalg::max_abs(&(&ht * &dirac - dirac.adjoint() * &ht)) < 1e-9 * linalg::max_abs(&dirac).max(1.0) * 10.0);
        let lap = hd.total_laplacian();
        prop_assert!(linalg::max_abs(&(&dirac * &dirac - &lap)) < 1e-9 * linalg::max_abs(&lap).max(1.0));
    }
}

#[test]
fn zero_dimensional_degrees_are_allowed() {
    let cx = GradedComplex::new(vec![2, 0, 1], vec![linalg::zeros(0, 2), linalg::zeros(1, 0)]).unwrap();
    let h = MetricFamily::identity(cx.dims());
    let hd = hodge::hodge_decompose(&cx, &h).unwrap();
    assert_eq!(hd.betti, vec![2, 0, 1]);
    assert!(linalg::max_abs(&(hd.harmonic_projector() - linalg::eye(3))) < 1e-14);
}

#[test]
fn kernel_threshold_is_scale_relative() {
    let small = |x: f64| {
        let cx = GradedComplex::two_term(CMat::from_element(1, 1, linalg::c(x)));
        hodge::hodge_decompose(&cx, &MetricFamily::identity(&[1, 1])).unwrap().betti
    };
    // a lone eigenvalue is judged against 1 when everything is tiny
    assert_eq!(small(1e-3), vec![0, 0]);
    assert_eq!(small(1e-6), vec![1, 1]);
    let mixed = CMat::from_fn(2, 2, |i, j| linalg::c(if i != j { 0.0 } else if i == 0 { 1.0 } else { 1e-6 }));
    let hd = hodge::hodge_decompose(&GradedComplex::two_term(mixed), &MetricFamily::identity(&[2, 2])).unwrap();
    assert_eq!(hd.betti, vec![1, 1]);
}

#[test]
fn spectral_projector_of_interval() {
    let d = CMat::from_fn(2, 2, |i, j| linalg::c(if i == j { (i + 1) as f64 } else { 0.0 }));
    let cx = GradedComplex::two_term(d);
    let hd = hodge::hodge_decompose(&cx, &MetricFamily::identity(&[2, 2])).unwrap();
    // eigenvalues 1 and 4 in both degrees
    let p = hd.spectral_projector(&SpectralSet::Interval(0.0, 2.0));
    assert!((p.trace().re - 2.0).abs() < 1e-12);
    let p = hd.spectral_projector(&SpectralSet::Points(vec![4.0]));
    assert!((p.trace().re - 2.0).abs() < 1e-12);
}

fn norm2(h: &CMat, x: &CVec) -> f64 {
    hodge::inner(h, x, x).re
}

#[test]
fn projection_estimates_never_fail() {
    let (mut naive_hyp, mut refined_hyp) = (0, 0);
    for i in 0..1000u64 {
        let mut rng = random::case_rng(77, i);
        let len = rng.random_range(2..=4);
        let dims: Vec<usize> = (0..len).map(|_| rng.random_range(1..=4)).collect();
        let ranks = random::random_ranks(&mut rng, &dims);
        let cx = random::complex_with_ranks(&mut rng, &dims, &ranks, 10.0).unwrap();
        let h = random::metric(&mut rng, &dims, 10.0).unwrap();
        let hd = hodge::hodge_decompose(&cx, &h).unwrap();
        let n = cx.total_dim();
        let ht = h.total();
        let (lo, hi) = hd.nonzero_range().unwrap_or((1.0, 1.0));
        // bias w towards the low spectrum so the hypotheses are met often
        let cut = lo * (hi / lo).powf(rng.random::<f64>());
        let low = hd.spectral_projector(&SpectralSet::Interval(0.0, cut));
        let x = random::complex_gaussian(&mut rng, n, 1).column(0).into_owned();
        let y = random::complex_gaussian(&mut rng, n, 1).column(0).into_owned();
        let w: CVec = &low * &x + &y * linalg::c(rng.random_range(0.0..0.3));
        let v: CVec = &w + y * linalg::c(rng.random_range(0.0..0.1));
        let dirac = hd.total_dirac(&cx);
        let d = cx.total_diff();
        let dstar = &dirac - &d;
        let s = 10f64.powf(rng.random_range(-0.5..0.5));

        let beta = cut;
        let alpha = s * norm2(&ht, &(&dirac * &w)) / beta;
        let est = hodge::check_projection_estimates(&cx, &hd, &h, &w, &v, alpha, beta, cut);
        assert!(est.consistent(), "case {i}: {est:?}");
        naive_hyp += est.naive.hypothesis as usize;

        let gamma = cut;
        let alpha = s * norm2(&ht, &(&d * &w)).max(norm2(&ht, &(&dstar * &v))) / gamma;
        let beta = s * norm2(&ht, &(&w - &v));
        let est = hodge::check_projection_estimates(&cx, &hd, &h, &w, &v, alpha, beta, gamma);
        assert!(est.consistent(), "case {i}: {est:?}");
        refined_hyp += est.refined_w.hypothesis as usize;
    }
    assert!(naive_hyp > 200 && refined_hyp > 200, "{naive_hyp} {refined_hyp}");
}
