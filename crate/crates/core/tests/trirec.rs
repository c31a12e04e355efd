mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;

use mathieu_sg::error::Error;
use mathieu_sg::trirec::{self, seq, TridiagonalSpec};

/// Nonsymmetric chain with positive coupling products.
fn chain(eps: f64, a0: f64, b0: f64, gamma: f64) -> TridiagonalSpec {
    TridiagonalSpec {
        lambda: seq(|j| (j * j) as f64 + 0.3 * j as f64),
        alpha: seq(move |j| a0 * (1.0 + 0.5 * (j as f64).sin().abs())),
        beta: seq(move |j| b0 / (1.0 + 0.1 * j as f64)),
        gamma,
        eps,
        start_index: 0,
        two_sided: false,
        max_index: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sturm_bisection_matches_dense(eps in -6.0f64..6.0, a0 in 0.2f64..2.0, b0 in 0.2f64..2.0, gamma in -1.0f64..1.0, m in 4usize..40) {
        let spec = chain(eps, a0, b0, gamma);
        let t = spec.truncate(m).unwrap();
        let dense = common::dense_eigenvalues(&t);
        let ours = trirec::truncated_eigenvalues(&spec, m, 1, m, 1e-13).unwrap();
        for (a, b) in ours.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn sturm_count_is_number_below(eps in -6.0f64..6.0, x in -20.0f64..200.0) {
        let spec = chain(eps, 1.0, 0.7, 0.0);
        let t = spec.truncate(16).unwrap();
        let dense = common::dense_eigenvalues(&t);
        let want = dense.iter().filter(|&&l| l < x).count();
        let got = trirec::sturm_count(&t.symmetrized().unwrap(), x);
        // skip the measure-zero neighbourhood of an eigenvalue
        prop_assume!(dense.iter().all(|l| (l - x).abs() > 1e-9));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn symmetrized_spec_is_similar(eps in -4.0f64..4.0, a0 in 0.2f64..2.0, b0 in 0.2f64..2.0) {
        let spec = chain(eps, a0, b0, 0.0);
        let (sym, kappa) = trirec::symmetrize(&spec, 24).unwrap();
        let t = sym.truncate(24).unwrap();
        for (u, l) in t.upper.iter().zip(&t.lower) {
            prop_assert!((u - l).abs() <= 1e-14 * u.abs().max(1.0));
        }
        prop_assert_eq!(kappa.len(), 24);
        let a = trirec::truncated_eigenvalues(&spec, 24, 1, 6, 1e-13).unwrap();
        let b = trirec::truncated_eigenvalues(&sym, 24, 1, 6, 1e-13).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn backward_recursion_is_the_dense_eigenvector(eps in 0.2f64..5.0, k in 1usize..4) {
        let spec = chain(eps, 1.0, 0.8, 0.0);
        let m = 60;
        let t = spec.truncate(m).unwrap();
        let delta = trirec::truncated_eigenvalues(&spec, m, k, k, 1e-14).unwrap()[0];
        let c = trirec::backward_recursion(&spec, delta, m).unwrap();
        let v = common::dense_null_vector(&t, delta);
        prop_assert!(common::aligned_distance(&c, &v) < 1e-8);
    }
}

#[test]
fn fixed_point_sturm_agrees_with_f64_bisection() {
    let spec = chain(2.5, 1.0, 0.6, 0.4);
    let t = spec.truncate(30).unwrap();
    let big = common::BigSturm::new(&t, 200);
    let sym = t.symmetrized().unwrap();
    let (lo, hi) = trirec::gershgorin(&sym);
    for k in 1..=5 {
        let exact = common::from_fixed(&big.kth(k, lo, hi), 200);
        let ours = trirec::bisect_kth(&sym, k, lo, hi, 0.0);
        assert_relative_eq!(ours, exact, epsilon = 1e-12, max_relative = 1e-13);
    }
}

#[test]
fn seeded_search_finds_the_same_eigenvalue() {
    let sym = chain(3.0, 1.0, 1.0, 0.0).truncate(40).unwrap().symmetrized().unwrap();
    let (lo, hi) = trirec::gershgorin(&sym);
    for k in 1..=6 {
        let a = trirec::bisect_kth(&sym, k, lo, hi, 1e-13);
        let b = trirec::seeded_kth(&sym, k, a + 0.3, 1e-13);
        assert_relative_eq!(a, b, epsilon = 1e-11);
    }
}

#[test]
fn adaptive_order_converges() {
    let spec = chain(4.0, 1.0, 1.0, 0.0);
    let r = trirec::adaptive_eigenvalue(&spec, 2, None, 0.0).unwrap();
    assert!(r.converged);
    assert!(r.estimate < 1e-8);
    let fixed = trirec::truncated_eigenvalues(&spec, 2 * r.m, 2, 2, 0.0).unwrap()[0];
    assert_relative_eq!(r.delta, fixed, epsilon = 1e-9);
}

#[test]
fn forward_recursion_leaves_the_minimal_branch() {
    let spec = chain(2.0, 1.0, 1.0, 0.0);
    let delta = trirec::adaptive_eigenvalue(&spec, 1, None, 0.0).unwrap().delta;
    let minimal = trirec::backward_recursion(&spec, delta, 80).unwrap();
    let f = trirec::forward_recursion(&spec, delta, minimal[1] / minimal[0] * 1.001, 60);
    assert!(f[59].abs() > 1e3 * (minimal[59] / minimal[0]).abs());
}

#[test]
fn error_paths() {
    let spec = chain(0.0, 1.0, 1.0, 0.0);
    assert_eq!(trirec::backward_recursion(&spec, 1.0, 10).unwrap_err(), Error::EpsilonZero);
    assert!(matches!(
        trirec::truncated_eigenvalues(&chain(1.0, 1.0, 1.0, 0.0), 5, 1, 6, 0.0),
        Err(Error::IndexOutOfRange { .. })
    ));
    let bad = TridiagonalSpec { beta: seq(|j| if j == 3 { -1.0 } else { 1.0 }), ..chain(1.0, 1.0, 1.0, 0.0) };
    assert_eq!(bad.truncate(8).unwrap().symmetrized().unwrap_err(), Error::NonPositiveProduct { index: 3 });
    let short = TridiagonalSpec { max_index: Some(10), ..chain(1.0, 1.0, 1.0, 0.0) };
    assert!(matches!(short.truncate(20), Err(Error::SequenceExhausted(_))));
}

#[test]
fn normalization_puts_a_positive_unit_maximum() {
    let mut c = vec![0.5, -3.0, 1.0];
    trirec::normalize_max(&mut c);
    assert_eq!(c, vec![-0.5 / 3.0, 1.0, -1.0 / 3.0]);
}

fn mathieu_a(eps: f64) -> TridiagonalSpec {
    mathieu_sg::linemde::build_spec(mathieu_sg::linemde::MatrixKind::A, eps).unwrap()
}

#[test]
fn error_estimate_tracks_the_measured_error() {
    let spec = mathieu_a(1.0);
    let reference = trirec::truncated_eigenvalues(&spec, 60, 1, 1, 0.0).unwrap()[0];
    let c = trirec::backward_recursion(&spec, reference, 80).unwrap();
    for n in 10..=14 {
        let ln = trirec::truncated_eigenvalues(&spec, n, 1, 1, 0.0).unwrap()[0];
        let measured = ln - reference;
        let est = trirec::truncation_error_estimate(&spec, &c, n).unwrap();
        if measured.abs() < 1e-300 || measured.abs() < 64.0 * f64::EPSILON * reference.abs() {
            continue;
        }
        assert_eq!(est.signum(), measured.signum(), "n = {n}");
        let r = est / measured;
        assert!(r > 1.0 / 3.0 && r < 3.0, "n = {n}: ratio {r}");
    }
    assert_eq!(trirec::truncation_error_estimate(&mathieu_a(0.0), &c, 10).unwrap(), 0.0);
}

#[test]
fn sturm_count_is_monotone_and_complete() {
    let t = mathieu_a(3.0).truncate(25).unwrap().symmetrized().unwrap();
    let mut prev = 0;
    for i in 0..=700 {
        let c = trirec::sturm_count(&t, -10.0 + i as f64);
        assert!(c >= prev);
        prev = c;
    }
    assert_eq!(trirec::sturm_count(&t, 1e6), 25);
    assert_eq!(trirec::sturm_count(&t, -1e6), 0);
}

#[test]
fn truncation_sequence_is_cauchy() {
    for eps in [1.0, 10.0, 40.0] {
        let spec = mathieu_a(eps);
        let d: Vec<f64> = [8usize, 16, 32, 64].iter().map(|&m| trirec::truncated_eigenvalues(&spec, m, 2, 2, 0.0).unwrap()[0]).collect();
        let gaps: Vec<f64> = d.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0], "eps {eps}: {gaps:?}");
        }
    }
}
