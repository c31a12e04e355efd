mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use mathieu_sg::floquet::{self, StabilityTag};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn monodromy_is_unimodular(delta in -10.0f64..40.0, eps in -20.0f64..20.0) {
        let m = floquet::monodromy(delta, eps, floquet::default_steps(delta, eps));
        let scale = (m.m11.abs() + m.m12.abs()) * (m.m21.abs() + m.m22.abs());
        prop_assert!((m.det() - 1.0).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn trace_matches_rk4(delta in -5.0f64..30.0, eps in -12.0f64..12.0) {
        let ours = floquet::trace(delta, eps);
        let oracle = common::rk4_trace(delta, eps, 100_000);
        prop_assert!((ours - oracle).abs() <= 1e-7 * ours.abs().max(1.0), "{ours} vs {oracle}");
    }

    #[test]
    fn trace_is_even_in_eps(delta in -5.0f64..30.0, eps in 0.0f64..15.0) {
        let a = floquet::trace(delta, eps);
        let b = floquet::trace(delta, -eps);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn unperturbed_trace(delta in -3.0f64..30.0) {
        let want = if delta >= 0.0 { 2.0 * (2.0 * PI * delta.sqrt()).cos() } else { 2.0 * (2.0 * PI * (-delta).sqrt()).cosh() };
        let got = floquet::trace(delta, 0.0);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn chebyshev_periods(delta in 0.0f64..20.0, eps in 0.0f64..5.0, n in 1u32..6) {
        let theta = floquet::monodromy(delta, eps, 4096).theta();
        prop_assume!(theta.is_some());
        let c = floquet::classify_periods(delta, eps, n, 1e-6);
        let want = 2.0 * (2.0 * PI * n as f64 * theta.unwrap()).cos();
        prop_assert!((c.trace - want).abs() < 1e-6);
    }
}

#[test]
fn single_period_class_is_the_plain_class() {
    for (d, e) in [(0.5, 0.1), (1.0, 0.5), (0.25, 0.6), (3.0, 7.0)] {
        assert_eq!(floquet::classify_periods(d, e, 1, 1e-6).tag, floquet::classify(d, e).tag);
    }
    assert_eq!(floquet::classify(0.5, 0.1).tag, StabilityTag::Stable);
    assert_eq!(floquet::classify(0.25, 0.6).tag, StabilityTag::Unstable);
    assert_eq!(floquet::classify(-1.0, 0.0).tag, StabilityTag::Unstable);
}

#[test]
fn grid_cells_are_pointwise_classes() {
    let g = floquet::stability_grid((-1.0, 6.0), (0.0, 5.0), 9, 7);
    assert_eq!(g.cells.len(), 63);
    for j in 0..7 {
        for i in 0..9 {
            assert_eq!(g.cell(i, j).tag, floquet::classify(g.delta_at(i), g.eps_at(j)).tag);
        }
    }
    assert_abs_diff_eq!(g.delta_at(0), -1.0 + 7.0 / 18.0);
}

#[test]
fn unstable_intervals_of_a_synthetic_trace() {
    let tr = |x: f64| 2.2 * x.cos();
    let iv = floquet::unstable_intervals_on(&tr, 0.1, 10.0, &|_| 0.05, 1e-12);
    let c = (1.0 / 1.1f64).acos();
    let want = [(0.1, c), (PI - c, PI + c), (2.0 * PI - c, 2.0 * PI + c), (3.0 * PI - c, 3.0 * PI + c)];
    assert_eq!(iv.len(), want.len());
    for (a, b) in iv.iter().zip(want) {
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-10);
        assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-10);
    }
}

#[test]
fn hidden_gap_between_samples_is_found() {
    // narrow excursion above 2 between two coarse samples
    let tr = |x: f64| 1.5 + 0.6 * (-(x - 1.03).powi(2) / 1e-4).exp();
    let iv = floquet::unstable_intervals_on(&tr, 0.0, 2.0, &|_| 0.1, 1e-12);
    assert_eq!(iv.len(), 1);
    assert!(iv[0].0 > 1.0 && iv[0].1 < 1.06);
}

#[test]
fn diagonal_intervals_have_transitional_ends() {
    let iv = floquet::diagonal_unstable_intervals(5);
    assert_eq!(iv.len(), 5);
    for w in iv.windows(2) {
        assert!(w[0].1 < w[1].0);
    }
    for &(a, b) in &iv[1..] {
        for t in [a, b] {
            assert!((floquet::trace(t, t).abs() - 2.0).abs() < 1e-6);
        }
    }
}

#[test]
fn stable_length_matches_fine_sampling() {
    let (eps, lo, hi) = (1.5, 1.5, 12.0);
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let flags: Vec<bool> = (0..n).map(|i| floquet::trace(lo + (i as f64 + 0.5) * h, eps).abs() < 2.0).collect();
    let sampled = flags.iter().filter(|&&f| f).count() as f64 * h;
    // each band edge costs the midpoint count at most one sample
    let edges = flags.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(edges >= 6);
    assert_abs_diff_eq!(floquet::stable_length(eps, lo, hi), sampled, epsilon = (edges + 1) as f64 * h);
}

#[test]
fn small_triangle_probabilities_are_ordered() {
    let ps = floquet::triangle_probabilities(3, 60);
    assert_eq!(ps.iter().map(|p| p.i).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(ps.windows(2).all(|w| w[0].p < w[1].p && w[0].w < w[1].w));
    assert!(ps.iter().all(|p| p.p > 0.0 && p.p < 1.0));
    let sub = floquet::triangle_probabilities_subset(&[2], 60);
    assert_eq!(sub[0].p, ps[1].p);
}

#[test]
fn closed_form_traces() {
    assert_abs_diff_eq!(floquet::trace(1.0, 0.0), 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(floquet::trace(0.25, 0.0), -2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(floquet::trace(0.5, 0.0), 2.0 * (std::f64::consts::SQRT_2 * std::f64::consts::PI).cos(), epsilon = 1e-10);
    assert_abs_diff_eq!(floquet::trace(0.5, 0.0), -0.5325107, epsilon = 1e-7);
    assert_eq!(floquet::classify(1.0, 0.0).tag, StabilityTag::Transitional);
    assert_eq!(floquet::classify(0.5, 0.0).tag, StabilityTag::Stable);
    assert_eq!(floquet::stability_grid((0.0, 1.0), (-0.5, 0.5), 1, 1).cells[0].tag, StabilityTag::Stable);
}

#[test]
fn grid_is_symmetric_in_eps() {
    let g = floquet::stability_grid((0.0, 10.0), (-10.0, 10.0), 40, 40);
    for j in 0..20 {
        for i in 0..40 {
            assert_eq!(g.cell(i, j).tag, g.cell(i, 39 - j).tag);
        }
    }
}

#[test]
fn grid_boundaries_follow_the_transition_curves() {
    use mathieu_sg::linemde;
    let (nx, ny) = (200, 200);
    let g = floquet::stability_grid((0.0, 10.0), (-10.0, 10.0), nx, ny);
    let hx = 10.0 / nx as f64;
    for j in 0..ny {
        let eps = g.eps_at(j);
        let curves = linemde::transition_values(eps, 8).unwrap();
        for i in 0..nx - 1 {
            let (a, b) = (g.cell(i, j).tag, g.cell(i + 1, j).tag);
            if a == b {
                continue;
            }
            let mid = 0.5 * (g.delta_at(i) + g.delta_at(i + 1));
            let near = curves.iter().map(|c| (c - mid).abs()).fold(f64::INFINITY, f64::min);
            assert!(near <= hx, "eps {eps}, delta {mid}: nearest curve {near}");
        }
    }
}
