use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mathieu_sg::error::Error;
use mathieu_sg::fitkit::{self, Init, ModelSpec, ALL_MODELS};

fn sample(model: ModelSpec, p: &[f64], xs: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
    xs.map(|x| (x, model.eval(p, x))).collect()
}

fn half_cost(model: ModelSpec, p: &[f64], data: &[(f64, f64)]) -> f64 {
    0.5 * data.iter().map(|&(x, y)| (model.eval(p, x) - y).powi(2)).sum::<f64>()
}

/// Five-point central difference of the model value in parameter `i`.
fn fd_partial(model: ModelSpec, p: &[f64], x: f64, i: usize) -> f64 {
    let h = 1e-3 * p[i].abs().max(1.0);
    let at = |s: f64| {
        let mut q = p.to_vec();
        q[i] += s * h;
        model.eval(&q, x)
    };
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
}

fn params_strategy() -> impl Strategy<Value = (usize, Vec<f64>, f64)> {
    (0usize..5, prop::collection::vec(-2.0f64..2.0, 7), 0.5f64..20.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn analytic_gradient_matches_differences((m, raw, x) in params_strategy()) {
        let model = ALL_MODELS[m];
        let mut p = raw[..model.param_count()].to_vec();
        if model == ModelSpec::Expdecay3 {
            // keep the denominator away from zero
            p[1] = p[1].abs() + 0.5;
            p[2] *= 0.1;
        } else {
            // positive denominator coefficients keep poles off x > 0
            let nd = model.param_count() - match model { ModelSpec::Rat12 | ModelSpec::Rat22 => 2, ModelSpec::Rat33 => 3, _ => 1 };
            for c in p[nd..].iter_mut() {
                *c = c.abs() + 0.1;
            }
        }
        let g = model.grad(&p, x);
        for (i, gi) in g.iter().enumerate() {
            let fd = fd_partial(model, &p, x, i);
            prop_assert!((gi - fd).abs() <= 1e-7 * gi.abs().max(1.0), "{} d{i}: {gi} vs {fd}", model.id());
        }
        prop_assert!(fitkit::jacobian_check(model, &p, &[x]) < 1e-6);
    }
}

#[test]
fn recovers_exact_mobius_parameters() {
    let truth = [0.9938, -0.1424, 0.3608];
    let data = sample(ModelSpec::Mobius, &truth, (1..=18).map(f64::from));
    let r = fitkit::fit(ModelSpec::Mobius, &data, &Init::Auto).unwrap();
    for (p, t) in r.params.iter().zip(truth) {
        assert!((p - t).abs() < 1e-6, "{p} vs {t}");
    }
    assert!(r.converged && !r.rank_deficient);
    assert!(r.rms_residual < 1e-10);
}

#[test]
fn recovers_each_model_from_exact_samples() {
    let cases: [(ModelSpec, &[f64]); 4] = [
        (ModelSpec::Expdecay3, &[2.0, 0.5, -0.3]),
        (ModelSpec::Rat12, &[1.0, 2.0, 0.5, 3.0]),
        (ModelSpec::Rat22, &[1.0, -0.5, 2.0, 0.7, 1.5]),
        (ModelSpec::Mobius, &[1.0, 0.2, 0.5]),
    ];
    for (model, truth) in cases {
        let data = sample(model, truth, (0..30).map(|i| 0.5 + 0.5 * i as f64));
        let r = fitkit::fit(model, &data, &Init::Auto).unwrap();
        assert!(r.rms_residual < 1e-8, "{}: rms {}", model.id(), r.rms_residual);
        for (p, t) in r.params.iter().zip(truth) {
            assert!((p - t).abs() < 1e-5 * t.abs().max(1.0), "{}: {p} vs {t}", model.id());
        }
    }
}

#[test]
fn optimum_is_a_local_minimum() {
    let data: Vec<(f64, f64)> = (1..=18).map(|i| (i as f64, 1.0 - 0.4 / (i as f64 + 0.3) + 0.002 * (i as f64).sin())).collect();
    for model in [ModelSpec::Mobius, ModelSpec::Rat12, ModelSpec::Expdecay3] {
        let r = fitkit::fit(model, &data, &Init::Auto).unwrap();
        let c0 = half_cost(model, &r.params, &data);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q: Vec<f64> = r.params.iter().map(|p| p + 1e-4 * p.abs().max(1e-2) * rng.gen_range(-1.0..1.0)).collect();
            assert!(half_cost(model, &q, &data) >= c0 * (1.0 - 1e-12), "{}", model.id());
        }
        let g = fitkit::cost_gradient(model, &r.params, &data);
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{}: {g:?}", model.id());
        let rms = (2.0 * c0 / data.len() as f64).sqrt();
        assert!((rms - r.rms_residual).abs() <= 1e-12 * rms.max(1e-30));
    }
}

#[test]
fn flat_zero_data_is_rank_deficient() {
    let data: Vec<(f64, f64)> = (1..=12).map(|i| (i as f64, 0.0)).collect();
    let r = fitkit::fit(ModelSpec::Rat12, &data, &Init::Auto).unwrap();
    assert!(r.rank_deficient);
    assert!(r.rms_residual < 1e-12);
}

#[test]
fn one_percent_noise_moves_parameters_little() {
    let truth = [0.9938, -0.1424, 0.3608];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<(f64, f64)> = (1..=40)
        .map(|i| {
            let x = 0.5 * i as f64;
            (x, ModelSpec::Mobius.eval(&truth, x) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let r = fitkit::fit(ModelSpec::Mobius, &data, &Init::Auto).unwrap();
    for (p, t) in r.params.iter().zip(truth) {
        assert!(((p - t) / t).abs() < 0.1, "{p} vs {t}");
    }
    assert!(r.rms_residual < 0.01);
}

#[test]
fn fits_are_deterministic() {
    let data: Vec<(f64, f64)> = (1..=18).map(|i| (i as f64, 1.0 - 0.35 / (i as f64 + 0.2))).collect();
    for model in ALL_MODELS {
        let a = fitkit::fit(model, &data, &Init::Auto).unwrap();
        let b = fitkit::fit(model, &data, &Init::Auto).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.rms_residual.to_bits(), b.rms_residual.to_bits());
    }
}

#[test]
fn given_start_is_used() {
    let data = sample(ModelSpec::Mobius, &[1.0, 0.2, 0.5], (1..=10).map(f64::from));
    let r = fitkit::fit(ModelSpec::Mobius, &data, &Init::Given(vec![0.9, 0.1, 0.4])).unwrap();
    assert!(r.rms_residual < 1e-10 && r.iterations > 0);
}

#[test]
fn input_errors() {
    let data = vec![(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)];
    assert_eq!(fitkit::fit(ModelSpec::Mobius, &data, &Init::Auto).unwrap_err(), Error::InsufficientData { need: 4, got: 3 });
    assert!(ModelSpec::parse("rat44").is_err());
    for m in ALL_MODELS {
        assert_eq!(ModelSpec::parse(m.id()).unwrap(), m);
    }
}

#[test]
fn jacobian_check_examples() {
    assert!(fitkit::jacobian_check(ModelSpec::Expdecay3, &[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]) < 1e-6);
    assert!(fitkit::jacobian_check(ModelSpec::Mobius, &[1.0, 0.0, 1.0], &[1.0, 2.0, 5.0]) < 1e-6);
}

#[test]
fn exact_fit_has_vanishing_gradient() {
    let p = [1.0, 0.2, 0.5];
    let data = sample(ModelSpec::Mobius, &p, (1..=10).map(f64::from));
    let g = fitkit::cost_gradient(ModelSpec::Mobius, &p, &data);
    assert!(g.iter().all(|x| x.abs() < 1e-10));
    let r = fitkit::fit(ModelSpec::Mobius, &data, &Init::Auto).unwrap();
    assert!(r.converged);
    assert!(fitkit::cost_gradient(ModelSpec::Mobius, &r.params, &data).iter().all(|x| x.abs() < 1e-8));
}

#[test]
fn constant_data_is_approached() {
    // a nonzero constant is only a limit of rat12 with diverging parameters
    let data: Vec<(f64, f64)> = (1..=12).map(|i| (i as f64, 0.7)).collect();
    let r = fitkit::fit(ModelSpec::Rat12, &data, &Init::Auto).unwrap();
    assert!(r.rms_residual < 1e-3 * 0.7, "{}", r.rms_residual);
    assert!(r.params.iter().map(|p| p.abs()).fold(0.0, f64::max) > 1e2);
}
