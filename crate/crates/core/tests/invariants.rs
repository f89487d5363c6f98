use jmmd::data::{bread, Dataset};
use jmmd::glm::{irls_fit, wls_solve, Family, GlmOptions, Link};
use jmmd::joint::{arc_length_sq, chisq_test, f_test, fit_dispersion, fit_mean, floor_response, ArcMetric};
use jmmd::sim::Counts;
use jmmd::terms::{model_matrix, scheffe_terms, simplex_centroid, slack_expand, slack_model, MixtureOrder, Term, TermSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ts(s: &str) -> TermSet {
    s.parse().unwrap()
}

#[test]
fn f_statistic_is_invariant_to_dispersion_scale() {
    let data = bread();
    let small = ts("x1,x2,x3,x1*z2");
    let big = ts("x1,x2,x3,x1*z2,x3*z2,x1*x3*z1");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let phi: Vec<f64> = (0..data.len()).map(|_| rng.random_range(50.0..900.0)).collect();
    let base = {
        let r = fit_mean(&small, &data, Family::Normal, Link::Identity, &phi).unwrap();
        let f = fit_mean(&big, &data, Family::Normal, Link::Identity, &phi).unwrap();
        f_test(&r, &f).unwrap().statistic
    };
    for c in [0.1, 10.0] {
        let scaled: Vec<f64> = phi.iter().map(|p| c * p).collect();
        let r = fit_mean(&small, &data, Family::Normal, Link::Identity, &scaled).unwrap();
        let f = fit_mean(&big, &data, Family::Normal, Link::Identity, &scaled).unwrap();
        let stat = f_test(&r, &f).unwrap().statistic;
        assert!((stat - base).abs() < 1e-9 * base.max(1.0), "c={c}: {stat} vs {base}");
    }
}

#[test]
fn hat_values_sum_to_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let n = rng.random_range(6..30);
        let p = rng.random_range(1..n.min(8));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0));
        let z = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.1..5.0));
        let sol = wls_solve(&x, &z, &w).unwrap();
        assert!((sol.hat.sum() - p as f64).abs() < 1e-8);
    }
    let data = bread();
    let terms = ts("x1,x2,x3,x1*z2,x3*z2,x1*x3*z1,x2*z2");
    let fit = fit_mean(&terms, &data, Family::Normal, Link::Identity, &vec![1.0; 90]).unwrap();
    assert!((fit.glm.hat.iter().sum::<f64>() - 7.0).abs() < 1e-8);
}

#[test]
fn dispersion_chi_square_is_half_the_deviance_drop() {
    let data = bread();
    let mean = fit_mean(&ts("x1,x2,x3,x1*z2,x3*z2,x1*x3*z1,x2*z2"), &data, Family::Normal, Link::Identity, &vec![1.0; 90]).unwrap();
    let response = floor_response(&mean.standardized_deviance());
    let unit = vec![1.0; 90];
    let start = fit_dispersion(&ts("x1,x2,x3"), &data, &response, &unit).unwrap();
    let step1 = fit_dispersion(&ts("x1,x2,x3,x2*x3"), &data, &response, &unit).unwrap();
    let step2 = fit_dispersion(&ts("x1,x2,x3,x2*x3,x1*x3"), &data, &response, &unit).unwrap();
    let t1 = chisq_test(&start, &step1).unwrap();
    let t2 = chisq_test(&step1, &step2).unwrap();
    assert!((t1.statistic - (start.glm.deviance - step1.glm.deviance) / 2.0).abs() < 1e-12);
    assert!((t2.statistic - (step1.glm.deviance - step2.glm.deviance) / 2.0).abs() < 1e-12);
    assert!((start.glm.deviance - 268.68).abs() < 0.05);
    assert!((step1.glm.deviance - 259.14).abs() < 0.05);
    assert!((step2.glm.deviance - 255.76).abs() < 0.05);
    assert!((t1.statistic - 4.77).abs() < 0.05);
    assert!((t2.statistic - 1.69).abs() < 0.05);
}

fn fitted(terms: &TermSet, data: &Dataset) -> Vec<f64> {
    fit_mean(terms, data, Family::Normal, Link::Identity, &vec![1.0; data.len()]).unwrap().glm.mu
}

#[test]
fn scheffe_and_slack_models_fit_identically() {
    let data = bread();
    for order in [MixtureOrder::Linear, MixtureOrder::Quadratic] {
        let scheffe = scheffe_terms(3, order).unwrap();
        for slack in 0..3 {
            let slack_terms = slack_model(&scheffe, slack).unwrap();
            assert_eq!(slack_terms.len(), scheffe.len());
            let a = fitted(&scheffe, &data);
            let b = fitted(&slack_terms, &data);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-8 * u.abs().max(1.0), "{order:?} slack {slack}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn slack_coefficients_follow_the_substitution() {
    let data = bread();
    let scheffe = scheffe_terms(3, MixtureOrder::Quadratic).unwrap();
    let fit = fit_mean(&scheffe, &data, Family::Normal, Link::Identity, &vec![1.0; 90]).unwrap();
    let beta = &fit.glm.coefficients;
    let expanded = slack_expand(&scheffe, beta, 2).unwrap();
    let slack_terms: TermSet = expanded.iter().map(|(t, _)| t.clone()).collect();
    let direct = fit_mean(&slack_terms, &data, Family::Normal, Link::Identity, &vec![1.0; 90]).unwrap();
    for ((t, c), d) in expanded.iter().zip(&direct.glm.coefficients) {
        assert!((c - d).abs() < 1e-6 * c.abs().max(1.0), "{t}: {c} vs {d}");
    }
    let coef = |name: &str| expanded.iter().find(|(t, _)| t.to_string() == name).map(|(_, c)| *c).unwrap();
    // x1, x2, x3, x1x2, x1x3, x2x3 with x3 as slack
    assert!((coef("1") - beta[2]).abs() < 1e-9);
    assert!((coef("x1") - (beta[0] - beta[2] + beta[4])).abs() < 1e-9);
    assert!((coef("x1^2") + beta[4]).abs() < 1e-9);
    assert!((coef("x2^2") + beta[5]).abs() < 1e-9);
}

#[test]
fn irls_gamma_log_reaches_a_stationary_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let design = simplex_centroid(3).unwrap();
    let rows: Vec<Vec<f64>> = (0..6).flat_map(|_| design.mixture.clone()).collect();
    let n = rows.len();
    let x = DMatrix::from_fn(n, 3, |i, j| rows[i][j]);
    let y: Vec<f64> = (0..n).map(|i| (1.0 + rows[i][0]).exp() * rng.random_range(0.3..2.0)).collect();
    let ones = vec![1.0; n];
    let fit = irls_fit(Family::Gamma, Link::Log, &x, &y, &ones, &ones, &GlmOptions::default()).unwrap();
    assert!(fit.converged);
    // score equations for the log link: X'(y - mu)/mu = 0
    for j in 0..3 {
        let s: f64 = (0..n).map(|i| x[(i, j)] * (y[i] - fit.mu[i]) / fit.mu[i]).sum();
        assert!(s.abs() < 1e-4, "score {j} = {s}");
    }
    for w in fit.deviance_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hat_values_lie_in_unit_interval(seed in any::<u64>(), n in 4usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(1..n.min(5));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let z = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.1..2.0));
        let sol = wls_solve(&x, &z, &w).unwrap();
        for h in sol.hat.iter() {
            prop_assert!(*h >= -1e-12 && *h < 1.0);
        }
        prop_assert!((sol.hat.sum() - p as f64).abs() < 1e-8);
    }

    #[test]
    fn deviance_components_are_nonnegative(y in 0.01f64..500.0, mu in 0.01f64..500.0) {
        for family in [Family::Normal, Family::Gamma] {
            let d = family.deviance_component(y, mu).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(family.deviance_component(y, y).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn arc_length_is_symmetric(a in -50.0f64..50.0, b in -50.0f64..50.0, phi in 0.01f64..10.0) {
        for m in [ArcMetric::Dispersion, ArcMetric::Mean { family: Family::Gamma, phi }] {
            let u = arc_length_sq(m, a, b);
            let v = arc_length_sq(m, b, a);
            prop_assert!((u - v).abs() <= 1e-9 * u.max(1.0));
            prop_assert!(u >= (a - b) * (a - b) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn term_display_round_trips(mix in proptest::collection::btree_map(0usize..4, 1u32..3, 1..3),
                                proc in proptest::collection::btree_map(0usize..2, 1u32..3, 0..2)) {
        let mut t = Term::constant();
        for (i, e) in &mix {
            for _ in 0..*e {
                t = t.times_x(*i);
            }
        }
        for (j, e) in &proc {
            for _ in 0..*e {
                t = t.times_z(*j);
            }
        }
        let back: Term = t.to_string().parse().unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn proportions_sum_to_one(correct in 0usize..500, type1 in 0usize..500, type2 in 0usize..500) {
        prop_assume!(correct + type1 + type2 > 0);
        let p = Counts { correct, type1, type2 }.proportions();
        prop_assert!((p.correct + p.type1 + p.type2 - 1.0).abs() < 1e-12);
        prop_assert!((p.acceptable - p.correct - p.type1).abs() < 1e-15);
    }

    #[test]
    fn slack_fit_matches_scheffe_for_any_response(seed in any::<u64>(), slack in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = bread();
        data.y = (0..data.len()).map(|_| rng.random_range(100.0..700.0)).collect();
        let scheffe = scheffe_terms(3, MixtureOrder::Quadratic).unwrap();
        let a = fitted(&scheffe, &data);
        let b = fitted(&slack_model(&scheffe, slack).unwrap(), &data);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-8 * u.abs().max(1.0));
        }
    }
}

#[test]
fn model_matrix_columns_follow_terms() {
    let data = bread();
    let terms = ts("x1,x1*x3*z1,x2*z2");
    let m = model_matrix(&terms, &data).unwrap();
    assert_eq!(m.shape(), (90, 3));
    for i in 0..90 {
        assert_eq!(m[(i, 0)], data.x[i][0]);
        assert_eq!(m[(i, 1)], data.x[i][0] * data.x[i][2] * data.z[i][0]);
        assert_eq!(m[(i, 2)], data.x[i][1] * data.z[i][1]);
    }
}
