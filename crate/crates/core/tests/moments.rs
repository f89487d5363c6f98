use jmmd::glm::{Family, Link};
use jmmd::moments::{unconditional_mean, unconditional_variance, NoiseDistribution, NoiseMoments};
use jmmd::terms::Term;
use jmmd::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn model(spec: &[(&str, f64)]) -> Vec<(Term, f64)> {
    spec.iter().map(|(t, c)| (t.parse().unwrap(), *c)).collect()
}

fn table5_mean() -> Vec<(Term, f64)> {
    model(&[
        ("x1", 488.961),
        ("x2", 432.210),
        ("x3", 574.124),
        ("x1*z2", 56.621),
        ("x3*z2", 79.146),
        ("x2*z2", 35.904),
        ("x1*x3*z1", 174.216),
    ])
}

fn table5_disp() -> Vec<(Term, f64)> {
    model(&[("x1", 6.9984), ("x2", 5.9400), ("x3", 7.3250), ("x2*x3", -7.9662)])
}

fn noise(m1: f64, v1: f64, m2: f64, v2: f64) -> NoiseDistribution {
    NoiseDistribution::new(vec![NoiseMoments { mean: m1, variance: v1 }, NoiseMoments { mean: m2, variance: v2 }]).unwrap()
}

// mean and log-dispersion evaluated directly from the term lists
fn eval(m: &[(Term, f64)], x: &[f64], z: &[f64]) -> f64 {
    m.iter().map(|(t, c)| c * t.eval(x, z).unwrap()).sum()
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..3).map(|_| -rng.random_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[test]
fn unconditional_mean_examples() {
    let mean = table5_mean();
    let zero = unconditional_mean(&mean, &noise(0.0, 1.0, 0.0, 1.0)).unwrap();
    let shifted = unconditional_mean(&mean, &noise(1.0, 1.0, 0.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x = random_point(&mut rng);
        let base = 488.961 * x[0] + 432.21 * x[1] + 574.124 * x[2];
        assert!((zero.eval(&x).unwrap() - base).abs() < 1e-9);
        assert!((shifted.eval(&x).unwrap() - base - 174.216 * x[0] * x[2]).abs() < 1e-9);
    }
    let zeros = model(&[("x1", 0.0), ("x2*z1", 0.0)]);
    let z = unconditional_mean(&zeros, &noise(2.0, 1.0, 0.0, 1.0)).unwrap();
    assert_eq!(z.eval(&[0.2, 0.3, 0.5]).unwrap(), 0.0);
}

#[test]
fn unconditional_variance_examples() {
    let (mean, disp) = (table5_mean(), table5_disp());
    let none = unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &noise(0.0, 0.0, 0.0, 0.0)).unwrap();
    let unit = unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &noise(0.0, 1.0, 0.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let x = random_point(&mut rng);
        let phi = (6.9984 * x[0] + 5.94 * x[1] + 7.325 * x[2] - 7.9662 * x[1] * x[2]).exp();
        assert!((none.variance_at(&x).unwrap() - phi).abs() < 1e-9 * phi);
    }
    let v = unit.variance_at(&[1.0, 0.0, 0.0]).unwrap();
    assert!((v - (6.9984f64.exp() + 56.621 * 56.621)).abs() < 1e-9);
    assert!((v - 4300.8176).abs() < 1e-3);
}

#[test]
fn variance_is_invariant_to_term_order() {
    let (mut mean, mut disp) = (table5_mean(), table5_disp());
    let nd = noise(0.3, 0.7, -0.2, 1.4);
    let a = unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &nd).unwrap();
    mean.reverse();
    disp.rotate_left(1);
    let b = unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &nd).unwrap();
    for x in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.1, 0.8, 0.1]] {
        assert!((a.variance_at(&x).unwrap() - b.variance_at(&x).unwrap()).abs() < 1e-9);
        assert!((a.mean_at(&x).unwrap() - b.mean_at(&x).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn unsupported_structures_are_named() {
    let nd = noise(0.0, 1.0, 0.0, 1.0);
    let disp = table5_disp();
    for bad in ["x1*z1^2", "x1*z1*z2"] {
        let mean = model(&[("x1", 1.0), (bad, 1.0)]);
        match unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &nd) {
            Err(Error::Unsupported { term, .. }) => assert_eq!(term, bad),
            other => panic!("unexpected {other:?}"),
        }
    }
    let noisy_disp = model(&[("x1", 1.0), ("x2*z1", 0.5)]);
    assert!(matches!(
        unconditional_variance(&table5_mean(), &noisy_disp, Family::Normal, Link::Identity, &nd),
        Err(Error::Unsupported { .. })
    ));
    assert!(unconditional_variance(&table5_mean(), &disp, Family::Gamma, Link::Log, &nd).is_err());
}

#[test]
fn variance_matches_monte_carlo() {
    let (mean, disp) = (table5_mean(), table5_disp());
    let (m1, s1, m2, s2) = (0.0, 1.0, 0.0, 1.0);
    let model = unconditional_variance(&mean, &disp, Family::Normal, Link::Identity, &noise(m1, s1 * s1, m2, s2 * s2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let z1 = Normal::new(m1, s1).unwrap();
    let z2 = Normal::new(m2, s2).unwrap();
    let samples = 100_000;
    for _ in 0..5 {
        let x = random_point(&mut rng);
        let mut ys = Vec::with_capacity(samples);
        for _ in 0..samples {
            let z = [z1.sample(&mut rng), z2.sample(&mut rng)];
            let e: f64 = StandardNormal.sample(&mut rng);
            ys.push(eval(&mean, &x, &z) + eval(&disp, &x, &z).exp().sqrt() * e);
        }
        let n = samples as f64;
        let ybar = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = ys.iter().map(|y| (y - ybar).powi(4)).sum::<f64>() / n;
        let se_var = ((m4 - var * var) / n).sqrt();
        let se_mean = (var / n).sqrt();
        let want = model.variance_at(&x).unwrap();
        assert!((var - want).abs() < 3.0 * se_var, "x={x:?}: MC {var} vs {want} (se {se_var})");
        assert!((ybar - model.mean_at(&x).unwrap()).abs() < 3.0 * se_mean);
    }
}
