use jmmd::glm::{diagnostics, irls_fit, wls_solve, Dispersion, Family, GlmOptions, Link};
use jmmd::joint::{arc_length_sq, r2_tilde_mean, ArcMetric, ComponentFit};
use jmmd::special;
use jmmd::terms::{Term, TermSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::{beta, gamma};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

// (X'WX)^-1 X'Wz through the normal equations
fn normal_equations(x: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let wx = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
    let xtwx = x.transpose() * &wx;
    let xtwz = wx.transpose() * z;
    xtwx.lu().solve(&xtwz).unwrap()
}

fn random_design(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, Vec<f64>) {
    let n = rng.random_range(8..40);
    let p = rng.random_range(1..6.min(n - 2));
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
    let y = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
    let prior: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
    (x, y, prior, phi)
}

#[test]
fn wls_closed_form_small_case() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
    let z = DVector::from_vec(vec![1.0, 2.0, 4.0]);
    let w = DVector::from_element(3, 1.0);
    let sol = wls_solve(&x, &z, &w).unwrap();
    assert!((sol.coefficients[0] - 5.0 / 6.0).abs() < 1e-12);
    assert!((sol.coefficients[1] - 1.5).abs() < 1e-12);
    assert!((sol.hat.sum() - 2.0).abs() < 1e-12);
}

#[test]
fn irls_normal_identity_equals_weighted_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (x, y, prior, phi) = random_design(&mut rng);
        let fit = irls_fit(Family::Normal, Link::Identity, &x, y.as_slice(), &prior, &phi, &GlmOptions::default()).unwrap();
        let w = DVector::from_iterator(prior.len(), prior.iter().zip(&phi).map(|(p, f)| p / f));
        let beta = normal_equations(&x, &y, &w);
        for (a, b) in fit.coefficients.iter().zip(beta.iter()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn deviance_components_match_quadrature() {
    let ys = [0.05, 0.5, 1.0, 3.7, 12.0, 150.0];
    let mus = [0.1, 0.8, 2.0, 9.5, 140.0];
    for family in [Family::Normal, Family::Gamma] {
        for &y in &ys {
            for &mu in &mus {
                let closed = family.deviance_component(y, mu).unwrap();
                let quad = 2.0 * integrate(|t| (y - t) / family.variance(t), mu, y, 1e-14 * (1.0 + closed));
                let rel = (closed - quad).abs() / closed.abs().max(1e-300);
                assert!(rel < 1e-8, "{family:?} y={y} mu={mu}: {closed} vs {quad}");
            }
        }
    }
}

#[test]
fn arc_length_matches_quadrature() {
    let metrics = [
        (ArcMetric::Dispersion, 2.0),
        (ArcMetric::Mean { family: Family::Gamma, phi: 0.3 }, 0.6),
        (ArcMetric::Mean { family: Family::Gamma, phi: 4.0 }, 8.0),
        (ArcMetric::Mean { family: Family::Normal, phi: 2.0 }, 0.0),
    ];
    let pairs = [(0.0, 1.0), (0.2, 5.0), (3.0, 0.5), (-1.0, 2.5), (10.0, 40.0)];
    for (metric, c) in metrics {
        for (a, b) in pairs {
            let closed = arc_length_sq(metric, a, b);
            let l = integrate(|t: f64| (1.0 + c * c * t * t).sqrt(), a, b, 1e-14);
            let quad = l * l;
            assert!((closed - quad).abs() / quad < 1e-8, "{metric:?} ({a},{b}): {closed} vs {quad}");
        }
    }
    let unit = arc_length_sq(ArcMetric::Dispersion, 0.0, 1.0);
    assert!((unit - 2.18727).abs() < 1e-5);
}

#[test]
fn r2_one_under_normal_is_adjusted_r2() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.random_range(12..40);
        let p = rng.random_range(2..5);
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(0.0..1.0) });
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
        let ones = vec![1.0; n];
        let glm = irls_fit(Family::Normal, Link::Identity, &x, &y, &ones, &ones, &GlmOptions::default()).unwrap();
        let mut terms = TermSet::constant();
        for j in 1..p {
            terms.push(Term::z(j - 1));
        }
        let fit = ComponentFit { terms, glm };
        let yv = DVector::from_vec(y.clone());
        let beta = normal_equations(&x, &yv, &DVector::from_element(n, 1.0));
        let rss = (&yv - &x * beta).norm_squared();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let adj = 1.0 - (rss / (n - p) as f64) / (tss / (n - 1) as f64);
        let r2 = r2_tilde_mean(&fit, 1.0).unwrap();
        assert!((r2 - adj).abs() < 1e-10, "{r2} vs {adj}");
    }
}

#[test]
fn cooks_distance_matches_leave_one_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 15;
    let p = 3;
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let y: Vec<f64> = (0..n).map(|i| 2.0 + x[(i, 1)] - 3.0 * x[(i, 2)] + rng.random_range(-0.5..0.5)).collect();
    let ones = vec![1.0; n];
    let opts = GlmOptions::default().with_dispersion(Dispersion::Free);
    let fit = irls_fit(Family::Normal, Link::Identity, &x, &y, &ones, &ones, &opts).unwrap();
    let diag = diagnostics(&fit);
    let s2 = fit.pearson_chi2() / (n - p) as f64;
    let beta = DVector::from_vec(fit.coefficients.clone());
    let xtx = x.transpose() * &x;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|k| *k != i).collect();
        let xi = x.select_rows(&keep);
        let yi = DVector::from_iterator(n - 1, keep.iter().map(|k| y[*k]));
        let bi = normal_equations(&xi, &yi, &DVector::from_element(n - 1, 1.0));
        let d = &beta - bi;
        let cook = (d.transpose() * &xtx * &d)[(0, 0)] / (p as f64 * s2);
        assert!((diag[i].cooks_distance - cook).abs() < 1e-9 * (1.0 + cook), "{i}: {} vs {cook}", diag[i].cooks_distance);
    }
}

#[test]
fn special_functions_match_statrs() {
    for &x in &[0.1, 0.5, 1.0, 2.5, 7.3, 30.0, 171.2] {
        assert!((special::ln_gamma(x) - gamma::ln_gamma(x)).abs() < 1e-10 * (1.0 + gamma::ln_gamma(x).abs()));
    }
    for &a in &[0.5, 1.0, 3.0, 12.5] {
        for &x in &[0.01, 0.7, 2.0, 9.0, 40.0] {
            assert!((special::gamma_p(a, x) - gamma::gamma_lr(a, x)).abs() < 1e-12);
            assert!((special::gamma_q(a, x) - gamma::gamma_ur(a, x)).abs() < 1e-12);
        }
    }
    for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (10.0, 1.5), (43.5, 1.0)] {
        for &x in &[0.001, 0.2, 0.5, 0.9, 0.999] {
            assert!((special::beta_inc(a, b, x) - beta::beta_reg(a, b, x)).abs() < 1e-11);
        }
    }
    for &(d1, d2) in &[(1.0, 83.0), (2.0, 87.0), (5.0, 10.0)] {
        let dist = FisherSnedecor::new(d1, d2).unwrap();
        for &f in &[0.1, 1.0, 8.55, 91.55] {
            assert!((special::f_sf(f, d1, d2) - dist.sf(f)).abs() < 1e-12);
        }
    }
    for &k in &[1.0, 2.0, 3.0, 10.0] {
        let dist = ChiSquared::new(k).unwrap();
        for &x in &[0.0109, 0.5, 1.69, 4.77, 20.0] {
            assert!((special::chi2_sf(x, k) - dist.sf(x)).abs() < 1e-12);
        }
    }
    let t = StudentsT::new(0.0, 1.0, 83.0).unwrap();
    for &v in &[0.3, 2.0, 40.9] {
        assert!((special::t_two_sided(v, 83.0) - 2.0 * t.sf(v)).abs() < 1e-12);
    }
    let z = Normal::new(0.0, 1.0).unwrap();
    for &p in &[1e-6, 0.01, 0.3, 0.5, 0.975, 0.999999] {
        assert!((special::normal_quantile(p) - z.inverse_cdf(p)).abs() < 1e-9);
        assert!((special::normal_cdf(z.inverse_cdf(p)) - p).abs() < 1e-12);
    }
}
