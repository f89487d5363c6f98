//! Joint mean and dispersion fitting, selection criteria and nested tests.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{irls_fit, Dispersion, Family, GlmFit, GlmOptions, Link, HAT_CAP};
use crate::special::{chi2_sf, f_sf, ln_gamma};
use crate::terms::{model_matrix, TermSet};

/// Fixed scale of the Gamma dispersion model.
pub const DISPERSION_SCALE: f64 = 2.0;

/// A fitted GLM together with the terms of its linear predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub terms: TermSet,
    pub glm: GlmFit,
}

impl ComponentFit {
    pub fn k(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.glm.n()
    }

    /// d_i / (1 - h_i).
    pub fn standardized_deviance(&self) -> Vec<f64> {
        standardized_deviance(&self.glm.dev_components, &self.glm.hat)
    }

    /// D* = sum d*_i / phi_i.
    pub fn dstar_total(&self) -> f64 {
        self.standardized_deviance().iter().zip(&self.glm.phi).map(|(d, p)| d / p).sum()
    }
}

/// Prior weights of the dispersion GLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DispersionWeights {
    #[default]
    Unit,
    /// (1 - h_i) / 2 from the mean fit.
    Leverage,
}

impl DispersionWeights {
    pub fn weights(self, hat: &[f64]) -> Vec<f64> {
        match self {
            DispersionWeights::Unit => vec![1.0; hat.len()],
            DispersionWeights::Leverage => hat.iter().map(|h| (1.0 - h) / 2.0).collect(),
        }
    }
}

fn name_singular(e: Error, terms: &TermSet) -> Error {
    match e {
        Error::Singular { index, .. } => Error::Singular {
            index,
            name: terms.terms().get(index).map(|t| t.to_string()).unwrap_or_default(),
        },
        other => other,
    }
}

/// Mean component with prior weights 1/phi.
pub fn fit_mean(terms: &TermSet, data: &Dataset, family: Family, link: Link, phi: &[f64]) -> Result<ComponentFit> {
    let x = model_matrix(terms, data)?;
    let prior = vec![1.0; data.len()];
    let glm = irls_fit(family, link, &x, &data.y, &prior, phi, &GlmOptions::default())
        .map_err(|e| name_singular(e, terms))?;
    Ok(ComponentFit { terms: terms.clone(), glm })
}

/// Gamma/log dispersion component with fixed scale 2 on `response`.
pub fn fit_dispersion(terms: &TermSet, data: &Dataset, response: &[f64], prior: &[f64]) -> Result<ComponentFit> {
    let u = model_matrix(terms, data)?;
    let ones = vec![1.0; data.len()];
    let opts = GlmOptions::default().with_dispersion(Dispersion::Fixed(DISPERSION_SCALE));
    let glm = irls_fit(Family::Gamma, Link::Log, &u, response, prior, &ones, &opts)
        .map_err(|e| name_singular(e, terms))?;
    Ok(ComponentFit { terms: terms.clone(), glm })
}

/// d*_i = d_i / (1 - h_i), with h capped below 1.
pub fn standardized_deviance(d: &[f64], h: &[f64]) -> Vec<f64> {
    d.iter().zip(h).map(|(d, h)| d / (1.0 - h.min(HAT_CAP))).collect()
}

/// Floors a dispersion response at 1e-10 times its mean.
pub fn floor_response(r: &[f64]) -> Vec<f64> {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let floor = 1e-10 * mean.max(f64::MIN_POSITIVE);
    r.iter().map(|v| v.max(floor)).collect()
}

/// Adjusted extended quasi-likelihood sum -1/2 [d*/phi + log(2 pi phi V(y))].
pub fn q_plus(d_star: &[f64], phi: &[f64], vy: &[f64]) -> Result<f64> {
    if d_star.len() != phi.len() || phi.len() != vy.len() {
        return Err(Error::Dimension("d*, phi and V(y) lengths differ".into()));
    }
    let mut q = 0.0;
    for i in 0..phi.len() {
        if !(phi[i] > 0.0) || !(vy[i] > 0.0) {
            return Err(Error::Domain(format!("phi = {} and V(y) = {} must be positive", phi[i], vy[i])));
        }
        q += -0.5 * (d_star[i] / phi[i] + (2.0 * std::f64::consts::PI * phi[i] * vy[i]).ln());
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOptions {
    pub max_outer: usize,
    pub tol: f64,
    /// Return the last iterate instead of an error when the loop runs out.
    pub allow_unconverged: bool,
    pub disp_weights: DispersionWeights,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions { max_outer: 25, tol: 1e-8, allow_unconverged: false, disp_weights: DispersionWeights::Unit }
    }
}

impl JointOptions {
    /// Mean under phi = 1, one dispersion fit, and a mean refit.
    pub fn single_pass() -> Self {
        JointOptions { max_outer: 1, allow_unconverged: true, ..JointOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointFit {
    pub mean_terms: TermSet,
    pub disp_terms: TermSet,
    pub mean: GlmFit,
    pub dispersion: GlmFit,
    pub phi: Vec<f64>,
    /// Standardized deviances of the final mean fit.
    pub d_star: Vec<f64>,
    pub q_plus: f64,
    pub q_history: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl JointFit {
    pub fn mean_component(&self) -> ComponentFit {
        ComponentFit { terms: self.mean_terms.clone(), glm: self.mean.clone() }
    }

    pub fn dispersion_component(&self) -> ComponentFit {
        ComponentFit { terms: self.disp_terms.clone(), glm: self.dispersion.clone() }
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Total parameter count p + q.
    pub fn kappa(&self) -> usize {
        self.mean_terms.len() + self.disp_terms.len()
    }

    pub(crate) fn assemble(mean: ComponentFit, disp: ComponentFit, history: Vec<f64>, converged: bool) -> Result<JointFit> {
        let d_star = mean.standardized_deviance();
        let vy: Vec<f64> = mean.glm.y.iter().map(|y| mean.glm.family.variance(*y)).collect();
        let phi = disp.glm.mu.clone();
        let q = q_plus(&d_star, &phi, &vy)?;
        let outer = history.len().max(1);
        Ok(JointFit {
            mean_terms: mean.terms,
            disp_terms: disp.terms,
            mean: mean.glm,
            dispersion: disp.glm,
            phi,
            d_star,
            q_plus: q,
            q_history: if history.is_empty() { vec![q] } else { history },
            outer_iterations: outer,
            converged,
        })
    }
}

/// Alternates the mean fit (weights 1/phi) and the Gamma/log dispersion fit
/// on d* until Q+ changes by less than `opts.tol`, then refits the mean under
/// the final phi. The first mean fit uses phi = 1.
pub fn fit_joint(
    mean_terms: &TermSet,
    disp_terms: &TermSet,
    data: &Dataset,
    family: Family,
    link: Link,
    opts: &JointOptions,
) -> Result<JointFit> {
    let n = data.len();
    let vy: Vec<f64> = data.y.iter().map(|y| family.variance(*y)).collect();
    let mut phi = vec![1.0; n];
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut disp = None;
    for _ in 0..opts.max_outer.max(1) {
        let mean = fit_mean(mean_terms, data, family, link, &phi)?;
        let d_star = mean.standardized_deviance();
        let response = floor_response(&d_star);
        let prior = opts.disp_weights.weights(&mean.glm.hat);
        let d = fit_dispersion(disp_terms, data, &response, &prior)?;
        phi = d.glm.mu.clone();
        let q = q_plus(&d_star, &phi, &vy)?;
        let done = history.last().is_some_and(|prev| (q - prev).abs() < opts.tol);
        history.push(q);
        disp = Some(d);
        if done {
            converged = true;
            break;
        }
    }
    if !converged && !opts.allow_unconverged {
        return Err(Error::OuterNoConvergence { history });
    }
    let mean = fit_mean(mean_terms, data, family, link, &phi)?;
    JointFit::assemble(mean, disp.expect("at least one outer iteration"), history, converged)
}

/// Penalty multiplier lambda_n in the R~2 criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    One,
    SqrtN,
    LogN,
}

impl Penalty {
    pub fn value(self, n: usize) -> f64 {
        match self {
            Penalty::One => 1.0,
            Penalty::SqrtN => (n as f64).sqrt(),
            Penalty::LogN => (n as f64).ln(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Penalty::One => "1",
            Penalty::SqrtN => "sqrt(n)",
            Penalty::LogN => "log(n)",
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(Penalty::One),
            "sqrt(n)" | "sqrtn" | "sqrt" => Ok(Penalty::SqrtN),
            "log(n)" | "logn" | "log" => Ok(Penalty::LogN),
            _ => Err(Error::Argument(format!("unknown penalty `{s}`"))),
        }
    }
}

/// Small-sample penalty 2 k n / (n - k - 1).
pub fn corrected_penalty(k: usize, n: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::Degenerate { n, k: k as f64 });
    }
    Ok(2.0 * k as f64 * n as f64 / (n - k - 1) as f64)
}

/// -2 Q+ + 2 kappa n / (n - kappa - 1) with kappa = p + q.
pub fn eaic(joint: &JointFit) -> Result<f64> {
    eaic_value(joint.q_plus, joint.kappa(), joint.n())
}

pub fn eaic_value(q_plus: f64, kappa: usize, n: usize) -> Result<f64> {
    Ok(-2.0 * q_plus + corrected_penalty(kappa, n)?)
}

/// Gamma log-likelihood of the dispersion responses: shape prior_i / 2, mean phi_i.
pub fn dispersion_loglik(disp: &GlmFit) -> f64 {
    (0..disp.n())
        .map(|i| {
            let k = disp.prior_weights[i] / DISPERSION_SCALE;
            let r = disp.y[i];
            let m = disp.mu[i];
            k * k.ln() - ln_gamma(k) + (k - 1.0) * r.ln() - k * m.ln() - k * r / m
        })
        .sum()
}

/// -2 log L + 2 q n / (n - q - 1) for the dispersion model.
pub fn aicc_dispersion(disp: &GlmFit) -> Result<f64> {
    Ok(-2.0 * dispersion_loglik(disp) + corrected_penalty(disp.p(), disp.n())?)
}

/// Metric for the arc-length distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArcMetric {
    /// sqrt(1 + phi^2 V'(t)^2) under the mean family.
    Mean { family: Family, phi: f64 },
    /// sqrt(1 + V'(t)^2) with the Gamma variance V(t) = t^2.
    Dispersion,
}

// antiderivative of sqrt(1 + c^2 t^2)
fn arc_primitive(t: f64, c: f64) -> f64 {
    if c == 0.0 {
        return t;
    }
    let ct = c * t;
    0.5 * t * (1.0 + ct * ct).sqrt() + ct.asinh() / (2.0 * c)
}

/// Squared arc length of the variance curve between a and b.
pub fn arc_length_sq(metric: ArcMetric, a: f64, b: f64) -> f64 {
    let c = match metric {
        ArcMetric::Mean { family: Family::Normal, .. } => 0.0,
        ArcMetric::Mean { family: Family::Gamma, phi } => 2.0 * phi,
        ArcMetric::Dispersion => 2.0,
    };
    let l = arc_primitive(b, c) - arc_primitive(a, c);
    l * l
}

/// Distance used by R~2_d between a response and its fitted value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DispersionMetric {
    /// (a - b)^2, the Normal mean-family metric.
    #[default]
    Squared,
    /// Arc length under the Gamma variance function.
    GammaArc,
}

impl DispersionMetric {
    fn dist(self, a: f64, b: f64) -> f64 {
        match self {
            DispersionMetric::Squared => (a - b) * (a - b),
            DispersionMetric::GammaArc => arc_length_sq(ArcMetric::Dispersion, a, b),
        }
    }
}

fn check_penalty(n: usize, lambda: f64, k: usize) -> Result<()> {
    if n as f64 <= lambda * k as f64 {
        return Err(Error::Degenerate { n, k: lambda * k as f64 });
    }
    Ok(())
}

/// Penalized R~2 for the mean model; higher is better.
///
/// Residual and total sums are weighted by prior_i / phi_i. The total is
/// taken about the weighted mean when the terms contain `1` and about zero
/// otherwise.
pub fn r2_tilde_mean(fit: &ComponentFit, lambda: f64) -> Result<f64> {
    let g = &fit.glm;
    let n = g.n();
    check_penalty(n, lambda, fit.k())?;
    let w: Vec<f64> = (0..n).map(|i| g.prior_weights[i] / g.phi[i]).collect();
    let reference = if fit.terms.has_constant() {
        w.iter().zip(&g.y).map(|(w, y)| w * y).sum::<f64>() / w.iter().sum::<f64>()
    } else {
        0.0
    };
    let mut resid = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let metric = ArcMetric::Mean { family: g.family, phi: g.phi[i] };
        resid += w[i] * arc_length_sq(metric, g.y[i], g.mu[i]);
        total += w[i] * arc_length_sq(metric, g.y[i], reference);
    }
    Ok(1.0 - (resid / (n as f64 - lambda * fit.k() as f64)) / (total / (n as f64 - 1.0)))
}

/// Penalized R~2 for the dispersion model, about the mean response.
pub fn r2_tilde_disp(fit: &ComponentFit, lambda: f64, metric: DispersionMetric) -> Result<f64> {
    let g = &fit.glm;
    let n = g.n();
    check_penalty(n, lambda, fit.k())?;
    let mean = g.y.iter().sum::<f64>() / n as f64;
    let resid: f64 = (0..n).map(|i| metric.dist(g.y[i], g.mu[i])).sum();
    let total: f64 = g.y.iter().map(|r| metric.dist(*r, mean)).sum();
    Ok(1.0 - (resid / (n as f64 - lambda * fit.k() as f64)) / (total / (n as f64 - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df1: f64,
    /// Denominator degrees of freedom; absent for chi-square tests.
    pub df2: Option<f64>,
    pub p_value: f64,
}

fn check_nested(restricted: &ComponentFit, full: &ComponentFit) -> Result<()> {
    if !restricted.terms.is_subset(&full.terms) {
        return Err(Error::Argument(format!(
            "{} is not nested in {}",
            restricted.terms, full.terms
        )));
    }
    if restricted.n() != full.n() {
        return Err(Error::Dimension("nested fits have different sample sizes".into()));
    }
    Ok(())
}

/// F test on standardized deviances D* = sum d*/phi.
pub fn f_test(restricted: &ComponentFit, full: &ComponentFit) -> Result<TestResult> {
    check_nested(restricted, full)?;
    let (c, d, n) = (restricted.k(), full.k(), full.n());
    if d == c {
        return Err(Error::Argument("F test needs the full model to have more terms".into()));
    }
    if n <= d {
        return Err(Error::Degenerate { n, k: d as f64 });
    }
    let dc = restricted.dstar_total();
    let dd = full.dstar_total();
    let df1 = (d - c) as f64;
    let df2 = (n - d) as f64;
    let f = ((dc - dd) / df1) / (dd / df2);
    Ok(TestResult { statistic: f, df1, df2: Some(df2), p_value: f_sf(f, df1, df2) })
}

/// Analysis of deviance for nested dispersion fits: (D_c - D_d) / 2 on d - c df.
pub fn chisq_test(restricted: &ComponentFit, full: &ComponentFit) -> Result<TestResult> {
    check_nested(restricted, full)?;
    let df = (full.k() - restricted.k()) as f64;
    let chi = (restricted.glm.deviance - full.glm.deviance) / DISPERSION_SCALE;
    let p = if df == 0.0 { 1.0 } else { chi2_sf(chi, df) };
    Ok(TestResult { statistic: if df == 0.0 { 0.0 } else { chi }, df1: df, df2: None, p_value: p })
}
