use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::family::{Dispersion, Family, Link};
use super::wls::wls_solve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dispersion: Dispersion,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions { max_iter: 50, rel_tol: 1e-10, abs_tol: 1e-12, dispersion: Dispersion::Free }
    }
}

impl GlmOptions {
    pub fn with_dispersion(mut self, dispersion: Dispersion) -> Self {
        self.dispersion = dispersion;
        self
    }
}

/// One fitted GLM. Vectors are indexed by observation, `cov_unscaled` by coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: Family,
    pub link: Link,
    pub dispersion: Dispersion,
    pub coefficients: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub hat: Vec<f64>,
    /// Unit deviances d_i, before prior weights.
    pub dev_components: Vec<f64>,
    /// Sum of prior_i * d_i.
    pub deviance: f64,
    /// (X'WX)^-1 with the final working weights.
    pub cov_unscaled: Vec<Vec<f64>>,
    pub working_weights: Vec<f64>,
    pub prior_weights: Vec<f64>,
    /// Per-observation dispersion entering the working weights.
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Total deviance after every scoring step.
    pub deviance_trace: Vec<f64>,
}

impl GlmFit {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// Pearson statistic sum prior (y - mu)^2 / (phi V(mu)).
    pub fn pearson_chi2(&self) -> f64 {
        (0..self.n())
            .map(|i| {
                let r = self.y[i] - self.mu[i];
                self.prior_weights[i] * r * r / (self.phi[i] * self.family.variance(self.mu[i]))
            })
            .sum()
    }

    /// Scale estimate: the fixed value, or Pearson chi^2 / (n - p).
    pub fn scale(&self) -> f64 {
        match self.dispersion {
            Dispersion::Fixed(c) => c,
            Dispersion::Free => self.pearson_chi2() / (self.n() - self.p()) as f64,
        }
    }
}

/// Fisher scoring for a GLM with prior weights and a known per-observation
/// dispersion `phi`, so that w_i = prior_i / phi_i * (dmu/deta)^2 / V(mu).
pub fn irls_fit(
    family: Family,
    link: Link,
    x: &DMatrix<f64>,
    y: &[f64],
    prior_weights: &[f64],
    phi: &[f64],
    opts: &GlmOptions,
) -> Result<GlmFit> {
    let n = x.nrows();
    if y.len() != n || prior_weights.len() != n || phi.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows; y, prior weights and phi have {}, {}, {}",
            y.len(),
            prior_weights.len(),
            phi.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !family.valid_response(*v)) {
        return Err(Error::Domain(format!("response {i} = {} outside the {} domain", y[i], family.name())));
    }
    if let Some(i) = phi.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("dispersion {i} = {} is not positive", phi[i])));
    }

    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut mu: Vec<f64> = y.iter().map(|v| family.start_mean(*v, ybar)).collect();
    let mut eta: Vec<f64> = mu.iter().map(|m| link.link(*m)).collect();
    let exact_one_step = family == Family::Normal && link == Link::Identity;

    let deviance_of = |mu: &[f64]| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..n {
            total += prior_weights[i] * family.deviance_component(y[i], mu[i])?;
        }
        Ok(total)
    };

    let mut trace = Vec::new();
    let mut beta_prev: Option<DVector<f64>> = None;
    let mut dev_prev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut solution = None;
    let mut weights = DVector::zeros(n);

    while iterations < opts.max_iter {
        iterations += 1;
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let g = link.mu_eta(eta[i]);
            z[i] = eta[i] + (y[i] - mu[i]) / g;
            weights[i] = prior_weights[i] / phi[i] * g * g / family.variance(mu[i]);
        }
        let sol = wls_solve(x, &z, &weights)?;
        let mut beta = sol.coefficients.clone();
        let mut eta_new: Vec<f64> = (x * &beta).iter().cloned().collect();
        let mut mu_new: Vec<f64> = eta_new.iter().map(|e| link.inverse(*e)).collect();
        let mut dev = if mu_new.iter().all(|m| family.valid_mean(*m)) {
            deviance_of(&mu_new).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };

        // step halving keeps the deviance monotone once a previous iterate exists
        if let Some(prev) = &beta_prev {
            let mut halvings = 0;
            while !(dev <= dev_prev * (1.0 + 1e-12) + opts.abs_tol) && halvings < 40 {
                beta = (&beta + prev) * 0.5;
                eta_new = (x * &beta).iter().cloned().collect();
                mu_new = eta_new.iter().map(|e| link.inverse(*e)).collect();
                dev = if mu_new.iter().all(|m| family.valid_mean(*m)) {
                    deviance_of(&mu_new).unwrap_or(f64::INFINITY)
                } else {
                    f64::INFINITY
                };
                halvings += 1;
            }
        }
        if !dev.is_finite() {
            return Err(Error::Domain("fitted means left the family domain".into()));
        }

        eta = eta_new;
        mu = mu_new;
        trace.push(dev);
        let delta = (dev - dev_prev).abs();
        beta_prev = Some(beta.clone());
        solution = Some((beta, sol));
        if exact_one_step || delta <= opts.rel_tol * dev.abs() || delta < opts.abs_tol {
            converged = true;
            break;
        }
        dev_prev = dev;
    }

    let (beta, sol) = solution.expect("at least one iteration");
    // hat values and covariance at the final iterate
    for i in 0..n {
        let g = link.mu_eta(eta[i]);
        weights[i] = prior_weights[i] / phi[i] * g * g / family.variance(mu[i]);
    }
    let zfin = DVector::from_iterator(
        n,
        (0..n).map(|i| eta[i] + (y[i] - mu[i]) / link.mu_eta(eta[i])),
    );
    let fin = if exact_one_step { sol } else { wls_solve(x, &zfin, &weights)? };

    let dev_components = (0..n)
        .map(|i| family.deviance_component(y[i], mu[i]))
        .collect::<Result<Vec<_>>>()?;
    let deviance = dev_components.iter().zip(prior_weights).map(|(d, w)| d * w).sum();
    let p = beta.len();
    let fit = GlmFit {
        family,
        link,
        dispersion: opts.dispersion,
        coefficients: beta.iter().cloned().collect(),
        eta,
        mu,
        y: y.to_vec(),
        hat: fin.hat.iter().cloned().collect(),
        dev_components,
        deviance,
        cov_unscaled: (0..p).map(|i| (0..p).map(|j| fin.cov_unscaled[(i, j)]).collect()).collect(),
        working_weights: weights.iter().cloned().collect(),
        prior_weights: prior_weights.to_vec(),
        phi: phi.to_vec(),
        iterations,
        converged,
        deviance_trace: trace,
    };
    if !converged {
        return Err(Error::NoConvergence { iterations, last: Box::new(fit) });
    }
    Ok(fit)
}
