//! Unconditional mean and variance of a Normal/identity joint model when the
//! process variables are independent random noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Family, Link};
use crate::terms::Term;

/// Mean and variance of one noise variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Independent noise variables z1..zr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDistribution {
    pub vars: Vec<NoiseMoments>,
}

impl NoiseDistribution {
    pub fn new(vars: Vec<NoiseMoments>) -> Result<Self> {
        if let Some(v) = vars.iter().find(|v| !(v.variance >= 0.0)) {
            return Err(Error::Argument(format!("noise variance {} is negative", v.variance)));
        }
        Ok(NoiseDistribution { vars })
    }

    fn get(&self, j: usize) -> Result<NoiseMoments> {
        self.vars
            .get(j)
            .copied()
            .ok_or_else(|| Error::Argument(format!("no moments given for z{}", j + 1)))
    }
}

/// Polynomial over the mixture variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MixturePolynomial {
    pub terms: Vec<(Term, f64)>,
}

impl MixturePolynomial {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut v = 0.0;
        for (t, c) in &self.terms {
            v += c * t.eval(x, &[])?;
        }
        Ok(v)
    }

    fn from_map(map: BTreeMap<Term, f64>, order: &[Term]) -> Self {
        MixturePolynomial {
            terms: order.iter().map(|t| (t.clone(), map[t])).collect(),
        }
    }
}

// accumulates coefficients while remembering first-seen order
#[derive(Default)]
struct Accumulator {
    map: BTreeMap<Term, f64>,
    order: Vec<Term>,
}

impl Accumulator {
    fn add(&mut self, t: Term, c: f64) {
        if !self.map.contains_key(&t) {
            self.order.push(t.clone());
        }
        *self.map.entry(t).or_insert(0.0) += c;
    }

    fn finish(self) -> MixturePolynomial {
        MixturePolynomial::from_map(self.map, &self.order)
    }
}

/// Variance contribution of one noise variable: variance * poly(x)^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseContribution {
    pub variable: usize,
    pub variance: f64,
    pub slope: MixturePolynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentModel {
    pub mean: MixturePolynomial,
    /// Log-linear dispersion predictor; Var contains exp of it.
    pub log_dispersion: MixturePolynomial,
    pub noise: Vec<NoiseContribution>,
}

impl MomentModel {
    pub fn mean_at(&self, x: &[f64]) -> Result<f64> {
        self.mean.eval(x)
    }

    /// exp(dispersion predictor) + sum_j sigma_j^2 * slope_j(x)^2.
    pub fn variance_at(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.log_dispersion.eval(x)?.exp();
        for c in &self.noise {
            let s = c.slope.eval(x)?;
            v += c.variance * s * s;
        }
        Ok(v)
    }
}

fn check_mean_term(t: &Term) -> Result<Option<usize>> {
    let procs = t.process_exponents();
    match procs.len() {
        0 => Ok(None),
        1 => {
            let (j, e) = procs.iter().next().expect("one entry");
            if *e != 1 {
                return Err(Error::Unsupported {
                    term: t.to_string(),
                    reason: "noise variables must enter linearly".into(),
                });
            }
            Ok(Some(*j))
        }
        _ => Err(Error::Unsupported {
            term: t.to_string(),
            reason: "products of noise variables are not supported".into(),
        }),
    }
}

/// E(Y): each noise factor z_j replaced by its mean.
pub fn unconditional_mean(mean_model: &[(Term, f64)], noise: &NoiseDistribution) -> Result<MixturePolynomial> {
    let mut acc = Accumulator::default();
    for (t, c) in mean_model {
        match check_mean_term(t)? {
            None => acc.add(t.clone(), *c),
            Some(j) => acc.add(t.mixture_part(), c * noise.get(j)?.mean),
        }
    }
    Ok(acc.finish())
}

/// Var(Y) = E[Var(Y|Z)] + Var[E(Y|Z)] for a Normal/identity mean linear in
/// each noise variable and a noise-free log-linear dispersion model.
pub fn unconditional_variance(
    mean_model: &[(Term, f64)],
    disp_model: &[(Term, f64)],
    family: Family,
    link: Link,
    noise: &NoiseDistribution,
) -> Result<MomentModel> {
    if family != Family::Normal || link != Link::Identity {
        return Err(Error::Unsupported {
            term: "mean model".into(),
            reason: "moment propagation needs a Normal mean with identity link".into(),
        });
    }
    let mut disp = Accumulator::default();
    for (t, c) in disp_model {
        if t.has_process() {
            return Err(Error::Unsupported {
                term: t.to_string(),
                reason: "dispersion terms may not contain noise variables".into(),
            });
        }
        disp.add(t.clone(), *c);
    }
    let mut slopes: BTreeMap<usize, Accumulator> = BTreeMap::new();
    for (t, c) in mean_model {
        if let Some(j) = check_mean_term(t)? {
            slopes.entry(j).or_default().add(t.mixture_part(), *c);
        }
    }
    let mut contributions = Vec::new();
    for (j, acc) in slopes {
        contributions.push(NoiseContribution { variable: j, variance: noise.get(j)?.variance, slope: acc.finish() });
    }
    Ok(MomentModel {
        mean: unconditional_mean(mean_model, noise)?,
        log_dispersion: disp.finish(),
        noise: contributions,
    })
}
