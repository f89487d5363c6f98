use serde::{Deserialize, Serialize};

use super::family::Dispersion;
use super::irls::GlmFit;
use crate::special::t_two_sided;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// Scale multiplying the unscaled covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WaldScale {
    /// Pearson chi^2 / (n - p).
    Pearson,
    /// The family's fixed dispersion, or 1 when it is free.
    Model,
    Fixed(f64),
}

/// Coefficient table with t tests on n - p degrees of freedom.
pub fn wald_table(fit: &GlmFit, names: &[String], scale: WaldScale) -> Vec<WaldRow> {
    let s = match scale {
        WaldScale::Pearson => fit.pearson_chi2() / (fit.n() - fit.p()) as f64,
        WaldScale::Model => match fit.dispersion {
            Dispersion::Fixed(c) => c,
            Dispersion::Free => 1.0,
        },
        WaldScale::Fixed(c) => c,
    };
    let df = (fit.n() - fit.p()) as f64;
    fit.coefficients
        .iter()
        .enumerate()
        .map(|(j, est)| {
            let se = (s * fit.cov_unscaled[j][j]).sqrt();
            let t = est / se;
            WaldRow {
                term: names.get(j).cloned().unwrap_or_else(|| format!("b{j}")),
                estimate: *est,
                std_error: se,
                t_value: t,
                p_value: t_two_sided(t, df),
            }
        })
        .collect()
}
