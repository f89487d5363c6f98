use serde::{Deserialize, Serialize};

use super::irls::GlmFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub index: usize,
    pub fitted: f64,
    pub leverage: f64,
    pub deviance_residual: f64,
    pub std_deviance_residual: f64,
    pub cooks_distance: f64,
}

/// Per-observation residuals, leverage and Cook's distance.
///
/// The standardized residual divides sign(y - mu) sqrt(w d / phi) by
/// sqrt(scale (1 - h)), with the scale taken from [`GlmFit::scale`].
pub fn diagnostics(fit: &GlmFit) -> Vec<Diagnostic> {
    let scale = fit.scale();
    let p = fit.p() as f64;
    (0..fit.n())
        .map(|i| {
            let sign = if fit.y[i] >= fit.mu[i] { 1.0 } else { -1.0 };
            let d = fit.dev_components[i];
            let raw = sign * d.sqrt();
            let h = fit.hat[i];
            let std = sign * (fit.prior_weights[i] * d / fit.phi[i] / (scale * (1.0 - h))).sqrt();
            let cooks = std * std * h / (p * (1.0 - h));
            Diagnostic {
                index: i,
                fitted: fit.mu[i],
                leverage: h,
                deviance_residual: if d == 0.0 { 0.0 } else { raw },
                std_deviance_residual: if d == 0.0 { 0.0 } else { std },
                cooks_distance: cooks,
            }
        })
        .collect()
}
