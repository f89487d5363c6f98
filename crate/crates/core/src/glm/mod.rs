//! Generalized linear models: weighted least squares, Fisher scoring, Wald
//! tables and per-observation diagnostics.

mod diagnostics;
mod family;
mod irls;
mod wald;
mod wls;

pub use diagnostics::{diagnostics, Diagnostic};
pub use family::{Dispersion, Family, Link};
pub use irls::{irls_fit, GlmFit, GlmOptions};
pub use wald::{wald_table, WaldRow, WaldScale};
pub use wls::{wls_solve, WlsSolution, HAT_CAP};
