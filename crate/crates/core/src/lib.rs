//! Joint mean and dispersion modelling for mixture experiments.
//!
//! The crate fits pairs of generalized linear models (a Normal or Gamma mean
//! model and a Gamma/log dispersion model), runs criterion-guided forward
//! selection over Scheffé-type candidate terms, propagates fitted models over
//! random noise variables, and drives seeded Monte Carlo selection studies.
//!
//! ```
//! use jmmd::data::bread;
//! use jmmd::terms::TermSet;
//! use jmmd::joint::{fit_joint, JointOptions};
//! use jmmd::glm::{Family, Link};
//!
//! let data = bread();
//! let mean: TermSet = "x1,x2,x3,x1*z2,x3*z2,x2*z2,x1*x3*z1".parse().unwrap();
//! let disp: TermSet = "x1,x2,x3,x2*x3".parse().unwrap();
//! let fit = fit_joint(&mean, &disp, &data, Family::Normal, Link::Identity, &JointOptions::single_pass()).unwrap();
//! assert!((fit.mean.coefficients[0] - 488.961).abs() < 0.1);
//! ```

pub mod data;
pub mod error;
pub mod glm;
pub mod joint;
pub mod moments;
pub mod selection;
pub mod sim;
pub mod special;
pub mod terms;

pub use error::{Error, Result};
