use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Normal,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Log,
}

/// How the scale parameter of a family is treated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dispersion {
    Free,
    Fixed(f64),
}

impl Family {
    /// V(mu).
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Normal => 1.0,
            Family::Gamma => mu * mu,
        }
    }

    /// V'(mu).
    pub fn variance_deriv(self, mu: f64) -> f64 {
        match self {
            Family::Normal => 0.0,
            Family::Gamma => 2.0 * mu,
        }
    }

    pub fn valid_mean(self, mu: f64) -> bool {
        match self {
            Family::Normal => mu.is_finite(),
            Family::Gamma => mu.is_finite() && mu > 0.0,
        }
    }

    pub fn valid_response(self, y: f64) -> bool {
        self.valid_mean(y)
    }

    /// Unit deviance d = 2 * integral from mu to y of (y - t)/V(t) dt.
    pub fn deviance_component(self, y: f64, mu: f64) -> Result<f64> {
        match self {
            Family::Normal => Ok((y - mu) * (y - mu)),
            Family::Gamma => {
                if y <= 0.0 || mu <= 0.0 {
                    return Err(Error::Domain(format!(
                        "gamma deviance needs y > 0 and mu > 0 (y = {y}, mu = {mu})"
                    )));
                }
                let d = 2.0 * (-(y / mu).ln() + (y - mu) / mu);
                Ok(d.max(0.0))
            }
        }
    }

    pub(crate) fn start_mean(self, y: f64, ybar: f64) -> f64 {
        match self {
            Family::Normal => y,
            Family::Gamma => y.max(0.1 * ybar),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Gamma => "gamma",
        }
    }
}

impl Link {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Log => mu.ln(),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
        }
    }

    /// dmu/deta evaluated at eta.
    pub fn mu_eta(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => eta.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Log => "log",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "gamma" => Ok(Family::Gamma),
            _ => Err(Error::Argument(format!("unknown family `{s}`"))),
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Link::Identity),
            "log" => Ok(Link::Log),
            _ => Err(Error::Argument(format!("unknown link `{s}`"))),
        }
    }
}
