use thiserror::Error;

use crate::glm::GlmFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular design: column {index} ({name}) is linearly dependent on earlier columns")]
    Singular { index: usize, name: String },

    #[error("IRLS did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, last: Box<GlmFit> },

    #[error("joint fit did not converge after {} outer iterations", history.len())]
    OuterNoConvergence { history: Vec<f64> },

    #[error("degenerate penalty: n = {n} too small for {k} parameters")]
    Degenerate { n: usize, k: f64 },

    #[error("unsupported model structure at term `{term}`: {reason}")]
    Unsupported { term: String, reason: String },

    #[error("data error{}: {msg}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, msg: String },
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data { row: None, msg: msg.into() }
    }

    pub(crate) fn data_at(row: usize, msg: impl Into<String>) -> Self {
        Error::Data { row: Some(row), msg: msg.into() }
    }

    /// True for failures caused by the numbers rather than by the inputs' shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NoConvergence { .. }
                | Error::OuterNoConvergence { .. }
                | Error::Degenerate { .. }
                | Error::Domain(_)
        )
    }
}
