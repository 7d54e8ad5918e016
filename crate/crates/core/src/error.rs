use thiserror::Error;

use crate::duality::FindCertResiduals;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("format error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, msg: String },

    #[error("degenerate data: points {i} and {j} coincide but carry different labels")]
    DegenerateData { i: usize, j: usize },

    #[error("cannot stratify: class {label} has fewer than 2 points")]
    Stratify { label: i64 },

    #[error("infeasible: delta {delta} exceeds the minimum cross-class distance {min_distance}")]
    Infeasible { delta: f64, min_distance: f64 },

    #[error("no constraints: the constraint set is empty")]
    NoConstraints,

    #[error("degenerate contacts: the contact Gram sum vanishes")]
    DegenerateContacts,

    #[error("degenerate LDA: class centroids coincide")]
    DegenerateLda,

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("no dual certificate found after {iterations} iterations ({residuals})")]
    CertificateNotFound {
        iterations: usize,
        residuals: FindCertResiduals,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
