use std::path::PathBuf;

/// Errors raised anywhere in the pricing engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model or estimator parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// What is wrong with it.
        reason: String,
    },

    /// A state argument is outside the domain of the function (e.g. a non-positive rate).
    #[error("domain error in {context}: {reason}")]
    Domain {
        /// Operation that rejected its input.
        context: &'static str,
        /// Description of the offending value.
        reason: String,
    },

    /// A numerical procedure failed (factorization, singular matrix, ...).
    #[error("numerical failure in {context}: {reason}")]
    Numeric {
        /// Operation that failed.
        context: &'static str,
        /// Diagnostic report.
        reason: String,
    },

    /// Exercise-policy calibration could not be carried out.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A configuration or policy file could not be parsed.
    #[error("{path}:{line}: {reason}")]
    Config {
        /// File being read.
        path: PathBuf,
        /// 1-based line number (0 when the problem is not tied to a line).
        line: usize,
        /// What is wrong.
        reason: String,
    },

    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(context: &'static str, reason: impl Into<String>) -> Self {
        Self::Domain {
            context,
            reason: reason.into(),
        }
    }

    pub(crate) fn numeric(context: &'static str, reason: impl Into<String>) -> Self {
        Self::Numeric {
            context,
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
