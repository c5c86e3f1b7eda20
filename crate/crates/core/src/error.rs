use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("factorization failed: matrix is singular (smallest pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("class {class} has {available} usable neighbours, at least {required} needed")]
    Neighborhood {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("{0}")]
    Capability(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("every feature was removed as zero-variance")]
    EmptyFeatures,

    #[error("hyperparameter selection failed: {0}")]
    Selection(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the numerics or by asking a method for more
    /// than it can produce, as opposed to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Asymmetric { .. }
                | Error::Singular { .. }
                | Error::NoConvergence
                | Error::Capability(_)
                | Error::Neighborhood { .. }
                | Error::EmptyFeatures
                | Error::Selection(_)
        )
    }
}
