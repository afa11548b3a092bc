use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed-form moment was requested outside the parameter range where
    /// its derivation holds, without opting into extrapolation.
    #[error("(N={n}, b={b}) outside the validity domain: {reason}")]
    Domain { n: usize, b: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("root bracketing failed for N={n}: {diagnostics}")]
    Bracketing { n: usize, diagnostics: String },

    #[error("{} of {total} trials failed (first indices: {:?})", failures.len(), failures.iter().take(8).map(|f| f.0).collect::<Vec<_>>())]
    TrialFailures {
        total: usize,
        failures: Vec<(usize, String)>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
