use thiserror::Error;

use crate::dictionary::DictionaryError;
use crate::harness::HarnessError;
use crate::reasoning::ReasoningError;
use crate::recovery::RecoveryError;
use crate::sets::SetError;
use crate::simplex::SimplexError;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed files, unknown tokens, violated preconditions.
    Validation,
    /// A solver failed to converge or hit a numerical breakdown.
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dictionary(e) => e.class(),
            Error::Recovery(e) => e.class(),
            Error::Set(e) => e.class(),
            Error::Simplex(e) => e.class(),
            Error::Reasoning(e) => e.class(),
            Error::Harness(e) => e.class(),
        }
    }
}
