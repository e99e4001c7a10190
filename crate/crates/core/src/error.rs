use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("incompatible jets: {0}")]
    Incompatible(String),

    #[error("singular division: divisor has constant term {0:e}")]
    SingularDivision(f64),

    #[error("composition point mismatch in slot {slot}: expected {expected}, inner jet starts at {found}")]
    CompositionPoint {
        slot: usize,
        expected: f64,
        found: f64,
    },

    #[error("jet order budget exhausted: {what} needs order {needed}, only {available} available")]
    Budget {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("accuracy failure: {0}")]
    Accuracy(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics (order budget, accuracy, degeneracy)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDivision(_)
                | Error::Budget { .. }
                | Error::Degenerate(_)
                | Error::Inconsistent(_)
                | Error::Accuracy(_)
        )
    }

    pub(crate) fn budget(what: impl Into<String>, needed: usize, available: usize) -> Self {
        Error::Budget {
            what: what.into(),
            needed,
            available,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
