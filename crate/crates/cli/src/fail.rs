//! Process-level failure classes with a stable exit-code contract:
//! 0 success, 2 configuration error, 3 verification failure (reported by the
//! verify driver, not through this enum), 4 numerical breakdown.

use landscape_core::error::CoreError;

#[derive(Debug)]
pub enum Fail {
    Config(String),
    Numeric(String),
}

impl Fail {
    pub fn code(&self) -> i32 {
        match self {
            Fail::Config(_) => 2,
            Fail::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Fail::Config(m) | Fail::Numeric(m) => m,
        }
    }
}

impl From<CoreError> for Fail {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidGrid(_)
            | CoreError::InvalidSpec(_)
            | CoreError::InvalidArgument(_)
            | CoreError::GridMismatch(_)
            | CoreError::NegativePotential { .. }
            | CoreError::Io(_)
            | CoreError::Format(_) => Fail::Config(e.to_string()),
            CoreError::NonFinite { .. }
            | CoreError::SingularMatrix { .. }
            | CoreError::ShiftOnEigenvalue { .. }
            | CoreError::SolverBreakdown { .. }
            | CoreError::TailUncontrolled(_)
            | CoreError::EigenSearch(_) => Fail::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Fail>;
