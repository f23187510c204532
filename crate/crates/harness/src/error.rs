use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] visilin_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 2 for bad input, 3 for numerical trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(visilin_core::Error::NumericalDegeneracy(_)) => 3,
            HarnessError::Config(_) | HarnessError::Core(_) => 2,
            HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
