use std::fmt;

use sphere_ot::Error as LibError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Lib(LibError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "cli.usage",
            CliError::Io(_) => "cli.io",
            CliError::Lib(e) => e.code(),
        }
    }

    /// Bad input is a usage error; everything else from the library is a
    /// numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Lib(
                LibError::InvalidInput(_)
                | LibError::InvalidGrid(_)
                | LibError::DimensionMismatch { .. }
                | LibError::DimensionTooSmall(_)
                | LibError::NotUnitNorm(_)
                | LibError::InfeasibleWeights(_)
                | LibError::SizeCap { .. },
            ) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => write!(f, "error[{}]: {m}", self.code()),
            CliError::Lib(e) => write!(f, "error[{}]: {e}", self.code()),
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
