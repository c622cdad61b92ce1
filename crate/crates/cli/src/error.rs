use std::fmt;

/// Process exit codes.
pub mod code {
    pub const CHECK_FAILED: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
}

/// A failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: code::INPUT,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        CliError {
            code: code::CHECK_FAILED,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        CliError {
            code: code::INFEASIBLE,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        CliError::input(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<pairrank::Error> for CliError {
    fn from(err: pairrank::Error) -> Self {
        use pairrank::Error as E;
        let code = match err {
            E::Numerical(_) | E::Divergence { .. } => code::NUMERICAL,
            E::Input(_) | E::DimensionMismatch { .. } | E::Infeasible(_) => code::INPUT,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
