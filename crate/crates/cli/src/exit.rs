use std::fmt;
use std::process::ExitCode;

use emcoord_core::ledger::LedgerError;

/// Process exit codes. 2 matches clap's own code for bad arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Failure = 1,
    Usage = 2,
    /// Cryptographic verification or chain integrity failed.
    Reject = 3,
    /// A ledger rule refused the operation.
    Policy = 4,
    Quorum = 5,
    NotFound = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        CliError {
            exit,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(Exit::Usage, message)
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError::new(Exit::Failure, message)
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        use LedgerError as L;
        let exit = match &e {
            L::UnknownEvent(_) => Exit::NotFound,
            L::InvalidRiskLevel(_) | L::InvalidLocation | L::InvalidWorker(_) => Exit::Usage,
            L::QuorumNotReached { .. }
            | L::DuplicateVote(_)
            | L::UnknownValidator(_)
            | L::BadVote(_) => Exit::Quorum,
            L::InvalidChain(_) => Exit::Reject,
            _ => Exit::Policy,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::failure(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
