use std::fmt;
use std::path::PathBuf;

use microgrid_core::netsim::NetsimError;
use thiserror::Error;

/// A scenario problem tied to where it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Located {
    pub file: String,
    /// 1-based line in the scenario file, when the field appears there.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
    /// The field was set on the command line rather than in the file.
    pub from_flag: bool,
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.from_flag, self.line) {
            (true, _) => write!(f, "{}: --set {}: {}", self.file, self.field, self.message),
            (false, Some(line)) => write!(f, "{}:{line}: {}: {}", self.file, self.field, self.message),
            (false, None) => write!(f, "{}: {}: {}", self.file, self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}:{line}:{column}: parse error: {message}")]
    Parse { file: String, line: usize, column: usize, message: String },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Located>),
    #[error("unknown attack {0:?}, expected one of: timing, chain, zkp")]
    UnknownAttack(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("no trace.jsonl in {}", .0.display())]
    TraceMissing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("simulation failed: {0}")]
    Run(#[from] NetsimError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn artifact(path: impl Into<PathBuf>) -> impl FnOnce(String) -> CliError {
        let path = path.into();
        move |message| CliError::Artifact { path, message }
    }

    /// Process exit status: 2 for bad input, 4 for missing or unreadable
    /// files, 1 for an internal simulation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Invalid(_) | CliError::UnknownAttack(_) | CliError::BadParam(_) => 2,
            CliError::TraceMissing(_) | CliError::Io { .. } | CliError::Artifact { .. } => 4,
            CliError::Run(_) => 1,
        }
    }
}
