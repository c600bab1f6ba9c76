use std::fmt;

/// Failure of a CLI command, carrying its process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad flags, missing input files. Exit status 2.
    Usage(String),
    /// Malformed ballots, model files or observations. Exit status 3.
    Data(String),
    /// Conditioning on an observation with probability zero. Exit status 4.
    ZeroEvidence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::ZeroEvidence(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::ZeroEvidence(m) => write!(f, "zero evidence: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<riffle_core::Error> for CliError {
    fn from(e: riffle_core::Error) -> Self {
        match e {
            riffle_core::Error::ZeroEvidence { .. } => CliError::ZeroEvidence(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a whole input file; a missing or unreadable file is a usage error.
pub fn read_input(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_output(path: &std::path::Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}
