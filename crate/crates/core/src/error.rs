use std::path::PathBuf;

/// Error kinds surfaced by the library. The CLI maps them onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: not found")]
    NotFound { path: PathBuf },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Structurally invalid input (unknown ids, shape mismatches, bad ranges).
    #[error("invalid input: {0}")]
    Input(String),

    /// Scenario tree failed validation; one message per violated invariant.
    #[error("invalid scenario tree: {}", .0.join("; "))]
    InvalidTree(Vec<String>),

    #[error("unknown {kind} '{id}'")]
    Unknown { kind: &'static str, id: String },

    #[error("network error: {0}")]
    Network(String),

    #[error("no beneficiaries: every participant has non-positive benefit")]
    NoBeneficiaries,

    /// A numerical guard tripped while post-processing a solution.
    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("solver error: {0}")]
    Solver(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            id: id.into(),
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 input, 3 domain, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotFound { .. }
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Input(_)
            | Error::InvalidTree(_)
            | Error::Unknown { .. }
            | Error::Network(_) => 2,
            Error::NoBeneficiaries | Error::Numerical(_) => 3,
            Error::Solver(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound {
            path: path.to_path_buf(),
        }),
        Err(source) => Err(Error::Io {
            context: path.display().to_string(),
            source,
        }),
    }
}
