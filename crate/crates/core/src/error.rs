use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("forward solve failed for basis column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("unsupported format version {found} (expected {expected}); {hint}")]
    Version {
        found: u32,
        expected: u32,
        hint: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::GeometryMismatch(_) => 2,
            Error::Solver(_) | Error::Column { .. } => 3,
            Error::Invariant(_) => 4,
            Error::Cache(_) | Error::HashMismatch { .. } | Error::Version { .. } | Error::Io(_) => 1,
        }
    }
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
