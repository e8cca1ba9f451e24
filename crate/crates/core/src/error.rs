use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, negative radii, bad indices.
    #[error("invalid input: {0}")]
    Input(String),
    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),
    /// A brute-force validator was asked to run beyond its size guard.
    #[error("scale guard: {0}")]
    Scale(String),
    /// An iterative routine failed to certify its accuracy target.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Internal inconsistency between cooperating components.
    #[error("internal error: {0}")]
    Internal(String),
    /// The sample stream ended before the requested horizon.
    #[error("stream exhausted after {completed} of {horizon} rounds")]
    Truncated { completed: usize, horizon: usize },
    /// An error raised while executing a specific learner round.
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Scale(_) => 3,
            Error::Numeric(_) | Error::Internal(_) | Error::Truncated { .. } | Error::Io(_) => 4,
            Error::Round { source, .. } => source.exit_code(),
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::Scale(_) => "scale",
            Error::Numeric(_) => "numeric",
            Error::Internal(_) => "internal",
            Error::Truncated { .. } => "truncated",
            Error::Round { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Input(format!(
            "{what} has dimension {got}, expected {want}"
        )));
    }
    Ok(())
}
