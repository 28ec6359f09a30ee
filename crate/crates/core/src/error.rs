use std::io;

/// Errors raised anywhere in the engine.
///
/// Each variant maps onto one of the process exit codes used by the command
/// line front end, see [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("protocol mismatch: dictionary fingerprint {dictionary:08x}, stack fingerprint {stack:08x}")]
    ProtocolMismatch { dictionary: u32, stack: u32 },

    #[error("unsupported protocol: {0}")]
    UnsupportedProtocol(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("checksum mismatch: {0}")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl Error {
    /// Wrap an I/O error so the message names the file involved.
    pub fn with_path(e: io::Error, path: &std::path::Path) -> Error {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Process exit code: 2 validation, 3 I/O or file integrity, 4 numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::ShapeMismatch(_)
            | Error::ProtocolMismatch { .. }
            | Error::UnsupportedProtocol(_) => EXIT_VALIDATION,
            Error::Io(_) | Error::Format(_) | Error::Checksum(_) => EXIT_IO,
            Error::Degenerate(_) => EXIT_NUMERIC,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
