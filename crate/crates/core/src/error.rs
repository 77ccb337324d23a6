use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error in {context}: {message}")]
    Numerical { context: String, message: String },

    /// The swap amplitude used to read off gate phases is too small to
    /// define them.
    #[error("phase calibration unreliable: transfer amplitude {amplitude:.3e} below {threshold}")]
    Calibration { amplitude: f64, threshold: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for invalid input, 3 for numerical failure,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Numerical { .. } | Error::Calibration { .. } => 3,
            Error::Io(_) => 1,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            message: message.into(),
        }
    }
}
