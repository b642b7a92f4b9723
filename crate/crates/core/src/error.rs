use thiserror::Error;

/// Errors raised by the engine. Each variant maps onto one process exit code
/// of the command-line tool (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("contractivity violated: |Phi| = {modulus:.12} at t = {time}")]
    Contractivity { time: f64, modulus: f64 },

    #[error("inversion quality: {0}")]
    Inversion(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 validation, 4 integration, 5 inversion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Dimension(_) | Error::Index(_) | Error::Domain(_) | Error::Validation(_) => 3,
            Error::Integration(_) | Error::Contractivity { .. } | Error::Quadrature(_) => 4,
            Error::Inversion(_) | Error::Aliasing(_) => 5,
        }
    }

    /// Prefix the message with context, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{ctx}: {m}")),
            Error::Index(m) => Error::Index(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Integration(m) => Error::Integration(format!("{ctx}: {m}")),
            Error::Contractivity { time, modulus } => {
                Error::Integration(format!("{ctx}: contractivity violated: |Phi| = {modulus:.12} at t = {time}"))
            }
            Error::Inversion(m) => Error::Inversion(format!("{ctx}: {m}")),
            Error::Aliasing(m) => Error::Aliasing(format!("{ctx}: {m}")),
            Error::Quadrature(m) => Error::Quadrature(format!("{ctx}: {m}")),
            Error::Io(e) => Error::Io(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
