use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input that carries no information (constant chain, zero signal, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular element {element}: area {area:e}")]
    Singular { element: usize, area: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("unstable time stepping at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("sensor at x = {x} is not a mesh node")]
    Alignment { x: f64 },

    #[error("metadata mismatch: {0}")]
    Metadata(String),

    /// Wraps an error raised while solving a particular frequency channel.
    #[error("frequency channel {index}: {source}")]
    Channel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Wraps an error raised at a given position of a Markov chain.
    #[error("chain position {position}: {source}")]
    Chain {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Strips `Channel`/`Chain` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Channel { source, .. } | Error::Chain { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or config).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Convergence { .. }
                | Error::Instability { .. }
                | Error::Singular { .. }
                | Error::Degenerate(_)
                | Error::Domain(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
