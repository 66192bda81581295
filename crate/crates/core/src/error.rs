use thiserror::Error;

/// Errors raised by the model-reduction toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("system must be square (outputs {outputs} != inputs {inputs})")]
    NotSquare { inputs: usize, outputs: usize },

    #[error("system is not minimal (controllable dim {controllable}, observable dim {observable}, order {order})")]
    NotMinimal {
        order: usize,
        controllable: usize,
        observable: usize,
    },

    #[error(
        "matrix is not Hurwitz: eigenvalue {re:+.6e}{im:+.6e}i is not in the open left half-plane"
    )]
    NotHurwitz { re: f64, im: f64 },

    #[error("ill-conditioned {what} (condition estimate {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("{what} is not positive definite (lambda_min {lambda_min:.3e}, lambda_max {lambda_max:.3e})")]
    NotPositiveDefinite {
        what: &'static str,
        lambda_min: f64,
        lambda_max: f64,
    },

    #[error("system is not passive (best LMI residual {residual:.3e})")]
    NotPassive { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("subsystem {index}: {source}")]
    Subsystem {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn in_subsystem(self, index: usize) -> Self {
        Error::Subsystem {
            index,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping subsystem wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Subsystem { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
