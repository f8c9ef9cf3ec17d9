use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("{what} is not normalized (norm {norm})")]
    Normalization { what: &'static str, norm: f64 },

    #[error("effect {index} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { index: usize, min_eigenvalue: f64 },

    #[error("effects do not sum to the identity (max deviation {deviation:e})")]
    NotComplete { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid resolution {got} below minimum {min}")]
    Resolution { got: usize, min: usize },

    #[error("proposal stream exhausted after {trials} trials")]
    StreamExhausted { trials: u64 },

    #[error("infeasible proposal: cell {cell} has target mass {target:e} but proposal mass 0")]
    InfeasibleProposal { cell: usize, target: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
