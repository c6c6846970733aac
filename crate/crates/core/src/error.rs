use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Kernel matrix could not be factorized even at the largest jitter.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("hyperparameter fit failed: {message} (best log marginal likelihood {best_lml})")]
    Fit { message: String, best_lml: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dynamics output dimension {dim}: {source}")]
    Dynamics {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what}: expected dimension {expected}, got {got}"
        )))
    }
}
