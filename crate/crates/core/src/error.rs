use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field length {got} does not match the grid ({expected} expected)")]
    LengthMismatch { expected: usize, got: usize },

    #[error("flux field has non-zero boundary entries ({left:e}, {right:e})")]
    NotFluxTyped { left: f64, right: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("postcondition violated: {0}")]
    Postcondition(String),

    #[error(
        "Newton iteration did not converge after {iterations} iterations \
         (gradient norm {grad_norm:e}, smoothing {eps:e})"
    )]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        eps: f64,
        last_flux: Vec<f64>,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sigma = {sigma:e}: {source}")]
    AtSigma {
        sigma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("delta = {delta:e}: {source}")]
    AtDelta {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("index error: {0}")]
    Index(String),

    #[error("insufficient resolution: N = {got}, at least {required} cells needed")]
    Resolution { required: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
