use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical failure at node {index} (t = {t}, x = {x}): {value}")]
    NumericalFailure {
        index: usize,
        t: f64,
        x: f64,
        value: f64,
    },

    #[error("resource limit exceeded: {what} needs {required}, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        required: f64,
        budget: f64,
    },

    #[error("approximation failed: best achieved deviation {best_deviation} exceeds target {target}")]
    ApproximationFailure { best_deviation: f64, target: f64 },

    #[error("policy returned multiplier {lambda} outside [{lower}, {upper}] at step {step}")]
    PolicyOutOfBand {
        step: usize,
        lambda: f64,
        lower: f64,
        upper: f64,
    },

    #[error("strict check failed: {0}")]
    StrictCheck(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 configuration/validation, 3 numerical, 4 resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Configuration(_) | Error::Io(_) => 2,
            Error::NumericalFailure { .. }
            | Error::ApproximationFailure { .. }
            | Error::PolicyOutOfBand { .. }
            | Error::StrictCheck(_) => 3,
            Error::ResourceLimit { .. } => 4,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
