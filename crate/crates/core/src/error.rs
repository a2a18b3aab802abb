use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite potential evaluation at {point:?}")]
    Domain { point: Vec<f64> },

    #[error("potential `{name}` fails normalization: {detail}")]
    NotNormalized { name: String, detail: String },

    #[error("measure ill-defined at this beta ({beta}): {detail}")]
    IllDefinedMeasure { beta: f64, detail: String },

    #[error("sampler acceptance rate {rate:.4} below 1%; try a different proposal scale")]
    LowAcceptance { rate: f64 },

    #[error("lattice blow-up at step {step} (micro time {time})")]
    LatticeBlowUp { step: u64, time: f64 },

    #[error("spectral solver blow-up at time {time}")]
    SbeBlowUp { time: f64 },

    #[error("frame conditions fail: {detail}")]
    FrameConditions { detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_blow_up(&self) -> bool {
        matches!(self, Error::LatticeBlowUp { .. } | Error::SbeBlowUp { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
