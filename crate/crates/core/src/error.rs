use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("resonance pole at {frequency} Hz: |exp(2ikL) - Gl*Gb| = {distance:e}")]
    ResonancePole { frequency: f64, distance: f64 },

    #[error("source impedance is not matched to the line; the closed-form power assumes Gb = 0")]
    UnmatchedSource,

    #[error("J1 termination must be matched for the reflected-wave response")]
    UnmatchedJ1,

    #[error("{0} termination generates no thermal voltage")]
    DegenerateSource(String),

    #[error("matched reference is zero at {frequency} Hz")]
    ZeroReference { frequency: f64 },

    #[error("log argument {value} is not positive")]
    NonPositiveArgument { value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("frequency not strictly increasing at row {row}")]
    NonMonotonicFrequency { row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
