use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent input.
    Validation,
    /// Inputs are individually valid but do not belong together.
    Mismatch,
    /// A numerical procedure could not produce a usable result.
    Numerical,
    /// Filesystem or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate labels: y'y is zero")]
    DegenerateLabels,

    #[error("degenerate direction: weight vector is zero")]
    DegenerateDirection,

    #[error("linear system is singular even after ridge stabilization (condition estimate {condition_estimate:e})")]
    IllConditioned { condition_estimate: f64 },

    #[error("frequency band [{low}, {high}] Hz is outside (0, {nyquist}) Hz")]
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },

    #[error("frequency band [{low}, {high}] Hz contains no FFT bins")]
    EmptyBand { low: f64, high: f64 },

    #[error("dB conversion requires positive value and reference (value {value}, reference {reference})")]
    DbDomain { value: f64, reference: f64 },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error in {context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::BandOutOfRange { .. }
            | Error::EmptyBand { .. }
            | Error::DbDomain { .. }
            | Error::Json { .. }
            | Error::Csv { .. } => ErrorClass::Validation,
            Error::Mismatch(_) => ErrorClass::Mismatch,
            Error::DegenerateLabels
            | Error::DegenerateDirection
            | Error::IllConditioned { .. } => ErrorClass::Numerical,
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }
}
