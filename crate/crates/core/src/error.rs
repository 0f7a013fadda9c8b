use alloc::string::String;

/// Errors produced by the engine.
///
/// The variants map onto the exit-code classes of the command-line runner:
/// [`Error::Config`], [`Error::Input`], [`Error::Calibration`] and
/// [`Error::Precondition`] are configuration problems, [`Error::Numeric`] is a
/// numeric failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error(
        "calibration error: {quantity} bands overlap (lower band max {lower_max}, upper band min {upper_min})"
    )]
    Calibration {
        quantity: &'static str,
        lower_max: f64,
        upper_min: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// True for errors caused by bad configuration or input rather than by the
    /// numerics.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
