use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("monophonic violation: more than one onset at step {step}")]
    OverlappingOnsets { step: usize },

    #[error("invalid melody: {0}")]
    InvalidMelody(String),

    #[error("transposition by {semitones} semitones leaves the piano range")]
    TransposeOutOfRange { semitones: i32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("MIDI parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("attribute undefined: melody has no onsets")]
    UndefinedAttribute,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sample too small: need at least {need}, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Degenerate(_) | Error::NonFinite(_) | Error::Shape(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
