use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("bad header: {0}")]
    Header(String),

    #[error(
        "duplicate attempt: beneficiary {beneficiary_id}, week {message_index}, attempt {attempt_number}"
    )]
    DuplicateAttempt {
        beneficiary_id: String,
        message_index: u32,
        attempt_number: u32,
    },

    #[error("beneficiary {beneficiary_id} week {message_index}: attempts span {days} calendar days (max 4)")]
    TooManyAttemptDays {
        beneficiary_id: String,
        message_index: u32,
        days: usize,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("incomplete run: {0}")]
    Incomplete(String),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Header(_)
            | Error::DuplicateAttempt { .. }
            | Error::TooManyAttemptDays { .. }
            | Error::Empty(_)
            | Error::InvalidInput(_)
            | Error::NonFinite(_) => 2,
            Error::Shape(_) | Error::UndefinedMetric(_) | Error::Incomplete(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
