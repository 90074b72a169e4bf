use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame configuration: {0}")]
    InvalidFrame(String),

    #[error("guard band does not fit: l_tau = {l_tau} but M = {m} allows at most {max}")]
    GuardOverflow { l_tau: usize, m: usize, max: usize },

    #[error("invalid PN generator: {0}")]
    InvalidPn(String),

    #[error("PN sequence too short: need {needed} chips, got {got}")]
    PnTooShort { needed: usize, got: usize },

    #[error("buffer too short: need {needed} samples, got {got}")]
    ShortBuffer { needed: usize, got: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("parameter lists differ in length: {0}")]
    LengthMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all-zero buffer has no defined PAPR")]
    ZeroBuffer,

    #[error("correlation series too short for guard {guard} (length {len})")]
    DegenerateSeries { guard: usize, len: usize },

    #[error("cyclic prefix of {cp} samples is shorter than the channel delay spread ({needed} samples)")]
    CyclicPrefixTooShort { cp: usize, needed: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
