use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by who is at fault: the caller (`Usage`, `Config`),
/// the input data (`Data`, `Degenerate`, `WindowTooShort`), or the numerics
/// (`Domain`, `Collinear`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank-deficient linear sub-problem: `{first}` and `{second}` basis columns are collinear")]
    Collinear {
        first: &'static str,
        second: &'static str,
    },

    #[error("bubble window has {observations} observations, at least {required} required")]
    WindowTooShort { observations: usize, required: usize },

    #[error("generated value {value} on {date} is not positive; raise A or reduce the noise")]
    Generation { date: NaiveDate, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the failure was caused by the caller rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_))
    }
}
