use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A launch or strategy configuration violates a device limit.
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    /// The strategy cannot run on this scene/device combination. This is a
    /// normal, reportable outcome (the experiment row is marked
    /// not-applicable), not a failure.
    #[error("strategy {strategy} not applicable: {reason}")]
    Inapplicable {
        strategy: &'static str,
        reason: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed profile or report file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown device profile '{0}' (expected t600, a100, mi210, or a file path)")]
    UnknownProfile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
