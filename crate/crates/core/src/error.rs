use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unknown occupant `{0}`")]
    UnknownOccupant(String),

    #[error("invalid human model: {0}")]
    InvalidModel(String),

    #[error("no valid samples for activity {activity} channel {channel}")]
    EmptyChannel { activity: usize, channel: &'static str },

    #[error("profile variant mismatch: {left} vs {right}")]
    VariantMismatch { left: &'static str, right: &'static str },

    #[error("belief over empty occupant pool")]
    EmptyBelief,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed record: {0}")]
    Record(String),

    #[error("missing baseline results: {0}")]
    MissingBaseline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
