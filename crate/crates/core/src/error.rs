use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} is not in the navigation graph")]
    UnknownNode(usize),
    #[error("no path from node {src} to node {dst}")]
    Unreachable { src: usize, dst: usize },
    #[error("navigation graph is disconnected: reached {reached} of {total} nodes")]
    Disconnected { reached: usize, total: usize },
    #[error("map layout is inconsistent: {0}")]
    Layout(String),
    #[error("jaywalk multiplier {0} is outside [0, 1]")]
    InvalidMultiplier(f64),
    #[error("cannot step an episode that has already terminated")]
    EpisodeTerminated,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("episode log: {0}")]
    Log(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
