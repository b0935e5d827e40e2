use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate 6D rotation: {0}")]
    DegenerateSixD(String),
    #[error("weak camera scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("point {index} is behind the camera (translated z = {z})")]
    BehindCamera { index: usize, z: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("frame {0} has degenerate (collinear) points; Procrustes alignment is ill-posed")]
    DegenerateFrame(usize),
    #[error("trajectory too short: need at least {need} frames, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("backward already ran on this recording")]
    GraphConsumed,
    #[error("non-finite loss at iteration {iteration} in term {term}")]
    NonFiniteLoss { iteration: usize, term: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
