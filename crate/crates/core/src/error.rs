use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("frame index gap: expected frame {expected}, found {file}")]
    FrameGap { expected: usize, file: String },
    #[error("inconsistent frame shape in {file}: expected {expected:?}, got {got:?}")]
    FrameShape {
        file: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("unsupported pixel format in {file}: {detail}")]
    PixelFormat { file: String, detail: String },
    #[error("phase label count mismatch: {labels} labels for {frames} frames")]
    PhaseLabelCount { labels: usize, frames: usize },
    #[error("invalid label value {value} at ({x}, {y})")]
    InvalidLabel { value: u8, x: usize, y: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("empty frame set")]
    EmptyFrameSet,
    #[error("frame index {index} out of range for {len} frames")]
    FrameIndex { index: usize, len: usize },
    #[error("degenerate dimension {0}x{1}; both sides must be at least 2")]
    DegenerateShape(usize, usize),
    #[error("empty mask")]
    EmptyMask,
    #[error("zero-variance image")]
    ZeroVariance,
    #[error("non-invertible transform")]
    NonInvertible,
    #[error("no atlas matches view {0}")]
    NoViewMatch(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
