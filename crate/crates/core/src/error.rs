use std::fmt;

use thiserror::Error;

use crate::imagecore::MAX_DIMENSION;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Rectify,
    Census,
    MatchingCost,
    Aggregate,
    Extract,
    Uniqueness,
    Consistency,
    Texture,
    Speckle,
    Gap,
    Noise,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Rectify => "rectify",
            Stage::Census => "census",
            Stage::MatchingCost => "matching-cost",
            Stage::Aggregate => "aggregate",
            Stage::Extract => "extract",
            Stage::Uniqueness => "uniqueness",
            Stage::Consistency => "consistency",
            Stage::Texture => "texture",
            Stage::Speckle => "speckle",
            Stage::Gap => "gap",
            Stage::Noise => "noise",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("image dimensions {width}x{height} outside 1..={MAX_DIMENSION}")]
    BadDimensions { width: usize, height: usize },
    #[error("data length {len} does not match {width}x{height}")]
    DataLength { width: usize, height: usize, len: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("offset ({dx}, {dy})/16 at ({x}, {y}) outside the ±39 px window")]
    OffsetOutOfRange { x: usize, y: usize, dx: i32, dy: i32 },
    #[error("bad magic: expected {0:?}")]
    BadMagic(&'static str),
    #[error("residual stream truncated")]
    TruncatedStream,
    #[error("trailing bytes after residual stream")]
    TrailingBytes,
    #[error("image {width}x{height} smaller than the {min}x{min} minimum")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty image-pair source")]
    EmptySource,
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}
