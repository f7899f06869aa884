use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points coincide; no unique line passes through them")]
    CoincidentPoints,
    #[error("lines are parallel; they meet only at infinity")]
    ParallelLines,
    #[error("quad is degenerate: {0}")]
    DegenerateQuad(String),
    #[error("point maps to infinity under the homography")]
    PointAtInfinity,
    #[error("matrix is near-singular (condition number {0:.3e})")]
    NearSingular(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("vanishing point ({x}, {y}) leaves the shared segment outside the {width}x{height} image")]
    VpOutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("zoom level alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("vanishing point coincides with the reference point")]
    CoincidentVpRef,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no voxel received a depth point")]
    EmptyProposal,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// True for failures caused by reading or decoding inputs, as opposed to
    /// geometric or shape problems with otherwise well-formed data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Image(_) | Error::Format { .. }
        )
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
