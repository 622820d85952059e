use thiserror::Error;

/// Errors produced anywhere in the readout pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("site ({row}, {col}) is out of range for a {rows}x{cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error(
        "window of size {size} for site ({row}, {col}) centered at ({cx}, {cy}) leaves the {width}x{height} image"
    )]
    WindowOutOfBounds {
        row: usize,
        col: usize,
        cx: i64,
        cy: i64,
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("grid detection failed: {reason} ({components} components for {expected} sites)")]
    GridDetectFailed {
        reason: String,
        components: usize,
        expected: usize,
    },

    #[error("no background pixels: site windows cover the whole frame")]
    NoBackgroundPixels,

    #[error("site ({row}, {col}) has only {frames} bright frames, need at least 2")]
    InsufficientBrightFrames {
        row: usize,
        col: usize,
        frames: usize,
    },

    #[error("degenerate PSF: sum of squared weights is zero")]
    DegeneratePsf,

    #[error("emission samples are not bimodal (inter-class variance ratio {ratio:.4})")]
    NotBimodal { ratio: f64 },

    #[error("singular design matrix: numerical rank {rank} < {columns} columns")]
    SingularDesign { rank: usize, columns: usize },

    #[error("projector matrix sum is zero at site index {site}")]
    ZeroMatrixSum { site: usize },

    #[error("degenerate latency fit: all atom counts are equal")]
    DegenerateFit,

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
