use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inadmissible potential: {0}")]
    Inadmissible(String),

    #[error("spectral parameter {z} lies within {distance:e} of eigenvalue {nearest}")]
    NearSpectrum {
        z: Complex64,
        nearest: f64,
        distance: f64,
    },

    #[error("singular system at pivot {pivot} (z = {z})")]
    Singular { pivot: usize, z: Complex64 },

    #[error("eigensolver did not converge for eigenpair {index}: {reason}")]
    NotConverged { index: usize, reason: String },

    #[error("tau = {tau} exceeds the resolution ceiling {ceiling} (pass force to override)")]
    TauCeiling { tau: f64, ceiling: f64 },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while decoding a dataset or reconstruction container.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {found:#010x} (expected {expected:#010x})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("inconsistent grid metadata: {0}")]
    GridMetadata(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("unknown enum tag {tag} for {what}")]
    UnknownTag { what: &'static str, tag: u8 },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}
