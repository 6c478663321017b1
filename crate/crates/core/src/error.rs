use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle inversion did not converge for target {target} (residual {residual:e})")]
    NoConvergence { target: f64, residual: f64 },

    #[error("distortion polynomial has no root in the bracket for target {target}")]
    NonMonotonic { target: f64 },

    #[error("no valid distortion parameters after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    #[error("distortion parameters are not monotone up to {theta_max} rad")]
    InvalidParams { theta_max: f64 },

    #[error("distorted angle {theta} rad reaches or exceeds pi/2")]
    DomainExceeded { theta: f64 },

    #[error("input of {width}x{height} is too small (need at least {min} per side)")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic in flow file {}", path.display())]
    BadMagic { path: PathBuf },

    #[error("truncated flow file {}: expected {expected} bytes, found {found}", path.display())]
    TruncatedFile {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("unsupported image format in {}: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no readable images in {}", dir.display())]
    EmptyInput { dir: PathBuf },

    #[error("i/o failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
