use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix not SPD: {0}")]
    NotSpd(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("non-finite state at step {step} (t = {t:.6e})")]
    Unstable { step: usize, t: f64 },

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("parameter {mu:?} outside the sampled hull")]
    OutsideHull { mu: [f64; 2] },

    #[error("empty training data: {0}")]
    EmptyTraining(String),

    #[error("not an operator file")]
    BadMagic,

    #[error("unsupported operator file version {0}")]
    BadVersion(u32),

    #[error("operator file truncated")]
    Truncated,

    #[error("operator file checksum mismatch")]
    Checksum,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parsable class, printed by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Mesh(_) => "mesh",
            Error::InvalidArgument(_) => "argument",
            Error::NotSpd(_) => "not-spd",
            Error::SvdNoConvergence { .. } => "svd",
            Error::Unstable { .. } => "unstable",
            Error::Layout(_) => "layout",
            Error::OutsideHull { .. } => "hull",
            Error::EmptyTraining(_) => "empty-training",
            Error::BadMagic | Error::BadVersion(_) | Error::Truncated | Error::Checksum => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
