use thiserror::Error;

/// Simulator-wide error type. Variants map to CLI exit-code categories.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("eigenvalue convergence failure: {0}")]
    Convergence(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("dispersive regime violated: {0}")]
    Dispersive(String),
    #[error("no bistability: {0}")]
    NoBistability(String),
    #[error("integration step too large: {0}")]
    StepTooLarge(String),
    #[error("trajectory diverged at step {step}: {msg}")]
    Divergence { step: usize, msg: String },
    #[error("sequence overlap: {0}")]
    Overlap(String),
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("ill-conditioned basis: {0}")]
    Conditioning(String),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable category name (also used to pick CLI exit codes).
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Config(_) => "config",
            Error::Convergence(_) => "convergence",
            Error::OutOfRange(_) => "out-of-range",
            Error::Dispersive(_) => "dispersive",
            Error::NoBistability(_) => "no-bistability",
            Error::StepTooLarge(_) => "step-too-large",
            Error::Divergence { .. } => "divergence",
            Error::Overlap(_) => "overlap",
            Error::Resolution(_) => "resolution",
            Error::EmptyWindow(_) => "empty-window",
            Error::Fit(_) => "fit",
            Error::Conditioning(_) => "conditioning",
            Error::Inconsistent(_) => "inconsistent",
            Error::Io(_) => "io",
        }
    }

    /// CLI exit code for this category (0 = success, 2 = usage/config).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::Io(_) => 5,
            Error::Fit(_) | Error::Conditioning(_) | Error::Inconsistent(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
