use thiserror::Error;

/// Broad failure category, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate projection: point {0:?} lies on the medial skeleton")]
    DegenerateProjection([f64; 3]),
    #[error("curvature singularity at distance {distance} (focal point crossed)")]
    CurvatureSingularity { distance: f64 },
    #[error("degenerate profile: W(0) = 0, the transition profile cannot cross zero")]
    DegenerateProfile,
    #[error("stagnation at step {step}: energy still increasing after {halvings} step halvings")]
    Stagnation { step: usize, halvings: usize },
    #[error("I/O error ({key}): {message}")]
    Io { key: String, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Shape(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(key: impl Into<String>, message: impl ToString) -> Self {
        Error::Io {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
