use thiserror::Error;

/// Errors produced by operator arithmetic, projector algebra, and process
/// composition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    LabelCollision(String),

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("no Hilbert-Schmidt basis construction for dimension {0}")]
    UnsupportedDimension(usize),

    #[error("basis index out of range: {0}")]
    BadIndex(String),

    #[error("ring element is not a projector: {0}")]
    NotAProjector(String),

    #[error("bad matrix shape: expected {expected}x{expected}, got {rows}x{cols}")]
    BadShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dual pairing mismatch: {0}")]
    PairingMismatch(String),

    #[error("conditioning post-selects: {0}")]
    PostSelectionDetected(String),

    #[error("zero-probability branch: conditional process cannot be normalised")]
    ZeroProbability,

    #[error("too many nodes: {got} (limit {limit})")]
    TooManyNodes { got: usize, limit: usize },

    #[error("game too large: {0}")]
    TooLarge(String),

    #[error("not a valid process: {0}")]
    InvalidProcess(String),

    #[error("invalid dimension: {0}")]
    BadDimension(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
