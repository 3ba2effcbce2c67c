use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("labels contain a single class; both classes are required")]
    SingleClass,

    #[error("bin width mismatch: {0} vs {1}")]
    BinWidthMismatch(u32, u32),

    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },

    #[error("training diverged (loss is not finite) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("model has not been trained")]
    NotTrained,

    #[error("incompatible preprocessing: {0}")]
    Incompatible(String),

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Empty(_) => "empty_input",
            Error::InvalidInput(_) => "invalid_input",
            Error::SingleClass => "single_class",
            Error::BinWidthMismatch(..) => "bin_width_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Divergence { .. } => "divergence",
            Error::NotTrained => "not_trained",
            Error::Incompatible(_) => "incompatible",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
