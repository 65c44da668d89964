use thiserror::Error;

pub type Result<T> = std::result::Result<T, QebError>;

#[derive(Debug, Error)]
pub enum QebError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coordinate vector has length {found}, expected 2·d² = {expected}")]
    BadCoordinates { expected: usize, found: usize },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("POVM effect {index} is invalid: {reason}")]
    InvalidEffect { index: usize, reason: String },

    #[error("measurement setting {index} is not normalized: {reason}")]
    NotNormalized { index: usize, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("figure of merit: {0}")]
    FigureOfMerit(String),

    #[error("histogram: {0}")]
    Histogram(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("invalid fit parameters: {0}")]
    InvalidFitParams(String),

    #[error("requested region weight is unreachable: {edge}")]
    Saturated { edge: String },

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QebError {
    /// Short machine-readable tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            QebError::DimensionMismatch { .. } => "dimension_mismatch",
            QebError::BadCoordinates { .. } => "bad_coordinates",
            QebError::InvalidState(_) => "invalid_state",
            QebError::InvalidEffect { .. } => "invalid_effect",
            QebError::NotNormalized { .. } => "not_normalized",
            QebError::InvalidDataset(_) => "invalid_dataset",
            QebError::InvalidCalibration(_) => "invalid_calibration",
            QebError::InvalidConfig(_) => "invalid_config",
            QebError::FigureOfMerit(_) => "figure_of_merit",
            QebError::Histogram(_) => "histogram",
            QebError::FitFailed(_) => "fit_failed",
            QebError::InvalidFitParams(_) => "invalid_fit_params",
            QebError::Saturated { .. } => "saturated",
            QebError::Schema { .. } => "schema",
            QebError::Json(_) => "json",
            QebError::Csv(_) => "csv",
            QebError::Io(_) => "io",
        }
    }
}
