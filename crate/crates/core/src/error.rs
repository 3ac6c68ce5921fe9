use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate column: {0}")]
    DegenerateColumn(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("empty design: {0}")]
    EmptyDesign(String),

    #[error("covariance matrix is not positive definite")]
    Cholesky,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("all {} starts failed: {}", .0.len(), .0.join("; "))]
    FitFailure(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error originates in the input (data, flags, files) rather
    /// than in the numerical fitting.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Numerical(_)
                | Error::DegenerateWeights(_)
                | Error::DegenerateFit(_)
                | Error::FitFailure(_)
        )
    }
}
