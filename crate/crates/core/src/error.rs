use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },

    #[error("line {line}: duplicate record for journal `{journal_id}` in year {year}")]
    DuplicateKey {
        line: u64,
        journal_id: String,
        year: i32,
    },

    #[error("journal `{0}` not found in panel")]
    NotFound(String),

    #[error("undefined index: {0}")]
    UndefinedIndex(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (best objective {objective:e})")]
    Convergence {
        iterations: usize,
        objective: f64,
        best_params: Vec<f64>,
    },

    #[error("disjoint support: {0}")]
    DisjointSupport(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("{analysis}: {source}")]
    Analysis {
        analysis: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_analysis(self, analysis: impl Into<String>) -> Self {
        Error::Analysis {
            analysis: analysis.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Convergence { .. } => true,
            Error::Analysis { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
