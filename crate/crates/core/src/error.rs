use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("symbol evaluation failed at xi = {xi:?}: value {value}")]
    Evaluation { xi: Vec<f64>, value: String },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid phase: {0}")]
    InvalidPhase(String),
    #[error("cost {estimate:.3e} exceeds budget {budget:.3e} lattice operations")]
    BudgetExceeded { estimate: f64, budget: f64 },
    #[error("bad file format: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
