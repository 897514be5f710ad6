use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("duplicate ticker `{0}` in universe")]
    DuplicateTicker(String),

    #[error("unknown asset class `{0}` (expected COMM, EQ, FI or FX)")]
    UnknownClass(String),

    #[error("non-positive price {price} for {ticker} on {date}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        price: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design matrix (condition number {condition:.3e}); collinear columns: {columns:?}")]
    SingularDesign { condition: f64, columns: Vec<String> },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Process exit status for the CLI: 2 for configuration problems, 4 for
    /// solver failures, 3 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Solver(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
