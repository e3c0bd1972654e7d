use crrr::CrrrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("column {0:?} not found in the header")]
    MissingColumn(String),

    #[error("line {line}, column {column:?}: cannot parse {value:?} as a number")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },

    #[error("no rows left after dropping rows with missing values")]
    EmptyAfterFiltering,

    #[error("{0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] CrrrError),
}

pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const CONVERGENCE: i32 = 4;
    pub const BOOTSTRAP: i32 = 5;
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit_code::CONFIG,
            CliError::MissingColumn(_) | CliError::Parse { .. } | CliError::EmptyAfterFiltering | CliError::Csv(_) => {
                exit_code::DATA
            }
            CliError::Io { .. } | CliError::Json(_) => exit_code::OTHER,
            CliError::Core(e) => match e.root() {
                CrrrError::Config(_) | CrrrError::Domain(_) => exit_code::CONFIG,
                CrrrError::NonConvergence { .. } | CrrrError::TailFit(_) => exit_code::CONVERGENCE,
                CrrrError::BootstrapFailure { .. } | CrrrError::DegenerateDraws(_) => exit_code::BOOTSTRAP,
                _ => exit_code::DATA,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
