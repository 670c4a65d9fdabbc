use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("malformed CSV at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },

    #[error("response column {0:?} not found")]
    MissingColumn(String),

    #[error("non-numeric cell at line {line}, column {column} ({name}): {value:?}")]
    NonNumericCell { line: u64, column: usize, name: String, value: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Core(#[from] dppsel::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(dppsel::Error::InvalidParameter(_) | dppsel::Error::InvalidInput(_)) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Parse { .. } => "ParseError",
            CliError::MissingColumn(_) => "MissingColumn",
            CliError::NonNumericCell { .. } => "NonNumericCell",
            CliError::Io { .. } => "Io",
            CliError::Core(e) => match e {
                dppsel::Error::ConstantColumn(_) => "ConstantColumn",
                dppsel::Error::DimensionMismatch { .. } => "DimensionMismatch",
                dppsel::Error::RankDeficient => "RankDeficient",
                dppsel::Error::SingularCovariance => "SingularCovariance",
                dppsel::Error::TooLarge { .. } => "TooLarge",
                dppsel::Error::OptimizationFailed(_) => "OptimizationFailed",
                dppsel::Error::AllZeroDifferences => "AllZeroDifferences",
                dppsel::Error::InvalidParameter(_) => "InvalidParameter",
                dppsel::Error::InvalidInput(_) => "InvalidInput",
            },
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string(), "exitCode": self.exit_code() });
        match self {
            CliError::Parse { line, column, .. } | CliError::NonNumericCell { line, column, .. } => {
                v["line"] = json!(line);
                v["column"] = json!(column);
            }
            _ => {}
        }
        v.to_string()
    }
}

pub fn io_error(path: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_string(), message: e.to_string() }
}
