use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] regpoison_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("target column '{0}' not found")]
    MissingTargetColumn(String),
    #[error("no rows left after dropping {dropped} rows with missing or non-numeric cells")]
    EmptyAfterFiltering { dropped: usize },
    #[error("no numeric feature columns besides the target")]
    NoFeatureColumns,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("missing cells: {0}")]
    MissingCells(String),
    #[error("dataset unavailable: {0}")]
    DatasetUnavailable(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
    }
}
