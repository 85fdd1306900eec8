use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trial {trial} ({mode}) failed: {source}")]
    Trial {
        trial: usize,
        mode: &'static str,
        #[source]
        source: pmn_core::Error,
    },
    #[error(transparent)]
    Core(#[from] pmn_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
