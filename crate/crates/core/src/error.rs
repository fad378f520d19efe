use thiserror::Error;

/// Errors raised by estimation, simulation and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-positive level {value} at index {index}")]
    NonPositiveLevel { index: usize, value: f64 },

    #[error("degenerate series: sample standard deviation is zero")]
    DegenerateSeries,

    #[error("insufficient observations: {rows} rows, need at least {needed}")]
    InsufficientObservations { rows: usize, needed: usize },

    #[error("rank-deficient design matrix: rank {rank} with {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("quantile level {0} outside (0, 1)")]
    InvalidTau(f64),

    #[error("binary fit failed: {0}")]
    BinaryFitFailed(String),

    #[error("non-finite simulated state at t = {0}")]
    NonFiniteState(usize),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing months inside the sample window: {}", .0.join(", "))]
    MissingDates(Vec<String>),

    #[error("estimation failed at {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{} cell(s) failed: {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Cells(Vec<Error>),

    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the (tau, horizon) cell it occurred in.
    pub fn in_cell(self, tau: Option<f64>, horizon: usize) -> Self {
        let cell = match tau {
            Some(tau) => format!("tau={tau}, h={horizon}"),
            None => format!("h={horizon}"),
        };
        Error::Cell {
            cell,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
