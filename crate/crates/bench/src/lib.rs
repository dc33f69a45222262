//! LASSO benchmarks for the primal-dual solvers.

pub mod config;
pub mod experiment;
pub mod lasso;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] pdsds_core::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// True for step schedules that fail the convergence conditions.
    pub fn is_schedule(&self) -> bool {
        matches!(self, BenchError::Core(pdsds_core::Error::Schedule { .. }))
    }
}
