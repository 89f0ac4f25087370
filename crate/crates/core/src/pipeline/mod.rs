//! Stage wiring for the batch and streaming modes plus the maintenance
//! operations (link inference, decision application, materialization,
//! statistics).

mod batch;
mod config;
mod golden;
mod ops;
mod state;
mod stream;

pub use batch::{run_batch, RouteCounts, RunReport, TaskCounts};
pub use config::{
    InferenceConfig, InjectDelay, Mode, ModelConfig, Paths, PipelineConfig, StreamConfig,
    TargetSpec,
};
pub use golden::{compare_golden, load_golden, write_golden, GoldenRecord, GoldenReport};
pub use ops::{
    apply_pending_decisions, materialize, run_link_inference, stats, InferenceReport,
    MaterializeReport, Stats,
};
pub use state::{PipelineState, ENTITIES_FILE, FACT_LOG_FILE, INDEX_FILE, VIEW_FILE};
pub use stream::{run_stream, StreamRunReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }

    /// Process exit code: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Stage { .. } => 2,
        }
    }
}

#[cfg(test)]
mod tests;
