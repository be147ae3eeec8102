//! Benchmark harness: annotated clip datasets, synthetic corpora and the
//! two generation tasks.

mod loader;
mod schema;
mod synth;
mod tasks;

use std::path::PathBuf;

use crate::generation::GenerationError;
use crate::metrics::MetricsError;
use crate::planner::PlanError;

pub use loader::{
    ground_truth_kdr, load_dataset, phase_of, reconstruct, validate_clip, Dataset, Issue, Severity,
    MAX_DURATION_S, MIN_DURATION_S, MIN_SHOTS,
};
pub use schema::{
    BenchPhase, ClipRecord, Manifest, PhaseMapping, PhaseSegment, ShotAnnotation, TransitionAnnotation,
    DATASET_SCHEMA,
};
pub use synth::{synth_clips, synth_corpus, DriftRates, SynthConfig};
pub use tasks::{run_task1, run_task2, Task1Outcome, Task2Outcome, Task2Prefix, TASK2_SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("manifest not found: {}", .0.display())]
    ManifestNotFound(PathBuf),
    #[error("cannot access {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("schema violation in clip `{clip_id}` at {path}: {message}")]
    SchemaViolation {
        clip_id: String,
        path: String,
        message: String,
    },
    #[error("invalid synthetic corpus config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 shots, got {0}")]
    TooFewShots(usize),
    #[error("prefix length {k} must satisfy 1 <= k < {total}")]
    InvalidPrefixLength { k: usize, total: usize },
    #[error("inconsistent prefix: {0}")]
    InconsistentPrefix(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[cfg(test)]
mod tests;
