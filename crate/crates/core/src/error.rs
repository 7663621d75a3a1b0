use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message} at line {line}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid transcript: {0}")]
    Transcript(String),
    #[error("amendment for {trial_id} ({start}-{end}) lies outside the trial's {len} frames")]
    AmendmentRange {
        trial_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("signal of {len} samples is too short for filtering (need at least {min})")]
    SignalTooShort { len: usize, min: usize },
    #[error("non-finite activation at timestep {timestep}")]
    NonFinite { timestep: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("every frame of the sequence is masked out")]
    EmptyMask,
    #[error("initial loss of task {task} is zero; training rates are undefined")]
    DegenerateInitialLoss { task: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at iteration {iteration}: non-finite loss")]
    Divergence { iteration: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
