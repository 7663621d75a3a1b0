//! Joint surgical gesture recognition and action-based progress estimation
//! from robot kinematics.
//!
//! The crate is organised bottom-up:
//!
//! - [`gesture`] and [`dataset`]: JIGSAWS-format ingestion, annotation
//!   amendments and the kinematic preprocessing chain.
//! - [`progress`]: progress-stage synthesis from gesture transcripts.
//! - [`recnet`]: a from-scratch (bi)directional LSTM with task heads, losses
//!   and exact backpropagation through time.
//! - [`gradnorm`]: weighted multi-task loss and gradient-norm balancing.
//! - [`metrics`]: frame accuracy, segmental Edit, F1@k and normalized MAE.
//! - [`harness`]: leave-one-user-out experiments, synthetic corpora, training
//!   schedules and reports.

pub mod dataset;
pub mod error;
pub mod gesture;
pub mod gradnorm;
pub mod harness;
pub mod metrics;
pub mod progress;
pub mod recnet;

pub use error::{Error, Result};
pub use gesture::{GestureId, Segment};
