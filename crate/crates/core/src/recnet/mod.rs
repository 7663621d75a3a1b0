//! From-scratch recurrent network for joint action and progress labelling.
//!
//! A single-layer LSTM (bidirectional, or forward-only for online use)
//! produces a shared per-frame representation. An action head emits ten
//! gesture logits; an optional progress head regresses the stage, classifies
//! it with softmax, or predicts ordinal bits with sigmoids. Gradients are
//! computed exactly by backpropagation through time.

mod checkpoint;
mod loss;
mod lstm;
mod model;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use loss::{
    argmax, loss_mae, loss_mbce, loss_mce, ordinal_decode, ordinal_encode, ordinal_targets, predict_actions,
    predict_progress_classification, predict_progress_ordinal, predict_progress_regression, softmax, Loss,
};
pub use lstm::{lstm_backward, lstm_forward, LstmCache};
pub use model::{
    apply_dropout, bilstm_features, ForwardCache, FrameTargets, HeadGrads, Prediction, SeqModel, TaskLosses,
};
pub use params::{
    clip_gradients, Dense, Direction, HeadKind, LstmParams, ModelConfig, Params, SharedSubset, INIT_SCALE,
};
