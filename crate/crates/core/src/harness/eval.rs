//! Scoring trained models on held-out folds.

use crate::dataset::Demonstration;
use crate::error::{Error, Result};
use crate::metrics::{score_fold, F1Pooling, Scores, SequenceOutcome};
use crate::recnet::SeqModel;

/// Predictions of `model` on every test demonstration.
pub fn predict_fold(model: &SeqModel, test: &[Demonstration]) -> Result<Vec<SequenceOutcome>> {
    test.iter()
        .map(|demo| {
            let p = model.predict(&demo.features)?;
            Ok(SequenceOutcome {
                gestures: demo.gestures.clone(),
                predicted_actions: p.actions,
                progress: demo.progress.clone(),
                predicted_progress: p.progress,
            })
        })
        .collect()
}

pub fn score_model(model: &SeqModel, test: &[Demonstration], pooling: F1Pooling) -> Result<Scores> {
    score_fold(&predict_fold(model, test)?, pooling)
}

/// Scores every checkpoint of one fold (all seeds and test iterations) and
/// averages them into the fold's score.
pub fn evaluate<'a>(checkpoints: impl IntoIterator<Item = &'a SeqModel>, test: &[Demonstration], pooling: F1Pooling) -> Result<Scores> {
    let scores = checkpoints
        .into_iter()
        .map(|m| score_model(m, test, pooling))
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(Error::Invalid("no checkpoints to evaluate".into()));
    }
    Ok(Scores::mean(&scores))
}
