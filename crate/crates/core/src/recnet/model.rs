use ndarray::{s, Array2, Axis};
use rand::Rng;

use super::loss::{
    loss_mae, loss_mbce, loss_mce, ordinal_targets, predict_actions, predict_progress_classification,
    predict_progress_ordinal, predict_progress_regression, Loss,
};
use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::params::{Dense, HeadKind, ModelConfig, Params};
use crate::dataset::Demonstration;
use crate::error::{Error, Result};
use crate::gesture::GestureId;
use crate::progress::ProgressStage;

/// Recurrent encoder with an action head and/or a progress head.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub config: ModelConfig,
    pub params: Params,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    pub fwd: LstmCache,
    pub bwd: Option<LstmCache>,
    /// Shared representation as seen by the heads, after dropout.
    pub features: Array2<f64>,
    pub dropout_mask: Option<Array2<f64>>,
    pub action_logits: Option<Array2<f64>>,
    pub progress_out: Option<Array2<f64>>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.input.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-frame supervision; `None` marks an unlabelled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTargets {
    pub gestures: Vec<Option<GestureId>>,
    pub progress: Vec<Option<ProgressStage>>,
}

impl FrameTargets {
    pub fn from_demo(demo: &Demonstration) -> Self {
        FrameTargets {
            gestures: demo.gestures.clone(),
            progress: demo.progress.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskLosses {
    /// Action-recognition loss (task 1).
    pub action: Option<Loss>,
    /// Progress-estimation loss (task 2).
    pub progress: Option<Loss>,
}

/// Loss gradients with respect to the head outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeadGrads {
    pub action: Option<Array2<f64>>,
    pub progress: Option<Array2<f64>>,
}

impl HeadGrads {
    /// `w1 * dL1 + w2 * dL2` at the head outputs.
    pub fn weighted(losses: &TaskLosses, w1: f64, w2: f64) -> Self {
        HeadGrads {
            action: losses.action.as_ref().map(|l| &l.grad * w1),
            progress: losses.progress.as_ref().map(|l| &l.grad * w2),
        }
    }

    pub fn action_only(losses: &TaskLosses) -> Self {
        HeadGrads {
            action: losses.action.as_ref().map(|l| l.grad.clone()),
            progress: None,
        }
    }

    pub fn progress_only(losses: &TaskLosses) -> Self {
        HeadGrads {
            action: None,
            progress: losses.progress.as_ref().map(|l| l.grad.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub actions: Option<Vec<GestureId>>,
    pub progress: Option<Vec<ProgressStage>>,
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`. Returns the
/// dropped features and the multiplicative mask, or the input unchanged
/// when `rate` is zero.
pub fn apply_dropout<R: Rng>(features: &Array2<f64>, rate: f64, rng: &mut R) -> (Array2<f64>, Option<Array2<f64>>) {
    if rate <= 0.0 {
        return (features.clone(), None);
    }
    assert!(rate < 1.0, "dropout rate must be below 1");
    let keep = 1.0 / (1.0 - rate);
    let mask = Array2::from_shape_fn(features.raw_dim(), |_| if rng.random::<f64>() < rate { 0.0 } else { keep });
    (features * &mask, Some(mask))
}

/// Concatenated [forward ; backward] hidden states, T x 2H (T x H for a
/// forward-only model).
pub fn bilstm_features(params: &Params, x: &Array2<f64>) -> Result<Array2<f64>> {
    let fwd = lstm_forward(&params.fwd, x, false)?;
    let bwd = params.bwd.as_ref().map(|p| lstm_forward(p, x, true)).transpose()?;
    Ok(concat_hidden(&fwd, bwd.as_ref()))
}

fn concat_hidden(fwd: &LstmCache, bwd: Option<&LstmCache>) -> Array2<f64> {
    match bwd {
        None => fwd.hidden.clone(),
        Some(b) => ndarray::concatenate(Axis(1), &[fwd.hidden.view(), b.hidden.view()]).expect("equal lengths"),
    }
}

fn dense_forward(layer: &Dense, x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.dot(&layer.w.t());
    out += &layer.b;
    out
}

impl SeqModel {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        SeqModel {
            params: Params::init(&config, seed),
            config,
        }
    }

    /// Evaluation-mode forward pass (no dropout).
    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardCache> {
        self.forward_inner(x, None::<(f64, &mut rand_chacha::ChaCha8Rng)>)
    }

    /// Training-mode forward pass with dropout on the shared representation.
    pub fn forward_train<R: Rng>(&self, x: &Array2<f64>, dropout: f64, rng: &mut R) -> Result<ForwardCache> {
        self.forward_inner(x, Some((dropout, rng)))
    }

    fn forward_inner<R: Rng>(&self, x: &Array2<f64>, dropout: Option<(f64, &mut R)>) -> Result<ForwardCache> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.config.input_dim
            )));
        }
        let input = x.as_standard_layout().into_owned();
        let fwd = lstm_forward(&self.params.fwd, &input, false)?;
        let bwd = self
            .params
            .bwd
            .as_ref()
            .map(|p| lstm_forward(p, &input, true))
            .transpose()?;
        let shared = concat_hidden(&fwd, bwd.as_ref());
        let (features, dropout_mask) = match dropout {
            Some((rate, rng)) => apply_dropout(&shared, rate, rng),
            None => (shared, None),
        };
        let action_logits = self.params.action.as_ref().map(|h| dense_forward(h, &features));
        let progress_out = self.params.progress.as_ref().map(|h| dense_forward(h, &features));
        Ok(ForwardCache {
            input,
            fwd,
            bwd,
            features,
            dropout_mask,
            action_logits,
            progress_out,
        })
    }

    /// Losses of every configured head against the targets.
    pub fn losses(&self, cache: &ForwardCache, targets: &FrameTargets) -> Result<TaskLosses> {
        let len = cache.len();
        if targets.gestures.len() != len || targets.progress.len() != len {
            return Err(Error::Shape(format!("targets do not cover {len} frames")));
        }
        let action = cache
            .action_logits
            .as_ref()
            .map(|logits| {
                let mask: Vec<bool> = targets.gestures.iter().map(Option::is_some).collect();
                let classes: Vec<usize> = targets.gestures.iter().map(|g| g.map_or(0, GestureId::index)).collect();
                loss_mce(logits, &classes, &mask)
            })
            .transpose()?;
        let progress = cache
            .progress_out
            .as_ref()
            .map(|out| {
                let mask: Vec<bool> = targets.progress.iter().map(Option::is_some).collect();
                match self.config.progress_head {
                    HeadKind::Regression => {
                        let values: Vec<f64> = targets
                            .progress
                            .iter()
                            .map(|s| s.map_or(0.0, |s| f64::from(s.value())))
                            .collect();
                        loss_mae(out, &values, &mask)
                    }
                    HeadKind::Classification => {
                        let classes: Vec<usize> = targets.progress.iter().map(|s| s.map_or(0, |s| s.index())).collect();
                        loss_mce(out, &classes, &mask)
                    }
                    HeadKind::OrdinalClassification => loss_mbce(out, &ordinal_targets(&targets.progress), &mask),
                    HeadKind::NoneSingleTask => unreachable!("no progress head allocated"),
                }
            })
            .transpose()?;
        Ok(TaskLosses { action, progress })
    }

    /// Exact gradients of every parameter given loss gradients at the heads.
    pub fn backprop(&self, cache: &ForwardCache, upstream: &HeadGrads) -> Result<Params> {
        let len = cache.len();
        let mut grads = self.params.zeros_like();
        let mut d_features = Array2::<f64>::zeros(cache.features.raw_dim());

        let heads = [
            (&self.params.action, &upstream.action, grads.action.as_mut()),
            (&self.params.progress, &upstream.progress, grads.progress.as_mut()),
        ];
        for (layer, d_out, g_layer) in heads {
            let (layer, d_out, g_layer) = match (layer, d_out, g_layer) {
                (Some(layer), Some(d_out), Some(g_layer)) => (layer, d_out, g_layer),
                (None, Some(_), _) => {
                    return Err(Error::Shape("gradient supplied for a head the model lacks".into()));
                }
                _ => continue,
            };
            if d_out.dim() != (len, layer.w.nrows()) {
                return Err(Error::Shape(format!(
                    "head gradient {:?} for outputs {:?}",
                    d_out.dim(),
                    (len, layer.w.nrows())
                )));
            }
            g_layer.w = d_out.t().dot(&cache.features).as_standard_layout().into_owned();
            g_layer.b = d_out.sum_axis(Axis(0));
            d_features += &d_out.dot(&layer.w);
        }
        if let Some(mask) = &cache.dropout_mask {
            d_features *= mask;
        }

        let h = self.config.hidden;
        let d_fwd = d_features.slice(s![.., ..h]).to_owned();
        grads.fwd = lstm_backward(&self.params.fwd, &cache.input, &cache.fwd, &d_fwd)?;
        if let (Some(p), Some(c)) = (&self.params.bwd, &cache.bwd) {
            let d_bwd = d_features.slice(s![.., h..]).to_owned();
            grads.bwd = Some(lstm_backward(p, &cache.input, c, &d_bwd)?);
        }
        Ok(grads)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Prediction> {
        let cache = self.forward(x)?;
        Ok(self.decode(&cache))
    }

    pub fn decode(&self, cache: &ForwardCache) -> Prediction {
        let progress = cache.progress_out.as_ref().map(|out| match self.config.progress_head {
            HeadKind::Regression => predict_progress_regression(&out.column(0).to_vec()),
            HeadKind::Classification => predict_progress_classification(out),
            HeadKind::OrdinalClassification => predict_progress_ordinal(out),
            HeadKind::NoneSingleTask => unreachable!("no progress head allocated"),
        });
        Prediction {
            actions: cache.action_logits.as_ref().map(predict_actions),
            progress,
        }
    }
}
