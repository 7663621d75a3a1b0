use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gesture::GestureId;
use crate::progress::ProgressStage;

/// Half-width of the uniform weight initialization.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Bidirectional,
    /// Forward-only recurrence for online recognition.
    Forward,
}

/// Progress output of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    /// One linear output trained with MAE.
    Regression,
    /// Five softmax logits trained with cross-entropy.
    Classification,
    /// Five sigmoid outputs on ordinal targets trained with binary
    /// cross-entropy.
    OrdinalClassification,
    /// No progress head.
    NoneSingleTask,
}

impl HeadKind {
    pub fn width(self) -> usize {
        match self {
            HeadKind::Regression => 1,
            HeadKind::Classification | HeadKind::OrdinalClassification => ProgressStage::COUNT,
            HeadKind::NoneSingleTask => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub direction: Direction,
    pub action_head: bool,
    pub progress_head: HeadKind,
}

impl ModelConfig {
    /// Width of the shared per-frame representation.
    pub fn feature_dim(&self) -> usize {
        match self.direction {
            Direction::Bidirectional => 2 * self.hidden,
            Direction::Forward => self.hidden,
        }
    }
}

/// Weights of one LSTM direction. Gate blocks are stacked in the order
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// 4H x D
    pub w_x: Array2<f64>,
    /// 4H x H
    pub w_h: Array2<f64>,
    /// 4H
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Array2::zeros((4 * hidden, input_dim)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }
}

/// Fully connected layer, `out x in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Every trainable tensor of a model. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub fwd: LstmParams,
    pub bwd: Option<LstmParams>,
    pub action: Option<Dense>,
    pub progress: Option<Dense>,
}

/// Which shared parameters the per-task gradient norm is measured over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SharedSubset {
    /// Output-gate weights and biases of every direction: the parameters
    /// that emit the shared representation directly.
    LastShared,
    /// Every recurrent parameter.
    AllShared,
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let features = config.feature_dim();
        Params {
            fwd: LstmParams::zeros(config.input_dim, config.hidden),
            bwd: (config.direction == Direction::Bidirectional)
                .then(|| LstmParams::zeros(config.input_dim, config.hidden)),
            action: config.action_head.then(|| Dense::zeros(features, GestureId::COUNT)),
            progress: (config.progress_head != HeadKind::NoneSingleTask)
                .then(|| Dense::zeros(features, config.progress_head.width())),
        }
    }

    /// Weights uniform in [-0.1, 0.1], biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut params = Params::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, slice) in params.tensors_mut() {
            if !name.ends_with(".b") {
                slice
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-INIT_SCALE..=INIT_SCALE));
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.fill(0.0);
        out
    }

    /// Tensors in their fixed declaration order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("fwd.w_x", slice(&self.fwd.w_x)),
            ("fwd.w_h", slice(&self.fwd.w_h)),
            ("fwd.b", self.fwd.b.as_slice().expect("contiguous")),
        ];
        if let Some(bwd) = &self.bwd {
            out.push(("bwd.w_x", slice(&bwd.w_x)));
            out.push(("bwd.w_h", slice(&bwd.w_h)));
            out.push(("bwd.b", bwd.b.as_slice().expect("contiguous")));
        }
        if let Some(head) = &self.action {
            out.push(("action.w", slice(&head.w)));
            out.push(("action.b", head.b.as_slice().expect("contiguous")));
        }
        if let Some(head) = &self.progress {
            out.push(("progress.w", slice(&head.w)));
            out.push(("progress.b", head.b.as_slice().expect("contiguous")));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = Vec::with_capacity(10);
        let fwd = &mut self.fwd;
        out.push(("fwd.w_x", slice_mut(&mut fwd.w_x)));
        out.push(("fwd.w_h", slice_mut(&mut fwd.w_h)));
        out.push(("fwd.b", fwd.b.as_slice_mut().expect("contiguous")));
        if let Some(bwd) = &mut self.bwd {
            out.push(("bwd.w_x", slice_mut(&mut bwd.w_x)));
            out.push(("bwd.w_h", slice_mut(&mut bwd.w_h)));
            out.push(("bwd.b", bwd.b.as_slice_mut().expect("contiguous")));
        }
        if let Some(head) = &mut self.action {
            out.push(("action.w", slice_mut(&mut head.w)));
            out.push(("action.b", head.b.as_slice_mut().expect("contiguous")));
        }
        if let Some(head) = &mut self.progress {
            out.push(("progress.w", slice_mut(&mut head.w)));
            out.push(("progress.b", head.b.as_slice_mut().expect("contiguous")));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, s)| s.iter().copied()).collect()
    }

    /// Overwrites every parameter from a flat vector in declaration order.
    pub fn set_flat(&mut self, flat: &[f64]) -> bool {
        if flat.len() != self.len() {
            return false;
        }
        let mut offset = 0;
        for (_, s) in self.tensors_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        true
    }

    pub fn fill(&mut self, value: f64) {
        for (_, s) in self.tensors_mut() {
            s.fill(value);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, s) in self.tensors_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor * other`; both must share a configuration.
    pub fn add_scaled(&mut self, other: &Params, factor: f64) {
        let src = other.tensors();
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += factor * s;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }

    /// Values of the shared-parameter subset, flattened.
    pub fn shared_values(&self, subset: SharedSubset) -> Vec<f64> {
        let mut out = Vec::new();
        for lstm in std::iter::once(&self.fwd).chain(self.bwd.as_ref()) {
            match subset {
                SharedSubset::AllShared => {
                    out.extend(lstm.w_x.iter());
                    out.extend(lstm.w_h.iter());
                    out.extend(lstm.b.iter());
                }
                SharedSubset::LastShared => {
                    let h = lstm.hidden();
                    let rows = 3 * h..4 * h;
                    out.extend(lstm.w_x.rows().into_iter().skip(rows.start).flatten());
                    out.extend(lstm.w_h.rows().into_iter().skip(rows.start).flatten());
                    out.extend(lstm.b.iter().skip(rows.start));
                }
            }
        }
        out
    }

    /// Euclidean norm over a shared-parameter subset.
    pub fn shared_norm(&self, subset: SharedSubset) -> f64 {
        self.shared_values(subset).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

/// Rescales gradients so their global L2 norm does not exceed `threshold`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Params, threshold: f64) -> f64 {
    let norm = grads.norm();
    if norm > threshold && norm > 0.0 {
        grads.scale(threshold / norm);
    }
    norm
}
