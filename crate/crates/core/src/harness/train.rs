//! Training schedule: epochs over shuffled demonstrations, gradient
//! accumulation per batch, clipping, learning-rate decay and optional
//! loss balancing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Demonstration;
use crate::error::{Error, Result};
use crate::gradnorm::{gradnorm_loss, log_line, update_weights, GradNormState, TaskWeights, LOG_HEADER};
use crate::recnet::{clip_gradients, FrameTargets, HeadGrads, Params, SeqModel};

use super::config::{Balancing, ExperimentConfig, Optimizer};

/// Mean training losses of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lr: f64,
    pub action_loss: Option<f64>,
    pub progress_loss: Option<f64>,
    pub w1: f64,
    pub w2: f64,
}

pub const TRAIN_LOG_HEADER: &str = "iter,lr,L1,L2,w1,w2";

impl IterationLog {
    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.lr,
            opt(self.action_loss),
            opt(self.progress_loss),
            self.w1,
            self.w2
        )
    }
}

/// Everything a run records; kept by the caller so a diverged run still
/// leaves its history behind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub iterations: Vec<IterationLog>,
    /// Lines of the balancing log, without header.
    pub gradnorm: Vec<String>,
}

impl TrainLog {
    pub fn loss_csv(&self) -> String {
        let mut s = format!("{TRAIN_LOG_HEADER}\n");
        for it in &self.iterations {
            s.push_str(&it.csv());
            s.push('\n');
        }
        s
    }

    pub fn gradnorm_csv(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for line in &self.gradnorm {
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

/// Snapshot of the model after a test iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub model: SeqModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub seed: u64,
    pub model: SeqModel,
    pub snapshots: Vec<Snapshot>,
    pub weights: TaskWeights,
}

/// RNG stream for shuffling and dropout; weights use the seed directly.
fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains one model on `train` with the schedule of `config`.
pub fn train(config: &ExperimentConfig, train: &[Demonstration], seed: u64, log: &mut TrainLog) -> Result<TrainedRun> {
    config.validate()?;
    let dims = train
        .first()
        .map(Demonstration::dims)
        .ok_or_else(|| Error::Invalid("no training demonstrations".into()))?;
    let mut model = SeqModel::new(config.model_config(dims), seed);
    let targets: Vec<FrameTargets> = train.iter().map(FrameTargets::from_demo).collect();
    let multi = config.architecture.is_multi_task();
    let mut weights = match config.balancing {
        Balancing::Fixed { w1, w2 } => TaskWeights::new(w1, w2)?,
        Balancing::GradNorm { .. } => TaskWeights::unit(),
    };
    let mut balancer = match config.balancing {
        Balancing::GradNorm { alpha, weight_lr, subset } if multi => Some(GradNormState::new(alpha, weight_lr, subset)?),
        _ => None,
    };
    let mut velocity = model.params.zeros_like();
    let mut rng = training_rng(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut snapshots = Vec::new();
    let mut step = 0usize;

    for iteration in 1..=config.max_iterations {
        let lr = config.learning_rate(iteration);
        order.shuffle(&mut rng);
        let mut epoch_loss = [0.0f64; 2];
        for batch in order.chunks(config.batch_size) {
            let (w1, w2) = if multi { (weights.w1(), weights.w2()) } else { (1.0, 1.0) };
            let mut g_action = model.params.zeros_like();
            let mut g_progress = model.params.zeros_like();
            let mut batch_loss = [0.0f64; 2];
            for &i in batch {
                let cache = model.forward_train(&train[i].features, config.dropout_rate, &mut rng)?;
                let losses = model.losses(&cache, &targets[i])?;
                let l = [
                    losses.action.as_ref().map_or(0.0, |l| l.value),
                    losses.progress.as_ref().map_or(0.0, |l| l.value),
                ];
                if !l.iter().all(|v| v.is_finite()) {
                    return Err(Error::Divergence { iteration });
                }
                if balancer.is_none() {
                    // Only the combined gradient is needed.
                    g_action.add_scaled(&model.backprop(&cache, &HeadGrads::weighted(&losses, w1, w2))?, 1.0);
                } else {
                    g_action.add_scaled(&model.backprop(&cache, &HeadGrads::action_only(&losses))?, 1.0);
                    g_progress.add_scaled(&model.backprop(&cache, &HeadGrads::progress_only(&losses))?, 1.0);
                }
                batch_loss[0] += l[0];
                batch_loss[1] += l[1];
            }
            let n = batch.len() as f64;
            g_action.scale(1.0 / n);
            g_progress.scale(1.0 / n);
            epoch_loss[0] += batch_loss[0];
            epoch_loss[1] += batch_loss[1];

            let mut grads: Params = g_action.clone();
            if balancer.is_some() {
                grads.scale(w1);
                grads.add_scaled(&g_progress, w2);
            }
            clip_gradients(&mut grads, config.clip_threshold);
            if !grads.is_finite() {
                return Err(Error::Divergence { iteration });
            }
            match config.optimizer {
                Optimizer::Gd => model.params.add_scaled(&grads, -lr),
                Optimizer::Momentum { mu } => {
                    velocity.scale(mu);
                    velocity.add_scaled(&grads, 1.0);
                    model.params.add_scaled(&velocity, -lr);
                }
            }
            step += 1;

            if let Some(state) = balancer.as_mut().filter(|s| s.initial_losses().is_some()) {
                let g1 = w1 * g_action.shared_norm(state.subset);
                let g2 = w2 * g_progress.shared_norm(state.subset);
                let balance = gradnorm_loss(state, g1, g2, batch_loss[0] / n, batch_loss[1] / n)?;
                weights = update_weights(state, &balance, &weights);
                log.gradnorm.push(log_line(step, &balance, &weights));
            }
        }
        let n = train.len() as f64;
        let mean = [epoch_loss[0] / n, epoch_loss[1] / n];
        if let Some(state) = balancer.as_mut() {
            state.record_initial(mean[0], mean[1]);
        }
        log.iterations.push(IterationLog {
            iteration,
            lr,
            action_loss: model.config.action_head.then_some(mean[0]),
            progress_loss: model.params.progress.is_some().then_some(mean[1]),
            w1: weights.w1(),
            w2: weights.w2(),
        });
        if !model.params.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        if config.test_iterations.contains(&iteration) {
            snapshots.push(Snapshot {
                iteration,
                model: model.clone(),
            });
        }
    }
    Ok(TrainedRun {
        seed,
        model,
        snapshots,
        weights,
    })
}
