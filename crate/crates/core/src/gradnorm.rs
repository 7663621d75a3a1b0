//! Weighted two-task loss and gradient-norm weight balancing.
//!
//! Task 1 is action recognition, task 2 progress estimation. Each balancing
//! step compares the gradient norm of every weighted task loss over the
//! shared parameters against a common target scaled by the task's relative
//! inverse training rate, then takes one gradient-descent step on the task
//! weights. Weights are renormalized to sum to the number of tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recnet::{ForwardCache, HeadGrads, SeqModel, SharedSubset, TaskLosses};

pub const TASKS: usize = 2;
pub const WEIGHT_FLOOR: f64 = 1e-4;
pub const DEFAULT_ALPHA: f64 = 1.5;
pub const DEFAULT_WEIGHT_LR: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    w: [f64; TASKS],
}

impl TaskWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(Error::Config(format!("task weights must be positive, got ({w1}, {w2})")));
        }
        Ok(TaskWeights { w: [w1, w2] })
    }

    pub fn unit() -> Self {
        TaskWeights { w: [1.0, 1.0] }
    }

    pub fn w1(&self) -> f64 {
        self.w[0]
    }

    pub fn w2(&self) -> f64 {
        self.w[1]
    }

    pub fn get(&self, task: usize) -> f64 {
        self.w[task - 1]
    }

    pub fn sum(&self) -> f64 {
        self.w[0] + self.w[1]
    }
}

/// `w1 * L1 + w2 * L2`.
pub fn combined_loss(l1: f64, l2: f64, w: &TaskWeights) -> f64 {
    w.w1() * l1 + w.w2() * l2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNormState {
    pub alpha: f64,
    pub weight_lr: f64,
    pub subset: SharedSubset,
    initial_losses: Option<[f64; TASKS]>,
}

/// Quantities of one balancing step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceStep {
    pub grad_norms: [f64; TASKS],
    pub losses: [f64; TASKS],
    pub rates: [f64; TASKS],
    pub targets: [f64; TASKS],
    pub lgrad: f64,
}

impl GradNormState {
    pub fn new(alpha: f64, weight_lr: f64, subset: SharedSubset) -> Result<Self> {
        if !(alpha >= 0.0 && weight_lr >= 0.0) {
            return Err(Error::Config("alpha and the weight learning rate must be non-negative".into()));
        }
        Ok(GradNormState {
            alpha,
            weight_lr,
            subset,
            initial_losses: None,
        })
    }

    /// Records the reference losses once; later calls are ignored.
    pub fn record_initial(&mut self, l1: f64, l2: f64) {
        if self.initial_losses.is_none() {
            self.initial_losses = Some([l1, l2]);
        }
    }

    pub fn initial_losses(&self) -> Option<[f64; TASKS]> {
        self.initial_losses
    }
}

/// Evaluates the balancing loss for gradient norms `g1, g2` and current
/// losses `l1, l2`. The targets `mean(g) * r_i^alpha` are constants of the
/// step.
pub fn gradnorm_loss(state: &GradNormState, g1: f64, g2: f64, l1: f64, l2: f64) -> Result<BalanceStep> {
    let initial = state
        .initial_losses
        .ok_or_else(|| Error::Config("initial task losses have not been recorded".into()))?;
    for (task, l0) in initial.iter().enumerate() {
        if *l0 == 0.0 {
            return Err(Error::DegenerateInitialLoss { task: task + 1 });
        }
    }
    let ratios = [l1 / initial[0], l2 / initial[1]];
    let mean_ratio = (ratios[0] + ratios[1]) / TASKS as f64;
    let rates = if mean_ratio > 0.0 {
        [ratios[0] / mean_ratio, ratios[1] / mean_ratio]
    } else {
        [1.0, 1.0]
    };
    let mean_g = (g1 + g2) / TASKS as f64;
    let targets = [mean_g * rates[0].powf(state.alpha), mean_g * rates[1].powf(state.alpha)];
    let lgrad = (g1 - targets[0]).abs() + (g2 - targets[1]).abs();
    Ok(BalanceStep {
        grad_norms: [g1, g2],
        losses: [l1, l2],
        rates,
        targets,
        lgrad,
    })
}

/// One gradient-descent step on the balancing loss with respect to the task
/// weights, then floor and renormalization to a sum of 2.
///
/// Each norm is linear in its weight, so `dLgrad/dw_i = sign(g_i - target_i) * g_i / w_i`.
pub fn update_weights(state: &GradNormState, step: &BalanceStep, w: &TaskWeights) -> TaskWeights {
    let mut next = w.w;
    for i in 0..TASKS {
        let deviation = step.grad_norms[i] - step.targets[i];
        let sign = if deviation > 0.0 {
            1.0
        } else if deviation < 0.0 {
            -1.0
        } else {
            0.0
        };
        let grad = sign * step.grad_norms[i] / w.w[i];
        next[i] = (next[i] - state.weight_lr * grad).max(WEIGHT_FLOOR);
    }
    let scale = TASKS as f64 / (next[0] + next[1]);
    TaskWeights {
        w: [next[0] * scale, next[1] * scale],
    }
}

/// L2 norm of the gradient of `weight * L_task` over the shared parameter
/// subset.
pub fn task_gradient_norm(
    model: &SeqModel,
    cache: &ForwardCache,
    losses: &TaskLosses,
    task: usize,
    weight: f64,
    subset: SharedSubset,
) -> Result<f64> {
    let upstream = match task {
        1 => HeadGrads::action_only(losses),
        2 => HeadGrads::progress_only(losses),
        _ => return Err(Error::Config(format!("task index {task} is not 1 or 2"))),
    };
    let grads = model.backprop(cache, &upstream)?;
    Ok(weight.abs() * grads.shared_norm(subset))
}

/// CSV header of the per-step balancing log.
pub const LOG_HEADER: &str = "iter,L1,L2,w1,w2,g1,g2,Lgrad";

pub fn log_line(iteration: usize, step: &BalanceStep, w: &TaskWeights) -> String {
    format!(
        "{iteration},{},{},{},{},{},{},{}",
        step.losses[0],
        step.losses[1],
        w.w1(),
        w.w2(),
        step.grad_norms[0],
        step.grad_norms[1],
        step.lgrad
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(alpha: f64, l0: [f64; 2]) -> GradNormState {
        let mut s = GradNormState::new(alpha, DEFAULT_WEIGHT_LR, SharedSubset::LastShared).unwrap();
        s.record_initial(l0[0], l0[1]);
        s
    }

    #[test]
    fn combined_loss_values() {
        assert!((combined_loss(0.4, 0.6, &TaskWeights::unit()) - 1.0).abs() < 1e-15);
        let w = TaskWeights::new(0.7, 1.3).unwrap();
        assert_eq!(combined_loss(0.9, 0.0, &w), 0.7 * 0.9);
        assert!((combined_loss(0.25, 2.0, &w) - (0.7 * 0.25 + 1.3 * 2.0)).abs() < 1e-15);
        assert!(TaskWeights::new(0.0, 1.0).is_err());
    }

    #[test]
    fn balanced_case_is_zero() {
        let s = state(1.5, [2.0, 1.0]);
        let step = gradnorm_loss(&s, 3.0, 3.0, 1.0, 0.5).unwrap();
        assert_eq!(step.rates, [1.0, 1.0]);
        assert_eq!(step.lgrad, 0.0);
        let w = update_weights(&s, &step, &TaskWeights::unit());
        assert_eq!(w, TaskWeights::unit());
    }

    #[test]
    fn alpha_zero_ignores_rates() {
        let s = state(0.0, [1.0, 1.0]);
        let step = gradnorm_loss(&s, 1.0, 5.0, 0.1, 0.9).unwrap();
        assert!((step.lgrad - (2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn fixture_value_and_direction() {
        // Ratios 0.5 and 1.5 average to 1, so they are also the rates.
        let s = state(1.5, [1.0, 1.0]);
        let step = gradnorm_loss(&s, 2.0, 4.0, 0.5, 1.5).unwrap();
        let g_bar = 3.0f64;
        let oracle = (2.0 - g_bar * 0.5f64.powf(1.5)).abs() + (4.0 - g_bar * 1.5f64.powf(1.5)).abs();
        assert!((step.lgrad - oracle).abs() < 1e-12);
        assert!((step.lgrad - 2.450_74).abs() < 1e-4);
        let w = update_weights(&s, &step, &TaskWeights::unit());
        assert!(w.w1() < 1.0 && w.w2() > 1.0);
        assert!((w.sum() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_initial_loss_is_error() {
        let s = state(1.5, [0.0, 1.0]);
        assert!(matches!(gradnorm_loss(&s, 1.0, 1.0, 1.0, 1.0), Err(Error::DegenerateInitialLoss { task: 1 })));
        let fresh = GradNormState::new(1.5, 0.025, SharedSubset::AllShared).unwrap();
        assert!(gradnorm_loss(&fresh, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn initial_losses_never_change() {
        let mut s = state(1.5, [2.0, 3.0]);
        s.record_initial(9.0, 9.0);
        assert_eq!(s.initial_losses(), Some([2.0, 3.0]));
    }

    #[test]
    fn homogeneity_in_loss_scale() {
        let a = gradnorm_loss(&state(1.5, [2.0, 1.0]), 1.0, 2.0, 1.2, 0.7).unwrap();
        let b = gradnorm_loss(&state(1.5, [20.0, 1.0]), 1.0, 2.0, 12.0, 0.7).unwrap();
        assert!((a.rates[0] - b.rates[0]).abs() < 1e-12);
        assert!((a.lgrad - b.lgrad).abs() < 1e-12);
    }

    #[test]
    fn frozen_when_rates_are_zero() {
        let mut s = GradNormState::new(0.0, 0.0, SharedSubset::LastShared).unwrap();
        s.record_initial(1.0, 1.0);
        let mut w = TaskWeights::new(0.8, 1.2).unwrap();
        for k in 1..50 {
            let step = gradnorm_loss(&s, k as f64, 1.0, 0.5, 0.9).unwrap();
            w = update_weights(&s, &step, &w);
        }
        assert!((w.w1() - 0.8).abs() < 1e-12 && (w.w2() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn floor_keeps_weights_positive() {
        let mut s = GradNormState::new(1.5, 10.0, SharedSubset::LastShared).unwrap();
        s.record_initial(1.0, 1.0);
        let step = gradnorm_loss(&s, 50.0, 0.1, 0.1, 1.0).unwrap();
        let w = update_weights(&s, &step, &TaskWeights::unit());
        assert!(w.w1() > 0.0 && w.w2() > 0.0);
        assert!((w.sum() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn log_format() {
        let s = state(1.5, [1.0, 1.0]);
        let step = gradnorm_loss(&s, 2.0, 4.0, 0.5, 1.5).unwrap();
        let line = log_line(3, &step, &TaskWeights::unit());
        assert_eq!(line.split(',').count(), LOG_HEADER.split(',').count());
        assert!(line.starts_with("3,0.5,1.5,1,1,2,4,"));
    }
}
