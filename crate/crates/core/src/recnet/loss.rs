//! Per-demonstration losses, target encodings and decoding rules.
//!
//! Every loss averages over the labelled frames only and returns the
//! gradient with respect to its raw network outputs; unlabelled frames get
//! zero gradient.

use ndarray::{Array1, Array2, ArrayView1};

use super::lstm::sigmoid;
use crate::error::{Error, Result};
use crate::gesture::GestureId;
use crate::progress::ProgressStage;

#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub value: f64,
    /// Same shape as the outputs the loss was computed on.
    pub grad: Array2<f64>,
}

fn labelled_count(mask: &[bool], rows: usize) -> Result<f64> {
    if mask.len() != rows {
        return Err(Error::Shape(format!("mask of {} frames for {rows} outputs", mask.len())));
    }
    match mask.iter().filter(|m| **m).count() {
        0 => Err(Error::EmptyMask),
        n => Ok(n as f64),
    }
}

/// Row-wise softmax with the max subtracted first.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn log_sum_exp(logits: ArrayView1<f64>) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean softmax cross-entropy over labelled frames.
pub fn loss_mce(logits: &Array2<f64>, targets: &[usize], mask: &[bool]) -> Result<Loss> {
    let n = labelled_count(mask, logits.nrows())?;
    if targets.len() != logits.nrows() {
        return Err(Error::Shape("one target per frame required".into()));
    }
    let classes = logits.ncols();
    let mut value = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for (t, row) in logits.rows().into_iter().enumerate() {
        if !mask[t] {
            continue;
        }
        let target = targets[t];
        if target >= classes {
            return Err(Error::Shape(format!("target class {target} with {classes} logits")));
        }
        value += log_sum_exp(row) - row[target];
        let mut g = grad.row_mut(t);
        g.assign(&softmax(row));
        g[target] -= 1.0;
        g.mapv_inplace(|v| v / n);
    }
    Ok(Loss { value: value / n, grad })
}

/// Mean absolute error of a single-column output over labelled frames.
pub fn loss_mae(pred: &Array2<f64>, targets: &[f64], mask: &[bool]) -> Result<Loss> {
    let n = labelled_count(mask, pred.nrows())?;
    if pred.ncols() != 1 || targets.len() != pred.nrows() {
        return Err(Error::Shape("regression expects T x 1 outputs and T targets".into()));
    }
    let mut value = 0.0;
    let mut grad = Array2::zeros(pred.raw_dim());
    for t in 0..pred.nrows() {
        if mask[t] {
            let diff = pred[[t, 0]] - targets[t];
            value += diff.abs();
            grad[[t, 0]] = if diff > 0.0 {
                1.0 / n
            } else if diff < 0.0 {
                -1.0 / n
            } else {
                0.0
            };
        }
    }
    Ok(Loss { value: value / n, grad })
}

/// Mean over labelled frames of the mean binary cross-entropy of each
/// sigmoid output, computed from logits in the overflow-free form.
pub fn loss_mbce(logits: &Array2<f64>, targets: &Array2<f64>, mask: &[bool]) -> Result<Loss> {
    let n = labelled_count(mask, logits.nrows())?;
    if targets.dim() != logits.dim() {
        return Err(Error::Shape("binary targets must match logits".into()));
    }
    let bits = logits.ncols() as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for t in 0..logits.nrows() {
        if !mask[t] {
            continue;
        }
        for k in 0..logits.ncols() {
            let (z, y) = (logits[[t, k]], targets[[t, k]]);
            value += (z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()) / bits;
            grad[[t, k]] = (sigmoid(z) - y) / (bits * n);
        }
    }
    Ok(Loss { value: value / n, grad })
}

/// Ordinal target: ones at indices `0..=stage`.
pub fn ordinal_encode(stage: ProgressStage) -> [f64; 5] {
    let mut out = [0.0; 5];
    out.iter_mut().take(stage.index() + 1).for_each(|v| *v = 1.0);
    out
}

/// Stage from five sigmoid outputs: one less than the first index whose
/// probability is below 0.5, clamped at 0.
pub fn ordinal_decode(probs: &[f64]) -> ProgressStage {
    let first_below = probs.iter().position(|p| *p < 0.5).unwrap_or(probs.len());
    ProgressStage::saturating(first_below as i64 - 1)
}

/// Ordinal targets for a whole sequence; unlabelled frames encode as zeros.
pub fn ordinal_targets(stages: &[Option<ProgressStage>]) -> Array2<f64> {
    let mut out = Array2::zeros((stages.len(), ProgressStage::COUNT));
    for (t, s) in stages.iter().enumerate() {
        if let Some(s) = s {
            for (k, v) in ordinal_encode(*s).into_iter().enumerate() {
                out[[t, k]] = v;
            }
        }
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn predict_actions(logits: &Array2<f64>) -> Vec<GestureId> {
    logits
        .rows()
        .into_iter()
        .map(|r| GestureId::from_index(argmax(r)).expect("action head has 10 logits"))
        .collect()
}

/// Rounds half away from zero, then clamps into 0..=4.
pub fn predict_progress_regression(outputs: &[f64]) -> Vec<ProgressStage> {
    outputs
        .iter()
        .map(|v| ProgressStage::saturating(v.round() as i64))
        .collect()
}

pub fn predict_progress_classification(logits: &Array2<f64>) -> Vec<ProgressStage> {
    logits
        .rows()
        .into_iter()
        .map(|r| ProgressStage::saturating(argmax(r) as i64))
        .collect()
}

pub fn predict_progress_ordinal(logits: &Array2<f64>) -> Vec<ProgressStage> {
    logits
        .rows()
        .into_iter()
        .map(|r| ordinal_decode(&r.iter().map(|z| sigmoid(*z)).collect::<Vec<_>>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    // Direct evaluation of the definitions, one frame at a time.
    fn mce_oracle(logits: &[Vec<f64>], targets: &[usize], mask: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut n = 0.0;
        for ((row, &y), &m) in logits.iter().zip(targets).zip(mask) {
            if m {
                let z: f64 = row.iter().map(|v| v.exp()).sum();
                total += -(row[y].exp() / z).ln();
                n += 1.0;
            }
        }
        total / n
    }

    fn to_array(rows: &[Vec<f64>]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j])
    }

    #[test]
    fn uniform_logits_give_ln_classes() {
        let l = loss_mce(&Array2::zeros((3, 10)), &[0, 4, 9], &[true; 3]).unwrap();
        assert!((l.value - 10f64.ln()).abs() < 1e-12);
        assert!((l.value - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn mce_decreases_with_confidence() {
        let mut last = f64::INFINITY;
        for scale in [1.0, 10.0, 100.0] {
            let mut logits = Array2::zeros((1, 10));
            logits[[0, 3]] = scale;
            let v = loss_mce(&logits, &[3], &[true]).unwrap().value;
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-30);
    }

    #[test]
    fn mce_fixture() {
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.1, 0.0],
            vec![1.5, 0.2, -0.7, 0.9, -2.0],
            vec![-0.4, 0.4, 0.8, -1.1, 0.6],
            vec![2.2, 2.1, -0.5, 0.0, 1.0],
        ];
        let targets = [2, 3, 0, 1];
        let mask = [true, true, false, true];
        let got = loss_mce(&to_array(&rows), &targets, &mask).unwrap();
        assert!((got.value - mce_oracle(&rows, &targets, &mask)).abs() < 1e-12);
        assert!(got.grad.row(2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn all_masked_is_error() {
        assert!(matches!(loss_mce(&Array2::zeros((2, 10)), &[0, 0], &[false, false]), Err(Error::EmptyMask)));
        assert!(loss_mae(&Array2::zeros((2, 1)), &[0.0, 0.0], &[false, false]).is_err());
    }

    #[test]
    fn mae_cases() {
        let pred = array![[1.0], [2.0], [3.0]];
        assert_eq!(loss_mae(&pred, &[1.0, 2.0, 3.0], &[true; 3]).unwrap().value, 0.0);
        assert_eq!(loss_mae(&pred, &[0.0, 1.0, 2.0], &[true; 3]).unwrap().value, 1.0);
        let mixed = loss_mae(&array![[0.5], [4.0], [-1.0], [2.0]], &[1.0, 1.0, 0.0, 2.0], &[true, true, false, true]).unwrap();
        let oracle = (0.5f64 + 3.0 + 0.0) / 3.0;
        assert!((mixed.value - oracle).abs() < 1e-15);
    }

    #[test]
    fn mbce_cases() {
        let targets = ordinal_targets(&[Some(ProgressStage::new(2).unwrap())]);
        let zero = loss_mbce(&Array2::zeros((1, 5)), &targets, &[true]).unwrap();
        assert!((zero.value - 2f64.ln()).abs() < 1e-12);
        let saturated = targets.mapv(|y| if y > 0.5 { 60.0 } else { -60.0 });
        assert!(loss_mbce(&saturated, &targets, &[true]).unwrap().value < 1e-20);

        let logits = array![[0.4, -0.3, 1.2, -2.0, 0.0], [3.0, 1.0, -1.0, 0.5, -0.5]];
        let t = ordinal_targets(&[Some(ProgressStage::new(1).unwrap()), Some(ProgressStage::new(3).unwrap())]);
        let mut oracle = 0.0;
        for r in 0..2 {
            for k in 0..5 {
                let p = 1.0 / (1.0 + (-logits[[r, k]] as f64).exp());
                let y = t[[r, k]];
                oracle += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()) / 5.0;
            }
        }
        oracle /= 2.0;
        let got = loss_mbce(&logits, &t, &[true, true]).unwrap().value;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn ordinal_convention() {
        let s = |v| ProgressStage::new(v).unwrap();
        assert_eq!(ordinal_encode(s(0)), [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ordinal_encode(s(2)), [1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(ordinal_encode(s(4)), [1.0; 5]);
        for stage in ProgressStage::all() {
            assert_eq!(ordinal_decode(&ordinal_encode(stage)), stage);
        }
        assert_eq!(ordinal_decode(&[0.9, 0.8, 0.6, 0.3, 0.1]), s(2));
        assert_eq!(ordinal_decode(&[0.5; 5]), s(4));
        assert_eq!(ordinal_decode(&[0.2, 0.9, 0.9, 0.9, 0.9]), s(0));
    }

    #[test]
    fn action_argmax_ties_lowest() {
        let mut logits = Array2::zeros((2, 10));
        logits[[0, 7]] = 1.0;
        assert_eq!(predict_actions(&logits), vec![GestureId::G9, GestureId::G1]);
        let fixture = array![[0.1, 0.5, 0.5, -1.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]];
        assert_eq!(predict_actions(&fixture), vec![GestureId::from_index(1).unwrap()]);
    }

    #[test]
    fn regression_rounding() {
        let got: Vec<u8> = predict_progress_regression(&[2.4, 2.5, -0.3, 4.7, 0.5, 1.49, 3.5])
            .iter()
            .map(|s| s.value())
            .collect();
        let oracle: Vec<u8> = [2.4f64, 2.5, -0.3, 4.7, 0.5, 1.49, 3.5]
            .iter()
            .map(|v| {
                let r = if *v >= 0.0 { (v + 0.5).floor() } else { (v - 0.5).ceil() };
                r.clamp(0.0, 4.0) as u8
            })
            .collect();
        assert_eq!(got, oracle);
        assert_eq!(got[..4], [2, 3, 0, 4]);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(row in proptest::collection::vec(-50.0f64..50.0, 2..12)) {
            let p = softmax(ArrayView1::from(&row));
            prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn sigmoid_in_open_interval(z in -30.0f64..30.0) {
            let s = sigmoid(z);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn ordinal_decode_monotone(probs in proptest::array::uniform5(0.0f64..1.0), k in 0usize..5, bump in 0.0f64..1.0) {
            let before = ordinal_decode(&probs);
            let mut raised = probs;
            raised[k] = (raised[k] + bump).min(1.0);
            prop_assert!(ordinal_decode(&raised) >= before);
        }

        #[test]
        fn losses_non_negative(
            logits in proptest::collection::vec(-20.0f64..20.0, 10),
            target in 0usize..10,
            stage in 0u8..5,
        ) {
            let l = Array2::from_shape_vec((1, 10), logits.clone()).unwrap();
            prop_assert!(loss_mce(&l, &[target], &[true]).unwrap().value >= 0.0);
            let l5 = Array2::from_shape_vec((1, 5), logits[..5].to_vec()).unwrap();
            let t = ordinal_targets(&[Some(ProgressStage::new(stage).unwrap())]);
            prop_assert!(loss_mbce(&l5, &t, &[true]).unwrap().value >= 0.0);
            let r = Array2::from_shape_vec((1, 1), vec![logits[0]]).unwrap();
            prop_assert!(loss_mae(&r, &[f64::from(stage)], &[true]).unwrap().value >= 0.0);
        }
    }
}
