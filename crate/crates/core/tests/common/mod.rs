#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use suturenet::gesture::{segments_to_frames, GestureId, Segment};
use suturenet::metrics::SegmentRun;
use suturenet::progress::ProgressStage;
use suturenet::recnet::{Direction, FrameTargets, HeadGrads, HeadKind, ModelConfig, SeqModel};

pub const EPS: f64 = 1e-4;
/// Denominator floor of the relative error, so gradients that are zero in
/// both computations compare by absolute difference.
pub const REL_FLOOR: f64 = 1e-6;

pub const HEADS: [HeadKind; 4] = [
    HeadKind::Regression,
    HeadKind::Classification,
    HeadKind::OrdinalClassification,
    HeadKind::NoneSingleTask,
];

pub fn fixture(head: HeadKind, direction: Direction, seed: u64) -> (SeqModel, Array2<f64>, FrameTargets) {
    let (d, h, t) = (3, 6, 8);
    let config = ModelConfig {
        input_dim: d,
        hidden: h,
        direction,
        action_head: true,
        progress_head: head,
    };
    let mut model = SeqModel::new(config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // Larger weights than the default initialization exercise saturation.
    for (_, values) in model.params.tensors_mut() {
        for v in values {
            *v = rng.random_range(-0.6..0.6);
        }
    }
    let x = Array2::from_shape_fn((t, d), |_| rng.random_range(-1.5..1.5));
    let mut gestures: Vec<Option<GestureId>> = (0..t)
        .map(|_| GestureId::from_index(rng.random_range(0..GestureId::COUNT)))
        .collect();
    gestures[3] = None;
    let mut progress: Vec<Option<ProgressStage>> = (0..t).map(|_| ProgressStage::new(rng.random_range(0..5)).ok()).collect();
    progress[5] = None;
    (model, x, FrameTargets { gestures, progress })
}

fn objective(model: &SeqModel, x: &Array2<f64>, targets: &FrameTargets, w1: f64, w2: f64) -> f64 {
    let cache = model.forward(x).unwrap();
    let losses = model.losses(&cache, targets).unwrap();
    w1 * losses.action.map_or(0.0, |l| l.value) + w2 * losses.progress.map_or(0.0, |l| l.value)
}

/// Largest relative error between backpropagated and central-difference
/// gradients of `w1 * L1 + w2 * L2`, with the parameter count checked.
pub fn gradient_check(model: &SeqModel, x: &Array2<f64>, targets: &FrameTargets, w1: f64, w2: f64) -> (f64, usize) {
    let cache = model.forward(x).unwrap();
    let losses = model.losses(&cache, targets).unwrap();
    let analytic = model.backprop(&cache, &HeadGrads::weighted(&losses, w1, w2)).unwrap().to_flat();
    let base = model.params.to_flat();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + EPS;
        probe.params.set_flat(&p);
        let up = objective(&probe, x, targets, w1, w2);
        p[i] = base[i] - EPS;
        probe.params.set_flat(&p);
        let down = objective(&probe, x, targets, w1, w2);
        let numeric = (up - down) / (2.0 * EPS);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max(rel);
    }
    (worst, base.len())
}

/// Plain recursive Levenshtein distance with a memo table.
pub fn levenshtein_oracle<L: PartialEq>(a: &[L], b: &[L]) -> usize {
    fn go<L: PartialEq>(a: &[L], b: &[L], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[a.len()][b.len()] {
            return v;
        }
        let v = if a.is_empty() {
            b.len()
        } else if b.is_empty() {
            a.len()
        } else {
            let (ha, ta) = a.split_last().unwrap();
            let (hb, tb) = b.split_last().unwrap();
            let sub = go(ta, tb, memo) + usize::from(ha != hb);
            sub.min(go(ta, b, memo) + 1).min(go(a, tb, memo) + 1)
        };
        memo[a.len()][b.len()] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}

/// Independent segmental F1: frame-set overlaps, quadratic scan.
pub fn f1_oracle(pred: &[SegmentRun<u8>], truth: &[SegmentRun<u8>], k: f64) -> f64 {
    if pred.is_empty() && truth.is_empty() {
        return 100.0;
    }
    let mut taken = vec![false; truth.len()];
    let mut tp = 0.0;
    for p in pred {
        let mut best: Option<(usize, f64)> = None;
        for (j, t) in truth.iter().enumerate() {
            if taken[j] || t.label != p.label {
                continue;
            }
            let inter = (p.start..=p.end).filter(|f| (t.start..=t.end).contains(f)).count() as f64;
            let union = (p.start.min(t.start)..=p.end.max(t.end))
                .filter(|f| (p.start..=p.end).contains(f) || (t.start..=t.end).contains(f))
                .count() as f64;
            let iou = inter / union;
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        if let Some((j, iou)) = best {
            if iou > k {
                taken[j] = true;
                tp += 1.0;
            }
        }
    }
    let precision = if pred.is_empty() { 0.0 } else { tp / pred.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { tp / truth.len() as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        100.0 * 2.0 * precision * recall / (precision + recall)
    }
}

/// Frame-by-frame progress rules: essential gestures map to their stage,
/// adjustments look ahead to the next essential gesture, trailing
/// adjustments keep the previous stage (0 if none).
pub fn progress_oracle(segments: &[Segment], n_frames: usize) -> Vec<Option<ProgressStage>> {
    use GestureId::*;
    let frames = segments_to_frames(segments, n_frames);
    let stage_of = |g: GestureId| -> Option<u8> {
        match g {
            G1 | G5 => Some(0),
            G2 => Some(1),
            G3 => Some(2),
            G6 | G9 | G10 => Some(3),
            G11 => Some(4),
            G4 | G8 => None,
        }
    };
    (0..n_frames)
        .map(|t| {
            let g = frames[t]?;
            let stage = stage_of(g)
                .or_else(|| frames[t + 1..].iter().flatten().find_map(|g| stage_of(*g)))
                .or_else(|| frames[..t].iter().rev().flatten().find_map(|g| stage_of(*g)))
                .unwrap_or(0);
            ProgressStage::new(stage).ok()
        })
        .collect()
}

pub fn runs_of(labels: &[u8]) -> Vec<SegmentRun<u8>> {
    suturenet::metrics::run_length_encode(labels, &vec![true; labels.len()])
}
