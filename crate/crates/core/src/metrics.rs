//! Frame-wise and segmental evaluation scores.
//!
//! All scores are percentages. Frames whose ground truth is missing are
//! excluded everywhere; they also break runs, so a gap in the annotation
//! splits a segment in two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::GestureId;
use crate::progress::ProgressStage;

/// Overlap threshold of the segmental F1 score.
pub const F1_OVERLAP: f64 = 0.10;

/// Full progress range used to normalize the MAE.
pub const PROGRESS_RANGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRun<L> {
    pub label: L,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl<L> SegmentRun<L> {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal constant runs over the frames where `mask` is true.
pub fn run_length_encode<L: Copy + Eq>(frames: &[L], mask: &[bool]) -> Vec<SegmentRun<L>> {
    let mut runs: Vec<SegmentRun<L>> = Vec::new();
    for (t, (label, keep)) in frames.iter().zip(mask).enumerate() {
        if !keep {
            continue;
        }
        match runs.last_mut() {
            Some(run) if run.label == *label && run.end + 1 == t => run.end = t,
            _ => runs.push(SegmentRun {
                label: *label,
                start: t,
                end: t,
            }),
        }
    }
    runs
}

/// Percentage of unmasked frames where prediction equals truth.
pub fn frame_accuracy<L: PartialEq>(pred: &[L], truth: &[L], mask: &[bool]) -> Result<f64> {
    let (correct, total) = accuracy_counts(pred, truth, mask);
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(100.0 * correct as f64 / total as f64)
}

fn accuracy_counts<L: PartialEq>(pred: &[L], truth: &[L], mask: &[bool]) -> (usize, usize) {
    pred.iter()
        .zip(truth)
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0, 0), |(c, n), ((p, t), _)| (c + usize::from(p == t), n + 1))
}

/// Levenshtein distance with unit insertion, deletion and substitution
/// costs.
pub fn levenshtein<L: PartialEq>(a: &[L], b: &[L]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut row = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            row[j + 1] = substitute.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// Segmental Edit score: `100 * (1 - lev / max(|pred|, |truth|))` over the
/// run label sequences, floored at 0. Two empty segmentations score 100.
pub fn edit_score<L: PartialEq + Copy>(pred: &[SegmentRun<L>], truth: &[SegmentRun<L>]) -> f64 {
    let p: Vec<L> = pred.iter().map(|r| r.label).collect();
    let t: Vec<L> = truth.iter().map(|r| r.label).collect();
    let longest = p.len().max(t.len());
    if longest == 0 {
        return 100.0;
    }
    (100.0 * (1.0 - levenshtein(&p, &t) as f64 / longest as f64)).max(0.0)
}

fn iou<L>(a: &SegmentRun<L>, b: &SegmentRun<L>) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    let inter = if hi >= lo { hi - lo + 1 } else { 0 };
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// True positives, predicted runs and truth runs of one matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct F1Counts {
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl F1Counts {
    pub fn add(self, other: F1Counts) -> F1Counts {
        F1Counts {
            true_positives: self.true_positives + other.true_positives,
            predicted: self.predicted + other.predicted,
            actual: self.actual + other.actual,
        }
    }

    /// F1 as a percentage. Two empty segmentations score 100.
    pub fn f1(&self) -> f64 {
        if self.predicted == 0 && self.actual == 0 {
            return 100.0;
        }
        if self.predicted == 0 || self.actual == 0 {
            return 0.0;
        }
        let precision = self.true_positives as f64 / self.predicted as f64;
        let recall = self.true_positives as f64 / self.actual as f64;
        if precision + recall == 0.0 {
            0.0
        } else {
            100.0 * 2.0 * precision * recall / (precision + recall)
        }
    }
}

/// One-to-one matching in temporal order: each predicted run claims the
/// unmatched same-label truth run of highest overlap, and counts as a hit
/// when that overlap exceeds `k`.
pub fn f1_counts<L: PartialEq>(pred: &[SegmentRun<L>], truth: &[SegmentRun<L>], k: f64) -> F1Counts {
    let mut used = vec![false; truth.len()];
    let mut hits = 0;
    for p in pred {
        let best = truth
            .iter()
            .enumerate()
            .filter(|(j, t)| !used[*j] && t.label == p.label)
            .map(|(j, t)| (j, iou(p, t)))
            .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((j, v)),
            });
        if let Some((j, overlap)) = best {
            if overlap > k {
                used[j] = true;
                hits += 1;
            }
        }
    }
    F1Counts {
        true_positives: hits,
        predicted: pred.len(),
        actual: truth.len(),
    }
}

pub fn f1_at_k<L: PartialEq>(pred: &[SegmentRun<L>], truth: &[SegmentRun<L>], k: f64) -> f64 {
    f1_counts(pred, truth, k).f1()
}

/// Mean absolute progress error of one demonstration as a percentage of
/// the full stage range.
pub fn normalized_mae(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    let (sum, n) = pred
        .iter()
        .zip(truth)
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, n), ((p, t), _)| (s + (p - t).abs(), n + 1));
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(100.0 * (sum / n as f64) / PROGRESS_RANGE)
}

/// How segmental F1 is combined across the demonstrations of a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum F1Pooling {
    /// Score each demonstration, then average.
    #[default]
    PerDemonstration,
    /// Sum match counts over the fold, then score once.
    Pooled,
}

/// Scores of one fold (or their mean / standard deviation across folds).
/// Missing entries belong to heads the model does not have.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: Option<f64>,
    pub edit: Option<f64>,
    pub f1_10: Option<f64>,
    pub progress_accuracy: Option<f64>,
    pub progress_edit: Option<f64>,
    pub progress_f1_10: Option<f64>,
    pub progress_nmae: Option<f64>,
}

impl Scores {
    pub const NAMES: [&'static str; 7] = [
        "accuracy",
        "edit",
        "f1_10",
        "progress_accuracy",
        "progress_edit",
        "progress_f1_10",
        "progress_nmae",
    ];

    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.accuracy,
            self.edit,
            self.f1_10,
            self.progress_accuracy,
            self.progress_edit,
            self.progress_f1_10,
            self.progress_nmae,
        ]
    }

    pub fn from_values(v: [Option<f64>; 7]) -> Self {
        Scores {
            accuracy: v[0],
            edit: v[1],
            f1_10: v[2],
            progress_accuracy: v[3],
            progress_edit: v[4],
            progress_f1_10: v[5],
            progress_nmae: v[6],
        }
    }

    /// Element-wise mean of several score sets; a metric is present when it
    /// is present in every input.
    pub fn mean(items: &[Scores]) -> Scores {
        Self::reduce(items, |xs| xs.iter().sum::<f64>() / xs.len() as f64)
    }

    /// Element-wise population standard deviation.
    pub fn std(items: &[Scores]) -> Scores {
        Self::reduce(items, |xs| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
        })
    }

    fn reduce(items: &[Scores], f: impl Fn(&[f64]) -> f64) -> Scores {
        let mut out = [None; 7];
        if items.is_empty() {
            return Scores::default();
        }
        for (k, slot) in out.iter_mut().enumerate() {
            let xs: Option<Vec<f64>> = items.iter().map(|s| s.values()[k]).collect();
            *slot = xs.map(|xs| f(&xs));
        }
        Scores::from_values(out)
    }
}

/// Truth and predictions for one test demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    pub gestures: Vec<Option<GestureId>>,
    pub predicted_actions: Option<Vec<GestureId>>,
    pub progress: Vec<Option<ProgressStage>>,
    pub predicted_progress: Option<Vec<ProgressStage>>,
}

/// Scores one fold. Accuracy pools frames over the fold; Edit and the
/// normalized MAE average per demonstration; F1 follows `pooling`.
pub fn score_fold(outcomes: &[SequenceOutcome], pooling: F1Pooling) -> Result<Scores> {
    if outcomes.is_empty() {
        return Err(Error::Invalid("no demonstrations to score".into()));
    }
    let mut scores = Scores::default();
    if outcomes.iter().all(|o| o.predicted_actions.is_some()) {
        let seqs: Vec<(Vec<usize>, Vec<usize>, Vec<bool>)> = outcomes
            .iter()
            .map(|o| {
                let pred = o.predicted_actions.as_ref().expect("checked").iter().map(|g| g.index()).collect();
                let truth = o.gestures.iter().map(|g| g.map_or(usize::MAX, GestureId::index)).collect();
                (pred, truth, o.gestures.iter().map(Option::is_some).collect())
            })
            .collect();
        let (acc, edit, f1) = segmental(&seqs, pooling)?;
        scores.accuracy = Some(acc);
        scores.edit = Some(edit);
        scores.f1_10 = Some(f1);
    }
    if outcomes.iter().all(|o| o.predicted_progress.is_some()) {
        let seqs: Vec<(Vec<usize>, Vec<usize>, Vec<bool>)> = outcomes
            .iter()
            .map(|o| {
                let pred = o.predicted_progress.as_ref().expect("checked").iter().map(|s| s.index()).collect();
                let truth = o.progress.iter().map(|s| s.map_or(usize::MAX, |s| s.index())).collect();
                (pred, truth, o.progress.iter().map(Option::is_some).collect())
            })
            .collect();
        let (acc, edit, f1) = segmental(&seqs, pooling)?;
        scores.progress_accuracy = Some(acc);
        scores.progress_edit = Some(edit);
        scores.progress_f1_10 = Some(f1);
        scores.progress_nmae = Some(mean_nmae(&seqs)?);
    }
    Ok(scores)
}

fn segmental(seqs: &[(Vec<usize>, Vec<usize>, Vec<bool>)], pooling: F1Pooling) -> Result<(f64, f64, f64)> {
    let (mut correct, mut total) = (0, 0);
    let mut edit = 0.0;
    let mut f1_sum = 0.0;
    let mut pooled = F1Counts::default();
    for (pred, truth, mask) in seqs {
        let (c, n) = accuracy_counts(pred, truth, mask);
        correct += c;
        total += n;
        let p_runs = run_length_encode(pred, mask);
        let t_runs = run_length_encode(truth, mask);
        edit += edit_score(&p_runs, &t_runs);
        let counts = f1_counts(&p_runs, &t_runs, F1_OVERLAP);
        f1_sum += counts.f1();
        pooled = pooled.add(counts);
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let n = seqs.len() as f64;
    let f1 = match pooling {
        F1Pooling::PerDemonstration => f1_sum / n,
        F1Pooling::Pooled => pooled.f1(),
    };
    Ok((100.0 * correct as f64 / total as f64, edit / n, f1))
}

/// One demonstration read from a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionTrace {
    pub truth: Vec<usize>,
    pub pred: Vec<usize>,
    pub mask: Vec<bool>,
}

/// Parses `frame truth pred` integer triples, one per line. A truth of `-`
/// or a negative integer marks an unlabeled frame. Frames must be
/// consecutive from 0; blank lines and `#` comments are ignored.
pub fn parse_prediction_file(text: &str, path: &std::path::Path) -> Result<PredictionTrace> {
    let mut trace = PredictionTrace::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let frame: usize = fields[0].parse().map_err(|_| err(format!("bad frame index {:?}", fields[0])))?;
        if frame != trace.pred.len() {
            return Err(err(format!("expected frame {}, found {frame}", trace.pred.len())));
        }
        let truth = match fields[1] {
            "-" => None,
            t => {
                let v: i64 = t.parse().map_err(|_| err(format!("bad truth label {t:?}")))?;
                usize::try_from(v).ok()
            }
        };
        let pred: usize = fields[2].parse().map_err(|_| err(format!("bad predicted label {:?}", fields[2])))?;
        trace.truth.push(truth.unwrap_or(usize::MAX));
        trace.mask.push(truth.is_some());
        trace.pred.push(pred);
    }
    Ok(trace)
}

/// Scores prediction traces as one fold. With `progress` set the labels are
/// stages and the result fills the progress fields including the MAE.
pub fn score_traces(traces: &[PredictionTrace], progress: bool, pooling: F1Pooling) -> Result<Scores> {
    if traces.is_empty() {
        return Err(Error::Invalid("no demonstrations to score".into()));
    }
    let seqs: Vec<(Vec<usize>, Vec<usize>, Vec<bool>)> =
        traces.iter().map(|t| (t.pred.clone(), t.truth.clone(), t.mask.clone())).collect();
    let (acc, edit, f1) = segmental(&seqs, pooling)?;
    if !progress {
        return Ok(Scores {
            accuracy: Some(acc),
            edit: Some(edit),
            f1_10: Some(f1),
            ..Scores::default()
        });
    }
    Ok(Scores {
        progress_accuracy: Some(acc),
        progress_edit: Some(edit),
        progress_f1_10: Some(f1),
        progress_nmae: Some(mean_nmae(&seqs)?),
        ..Scores::default()
    })
}

fn mean_nmae(seqs: &[(Vec<usize>, Vec<usize>, Vec<bool>)]) -> Result<f64> {
    let mut total = 0.0;
    for (pred, truth, mask) in seqs {
        let p: Vec<f64> = pred.iter().map(|v| *v as f64).collect();
        let t: Vec<f64> = truth.iter().zip(mask).map(|(v, m)| if *m { *v as f64 } else { 0.0 }).collect();
        total += normalized_mae(&p, &t, mask)?;
    }
    Ok(total / seqs.len() as f64)
}

/// Per-fold scores with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub folds: Vec<(String, Scores)>,
    pub mean: Scores,
    pub std: Scores,
}

pub fn aggregate_folds(per_fold: Vec<(String, Scores)>) -> ScoreReport {
    let scores: Vec<Scores> = per_fold.iter().map(|(_, s)| *s).collect();
    ScoreReport {
        mean: Scores::mean(&scores),
        std: Scores::std(&scores),
        folds: per_fold,
    }
}
