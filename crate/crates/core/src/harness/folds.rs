//! Leave-one-user-out folds and fold-level feature statistics.

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{Demonstration, VARIANCE_FLOOR};
use crate::error::{Error, Result};

/// One held-out subject. Indices refer to the trial list the plan was
/// built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub subject: char,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per distinct subject, in subject order.
pub fn build_folds_by_subject(subjects: &[char]) -> Result<FoldPlan> {
    let mut distinct: Vec<char> = subjects.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Invalid(format!(
            "leave-one-user-out needs at least two subjects, found {}",
            distinct.len()
        )));
    }
    let folds = distinct
        .into_iter()
        .map(|subject| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..subjects.len()).partition(|i| subjects[*i] == subject);
            Fold { subject, train, test }
        })
        .collect();
    Ok(FoldPlan { folds })
}

pub fn build_folds(trials: &[Demonstration]) -> Result<FoldPlan> {
    let subjects: Vec<char> = trials.iter().map(|d| d.subject).collect();
    build_folds_by_subject(&subjects)
}

/// Per-feature mean and population standard deviation over a set of
/// demonstrations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl FeatureStats {
    pub fn fit(demos: &[&Demonstration]) -> Result<Self> {
        let dims = demos.first().map(|d| d.dims()).ok_or(Error::Invalid("no training demonstrations".into()))?;
        let mut sum = Array1::<f64>::zeros(dims);
        let mut n = 0usize;
        for d in demos {
            if d.dims() != dims {
                return Err(Error::Shape(format!("{} has {} features, expected {dims}", d.trial_id, d.dims())));
            }
            sum += &d.features.sum_axis(Axis(0));
            n += d.len();
        }
        if n == 0 {
            return Err(Error::Invalid("training demonstrations are empty".into()));
        }
        let mean = sum / n as f64;
        let mut sq = Array1::<f64>::zeros(dims);
        for d in demos {
            for row in d.features.rows() {
                sq += &(&row - &mean).mapv(|v| v * v);
            }
        }
        let std = (sq / n as f64).mapv(f64::sqrt);
        Ok(FeatureStats { mean, std })
    }

    /// Standardizes a copy of `demo`; near-constant features become zero.
    pub fn apply(&self, demo: &Demonstration) -> Demonstration {
        let mut out = demo.clone();
        for mut row in out.features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if self.std[j] * self.std[j] < VARIANCE_FLOOR {
                    0.0
                } else {
                    (*v - self.mean[j]) / self.std[j]
                };
            }
        }
        out
    }
}

/// Train and test demonstrations of one fold, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub subject: char,
    pub train: Vec<Demonstration>,
    pub test: Vec<Demonstration>,
    /// Present when features were standardized with training statistics.
    pub stats: Option<FeatureStats>,
}

/// Splits `corpus` for `fold`. With `fold_normalization` the statistics
/// come from the training side only.
pub fn prepare_fold(corpus: &[Demonstration], fold: &Fold, fold_normalization: bool) -> Result<FoldData> {
    let train: Vec<&Demonstration> = fold.train.iter().map(|i| &corpus[*i]).collect();
    let test: Vec<&Demonstration> = fold.test.iter().map(|i| &corpus[*i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Invalid(format!("fold {} has an empty side", fold.subject)));
    }
    if !fold_normalization {
        return Ok(FoldData {
            subject: fold.subject,
            train: train.into_iter().cloned().collect(),
            test: test.into_iter().cloned().collect(),
            stats: None,
        });
    }
    let stats = FeatureStats::fit(&train)?;
    Ok(FoldData {
        subject: fold.subject,
        train: train.iter().map(|d| stats.apply(d)).collect(),
        test: test.iter().map(|d| stats.apply(d)).collect(),
        stats: Some(stats),
    })
}
