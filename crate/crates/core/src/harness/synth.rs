//! Synthetic suturing-like corpus for desk-scale experiments.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{decimate, lowpass_filter, zscore, Demonstration, DECIMATION_FACTOR, FEATURE_COLUMNS};
use crate::error::{Error, Result};
use crate::gesture::{frames_to_segments, GestureId, Segment};

/// Stage-cycle grammar with per-gesture Gaussian feature signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGrammar {
    /// Stage cycles per trial.
    pub cycles: usize,
    /// Chance of an adjustment gesture before each essential gesture.
    pub adjustment_prob: f64,
    /// Chance of a leading G5 and of each G6 being replaced by G9 or G10.
    pub variant_prob: f64,
    /// Noise standard deviation per feature at the native rate.
    pub noise: f64,
    /// Scale of the per-subject offset added to every frame.
    pub subject_offset: f64,
    /// Inclusive duration range of essential gestures, in decimated frames.
    pub essential_frames: (usize, usize),
    /// Inclusive duration range of adjustment and variant gestures.
    pub other_frames: (usize, usize),
    pub dims: usize,
    /// Standardize each trial after generation.
    pub per_trial_normalization: bool,
}

impl Default for SyntheticGrammar {
    fn default() -> Self {
        SyntheticGrammar {
            cycles: 4,
            adjustment_prob: 0.3,
            variant_prob: 0.15,
            noise: 0.5,
            subject_offset: 0.2,
            essential_frames: (3, 7),
            other_frames: (2, 5),
            dims: FEATURE_COLUMNS.len(),
            per_trial_normalization: true,
        }
    }
}

impl SyntheticGrammar {
    /// Mean feature vector of a gesture: a unit vector on its own axis.
    pub fn signature(&self, gesture: GestureId) -> Vec<f64> {
        let mut v = vec![0.0; self.dims];
        v[gesture.index() % self.dims] = 1.0;
        v
    }

    fn validate(&self) -> Result<()> {
        let ranges_ok = |(lo, hi): (usize, usize)| lo >= 1 && lo <= hi;
        if self.cycles == 0
            || self.dims < GestureId::COUNT
            || !ranges_ok(self.essential_frames)
            || !ranges_ok(self.other_frames)
            || !(0.0..=1.0).contains(&self.adjustment_prob)
            || !(0.0..=0.5).contains(&self.variant_prob)
            || self.noise < 0.0
        {
            return Err(Error::Config(format!("invalid synthetic grammar {self:?}")));
        }
        Ok(())
    }

    /// Gesture sequence of one trial.
    pub fn sample_sequence<R: Rng>(&self, rng: &mut R) -> Vec<GestureId> {
        use GestureId::*;
        let mut seq = Vec::new();
        if rng.random_bool(self.variant_prob.min(1.0) * 2.0) {
            seq.push(G5);
        }
        for _ in 0..self.cycles {
            for essential in [G1, G2, G3, G6, G11] {
                if rng.random_bool(self.adjustment_prob) {
                    seq.push(*[G4, G8].choose(rng).expect("non-empty"));
                }
                let g = if essential == G6 {
                    let u: f64 = rng.random();
                    if u < self.variant_prob {
                        G9
                    } else if u < 2.0 * self.variant_prob {
                        G10
                    } else {
                        G6
                    }
                } else {
                    essential
                };
                seq.push(g);
            }
        }
        if rng.random_bool(self.adjustment_prob / 2.0) {
            seq.push(G8);
        }
        seq
    }

    fn duration<R: Rng>(&self, gesture: GestureId, rng: &mut R) -> usize {
        use GestureId::*;
        let (lo, hi) = match gesture {
            G1 | G2 | G3 | G6 | G11 => self.essential_frames,
            _ => self.other_frames,
        };
        rng.random_range(lo..=hi)
    }
}

/// One generated trial: its demonstration and gesture transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrial {
    pub demo: Demonstration,
    pub transcript: Vec<Segment>,
}

/// Subject letters used for pseudo-subjects, in order.
pub const SUBJECTS: [char; 8] = ['B', 'C', 'D', 'E', 'F', 'G', 'H', 'I'];

/// Generates `n_trials` trials spread round-robin over `n_subjects`
/// pseudo-subjects. Frames are drawn at the native rate, then low-passed
/// and decimated like recorded trials. Deterministic in `seed`.
pub fn generate_synthetic(grammar: &SyntheticGrammar, n_subjects: usize, n_trials: usize, seed: u64) -> Result<Vec<SyntheticTrial>> {
    grammar.validate()?;
    if n_subjects == 0 || n_subjects > SUBJECTS.len() {
        return Err(Error::Config(format!("subject count must be 1..=8, got {n_subjects}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Vec<f64>> = (0..n_subjects)
        .map(|_| {
            (0..grammar.dims)
                .map(|_| grammar.subject_offset * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut counters = vec![0usize; n_subjects];
    let mut out = Vec::with_capacity(n_trials);
    for k in 0..n_trials {
        let s = k % n_subjects;
        counters[s] += 1;
        let trial_id = format!("Suturing_{}{:03}", SUBJECTS[s], counters[s]);
        let sequence = grammar.sample_sequence(&mut rng);
        let mut native = Vec::new();
        for g in sequence {
            let d = grammar.duration(g, &mut rng) * DECIMATION_FACTOR;
            native.extend(std::iter::repeat_n(Some(g), d));
        }
        let mut raw = Array2::zeros((native.len(), grammar.dims));
        for (t, g) in native.iter().enumerate() {
            let mean = grammar.signature(g.expect("every frame is labelled"));
            for j in 0..grammar.dims {
                let noise: f64 = rng.sample(StandardNormal);
                raw[[t, j]] = mean[j] + offsets[s][j] + grammar.noise * noise;
            }
        }
        let (mut features, gestures) = decimate(&lowpass_filter(&raw)?, &native, DECIMATION_FACTOR);
        if grammar.per_trial_normalization {
            features = zscore(&features);
        }
        let transcript = frames_to_segments(&gestures);
        let demo = Demonstration::new(trial_id, SUBJECTS[s], features, gestures)?;
        out.push(SyntheticTrial { demo, transcript });
    }
    Ok(out)
}
