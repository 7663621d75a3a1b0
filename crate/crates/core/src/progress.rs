//! Action-based progress stages derived from gesture transcripts.
//!
//! Five gestures advance a suture throw: reaching (G1, with G5), positioning
//! (G2), pushing (G3), pulling (G6, G9, G10) and dropping (G11). The
//! adjustment gestures G4 and G8 carry no stage of their own and take the
//! stage of the next essential gesture that follows them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{GestureId, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProgressStage(u8);

impl ProgressStage {
    pub const COUNT: usize = 5;
    pub const MAX: ProgressStage = ProgressStage(4);

    pub fn new(stage: u8) -> Result<Self> {
        if (stage as usize) < Self::COUNT {
            Ok(ProgressStage(stage))
        } else {
            Err(Error::Invalid(format!("progress stage {stage} outside 0..=4")))
        }
    }

    /// Clamps any integer into the valid stage range.
    pub fn saturating(stage: i64) -> Self {
        ProgressStage(stage.clamp(0, 4) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ProgressStage> {
        (0..5).map(ProgressStage)
    }
}

impl fmt::Display for ProgressStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stage of a gesture that fixes progress on its own, or `None` for the
/// context-dependent adjustment gestures G4 and G8.
pub fn essential_stage(g: GestureId) -> Option<ProgressStage> {
    use GestureId::*;
    let stage = match g {
        G1 | G5 => 0,
        G2 => 1,
        G3 => 2,
        G6 | G9 | G10 => 3,
        G11 => 4,
        G4 | G8 => return None,
    };
    Some(ProgressStage(stage))
}

/// One stage per segment.
///
/// Adjustment segments resolve against the next essential segment, looking
/// past any further adjustments. Adjustments with nothing essential after
/// them keep the stage of the segment before them (stage 0 at the very
/// start).
pub fn label_segments(segments: &[Segment]) -> Vec<ProgressStage> {
    let mut stages: Vec<ProgressStage> = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        let stage = essential_stage(seg.gesture)
            .or_else(|| segments[i + 1..].iter().find_map(|s| essential_stage(s.gesture)))
            .unwrap_or_else(|| stages.last().copied().unwrap_or(ProgressStage(0)));
        stages.push(stage);
    }
    stages
}

/// Per-frame progress labels aligned with a demonstration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProgressTrack {
    pub stages: Vec<Option<ProgressStage>>,
}

impl ProgressTrack {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.stages.iter().map(Option::is_some).collect()
    }
}

/// Expands segment stages over `n_frames` frames. Frames outside every
/// segment stay unlabelled. An empty transcript yields an empty track.
pub fn label_progress(segments: &[Segment], n_frames: usize) -> ProgressTrack {
    if segments.is_empty() {
        return ProgressTrack::default();
    }
    let mut stages = vec![None; n_frames];
    for (seg, stage) in segments.iter().zip(label_segments(segments)) {
        for slot in stages.iter_mut().take(seg.end + 1).skip(seg.start) {
            *slot = Some(stage);
        }
    }
    ProgressTrack { stages }
}

/// Regression targets with the loss mask; unlabelled frames hold 0.0 and a
/// false mask bit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTarget {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

pub fn progress_to_regression_target(track: &ProgressTrack) -> RegressionTarget {
    RegressionTarget {
        values: track
            .stages
            .iter()
            .map(|s| s.map_or(0.0, |s| f64::from(s.value())))
            .collect(),
        mask: track.mask(),
    }
}
