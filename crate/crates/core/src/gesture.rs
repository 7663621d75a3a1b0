//! Suturing gesture vocabulary and transcript segments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the ten gestures that occur in suturing demonstrations.
///
/// G7 never appears in suturing and is not representable. The discriminant
/// order is the classification-head index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureId {
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G8,
    G9,
    G10,
    G11,
}

impl GestureId {
    pub const COUNT: usize = 10;

    pub const ALL: [GestureId; 10] = [
        GestureId::G1,
        GestureId::G2,
        GestureId::G3,
        GestureId::G4,
        GestureId::G5,
        GestureId::G6,
        GestureId::G8,
        GestureId::G9,
        GestureId::G10,
        GestureId::G11,
    ];

    /// Classification-head index in `0..10`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<GestureId> {
        Self::ALL.get(index).copied()
    }

    /// The JIGSAWS gesture number (1 for G1, 11 for G11).
    pub fn number(self) -> u8 {
        match self {
            GestureId::G1 => 1,
            GestureId::G2 => 2,
            GestureId::G3 => 3,
            GestureId::G4 => 4,
            GestureId::G5 => 5,
            GestureId::G6 => 6,
            GestureId::G8 => 8,
            GestureId::G9 => 9,
            GestureId::G10 => 10,
            GestureId::G11 => 11,
        }
    }

    pub fn from_number(n: u8) -> Option<GestureId> {
        Self::ALL.iter().copied().find(|g| g.number() == n)
    }
}

impl fmt::Display for GestureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.number())
    }
}

impl FromStr for GestureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('G')
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(GestureId::from_number)
            .ok_or_else(|| Error::Transcript(format!("unknown gesture label {s:?}")))
    }
}

/// A labelled frame interval, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub gesture: GestureId,
}

impl Segment {
    pub fn new(start: usize, end: usize, gesture: GestureId) -> Self {
        Segment { start, end, gesture }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Sorts segments by start frame and checks that they are well formed and
/// do not overlap.
pub fn validate_segments(mut segments: Vec<Segment>) -> Result<Vec<Segment>> {
    segments.sort_by_key(|s| (s.start, s.end));
    for s in &segments {
        if s.start > s.end {
            return Err(Error::Transcript(format!(
                "segment {}-{} {} ends before it starts",
                s.start, s.end, s.gesture
            )));
        }
    }
    for pair in segments.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::Transcript(format!(
                "segments {}-{} {} and {}-{} {} overlap",
                pair[0].start, pair[0].end, pair[0].gesture, pair[1].start, pair[1].end, pair[1].gesture
            )));
        }
    }
    Ok(segments)
}

/// Expands segments into per-frame labels over `len` frames. Frames not
/// covered by any segment are `None`; segment frames at or past `len` are
/// dropped.
pub fn segments_to_frames(segments: &[Segment], len: usize) -> Vec<Option<GestureId>> {
    let mut frames = vec![None; len];
    for s in segments {
        for slot in frames.iter_mut().take(s.end + 1).skip(s.start) {
            *slot = Some(s.gesture);
        }
    }
    frames
}

/// Collapses per-frame labels into maximal runs; unlabelled frames separate
/// runs and produce no segment.
pub fn frames_to_segments(frames: &[Option<GestureId>]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (t, label) in frames.iter().enumerate() {
        let Some(g) = *label else { continue };
        match out.last_mut() {
            Some(last) if last.gesture == g && last.end + 1 == t => last.end = t,
            _ => out.push(Segment::new(t, t, g)),
        }
    }
    out
}
