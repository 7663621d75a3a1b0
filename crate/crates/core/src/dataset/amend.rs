use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gesture::{frames_to_segments, segments_to_frames, GestureId, Segment};

/// A corrected label over an inclusive range of native-rate frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Amendment {
    pub trial_id: String,
    pub start: usize,
    pub end: usize,
    pub label: GestureId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmendmentTable {
    rows: Vec<Amendment>,
}

const BUILTIN: [(&str, usize, usize, GestureId); 12] = [
    ("Suturing_B004", 2650, 2860, GestureId::G3),
    ("Suturing_C002", 1596, 1685, GestureId::G4),
    ("Suturing_D003", 1013, 1250, GestureId::G9),
    ("Suturing_D003", 1251, 1339, GestureId::G4),
    ("Suturing_D004", 99, 166, GestureId::G5),
    ("Suturing_D004", 167, 275, GestureId::G8),
    ("Suturing_D004", 956, 1020, GestureId::G4),
    ("Suturing_E003", 1095, 1267, GestureId::G4),
    ("Suturing_F001", 2401, 2498, GestureId::G6),
    ("Suturing_G001", 1132, 1353, GestureId::G6),
    ("Suturing_G001", 7628, 8181, GestureId::G8),
    ("Suturing_I003", 800, 1250, GestureId::G3),
];

impl AmendmentTable {
    /// The twelve published corrections to the suturing transcripts.
    pub fn builtin() -> Self {
        AmendmentTable {
            rows: BUILTIN
                .iter()
                .map(|&(id, start, end, label)| Amendment {
                    trial_id: id.to_string(),
                    start,
                    end,
                    label,
                })
                .collect(),
        }
    }

    pub fn empty() -> Self {
        AmendmentTable { rows: Vec::new() }
    }

    /// Parses `trial start end label` rows; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            if tokens.len() != 4 {
                return Err(err("expected \"trial start end label\"".into()));
            }
            let start = tokens[1].parse().map_err(|_| err(format!("bad start {:?}", tokens[1])))?;
            let end = tokens[2].parse().map_err(|_| err(format!("bad end {:?}", tokens[2])))?;
            if start > end {
                return Err(err(format!("range {start}-{end} is reversed")));
            }
            rows.push(Amendment {
                trial_id: tokens[0].to_string(),
                start,
                end,
                label: tokens[3].parse()?,
            });
        }
        Ok(AmendmentTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn rows(&self) -> &[Amendment] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn for_trial<'a>(&'a self, trial_id: &'a str) -> impl Iterator<Item = &'a Amendment> + 'a {
        self.rows.iter().filter(move |a| a.trial_id == trial_id)
    }

    /// Trial ids referenced by the table, in first-appearance order.
    pub fn trial_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !ids.contains(&row.trial_id.as_str()) {
                ids.push(&row.trial_id);
            }
        }
        ids
    }

    /// Sample count of the table with each range measured as `end - start`,
    /// the convention under which the published table totals 2356 samples.
    pub fn nominal_sample_count(&self) -> usize {
        self.rows.iter().map(|a| a.end - a.start).sum()
    }

    /// Frames covered by the table, counting both range ends.
    pub fn inclusive_frame_count(&self) -> usize {
        self.rows.iter().map(|a| a.end - a.start + 1).sum()
    }
}

/// Relabels the amended frame ranges of one trial and re-derives maximal
/// segments. `n_frames` is the native-rate length of the trial.
pub fn apply_amendments(
    transcript: &[Segment],
    table: &AmendmentTable,
    trial_id: &str,
    n_frames: usize,
) -> Result<Vec<Segment>> {
    let rows: Vec<&Amendment> = table.for_trial(trial_id).collect();
    if rows.is_empty() {
        return Ok(transcript.to_vec());
    }
    let span = transcript.iter().map(|s| s.end + 1).max().unwrap_or(0).max(n_frames);
    let mut frames = segments_to_frames(transcript, span);
    for a in rows {
        if a.end >= n_frames {
            return Err(Error::AmendmentRange {
                trial_id: trial_id.to_string(),
                start: a.start,
                end: a.end,
                len: n_frames,
            });
        }
        for slot in &mut frames[a.start..=a.end] {
            *slot = Some(a.label);
        }
    }
    Ok(frames_to_segments(&frames))
}

/// Number of frames in `0..n_frames` whose label differs between two
/// transcripts.
pub fn count_changed_frames(before: &[Segment], after: &[Segment], n_frames: usize) -> usize {
    let a = segments_to_frames(before, n_frames);
    let b = segments_to_frames(after, n_frames);
    a.iter().zip(&b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::segments_to_frames;

    #[test]
    fn builtin_table_shape() {
        let t = AmendmentTable::builtin();
        assert_eq!(t.len(), 12);
        assert_eq!(t.nominal_sample_count(), 2356);
        assert_eq!(t.inclusive_frame_count(), 2368);
        assert_eq!(t.trial_ids().len(), 8);
    }

    #[test]
    fn b004_relabelled_as_g3() {
        let transcript = vec![
            Segment::new(2500, 2700, GestureId::G2),
            Segment::new(2701, 2900, GestureId::G6),
        ];
        let out = apply_amendments(&transcript, &AmendmentTable::builtin(), "Suturing_B004", 3000).unwrap();
        let frames = segments_to_frames(&out, 3000);
        assert!(frames[2650..=2860].iter().all(|g| *g == Some(GestureId::G3)));
        assert_eq!(frames[2649], Some(GestureId::G2));
        assert_eq!(frames[2861], Some(GestureId::G6));
        assert_eq!(
            out,
            vec![
                Segment::new(2500, 2649, GestureId::G2),
                Segment::new(2650, 2860, GestureId::G3),
                Segment::new(2861, 2900, GestureId::G6),
            ]
        );
    }

    #[test]
    fn d004_two_adjacent_rows() {
        let transcript = vec![Segment::new(50, 400, GestureId::G1)];
        let out = apply_amendments(&transcript, &AmendmentTable::builtin(), "Suturing_D004", 1100).unwrap();
        let frames = segments_to_frames(&out, 1100);
        assert!(frames[99..=166].iter().all(|g| *g == Some(GestureId::G5)));
        assert!(frames[167..=275].iter().all(|g| *g == Some(GestureId::G8)));
        // 956-1020 falls outside the original transcript and becomes labelled.
        assert!(frames[956..=1020].iter().all(|g| *g == Some(GestureId::G4)));
        assert_eq!(frames[98], Some(GestureId::G1));
        assert_eq!(frames[276], Some(GestureId::G1));
    }

    #[test]
    fn unmatched_trial_unchanged() {
        let transcript = vec![Segment::new(0, 10, GestureId::G1)];
        let out = apply_amendments(&transcript, &AmendmentTable::builtin(), "Suturing_B001", 20).unwrap();
        assert_eq!(out, transcript);
    }

    #[test]
    fn range_past_trial_end_is_error() {
        let transcript = vec![Segment::new(0, 10, GestureId::G1)];
        let err = apply_amendments(&transcript, &AmendmentTable::builtin(), "Suturing_I003", 1000).unwrap_err();
        assert!(matches!(err, Error::AmendmentRange { .. }));
    }

    #[test]
    fn adjacent_equal_labels_merge() {
        let table = AmendmentTable::parse("T 5 9 G2\n", Path::new("a")).unwrap();
        let transcript = vec![
            Segment::new(0, 4, GestureId::G2),
            Segment::new(5, 9, GestureId::G3),
            Segment::new(10, 14, GestureId::G2),
        ];
        let out = apply_amendments(&transcript, &table, "T", 15).unwrap();
        assert_eq!(out, vec![Segment::new(0, 14, GestureId::G2)]);
        assert_eq!(count_changed_frames(&transcript, &out, 15), 5);
    }

    #[test]
    fn table_file_parsing() {
        let text = "# override\nSuturing_X001 10 20 G4\n\nSuturing_X001 21 30 G8  # trailing\n";
        let t = AmendmentTable::parse(text, Path::new("a")).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows()[1].label, GestureId::G8);
        assert!(AmendmentTable::parse("X 10 5 G1", Path::new("a")).is_err());
        assert!(AmendmentTable::parse("X 1 5 G7", Path::new("a")).is_err());
    }
}
