use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::amend::{apply_amendments, AmendmentTable};
use super::parse::{parse_kinematics, parse_transcript};
use super::signal::{decimate, lowpass_filter, select_features, zscore, DECIMATION_FACTOR};
use crate::error::{Error, Result};
use crate::gesture::{frames_to_segments, segments_to_frames, GestureId, Segment};
use crate::progress::{label_progress, ProgressStage};

/// One trial as stored on disk: native-rate kinematics and its transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    pub trial_id: String,
    pub subject: char,
    pub frames: Array2<f64>,
    pub transcript: Vec<Segment>,
}

/// A preprocessed trial at the model's frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub trial_id: String,
    pub subject: char,
    pub features: Array2<f64>,
    pub gestures: Vec<Option<GestureId>>,
    pub progress: Vec<Option<ProgressStage>>,
}

impl Demonstration {
    /// Builds a demonstration and derives its progress labels from the
    /// gesture runs.
    pub fn new(trial_id: impl Into<String>, subject: char, features: Array2<f64>, gestures: Vec<Option<GestureId>>) -> Result<Self> {
        if features.nrows() != gestures.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                gestures.len()
            )));
        }
        let progress = label_progress(&frames_to_segments(&gestures), gestures.len()).stages;
        let progress = if progress.is_empty() { vec![None; gestures.len()] } else { progress };
        Ok(Demonstration {
            trial_id: trial_id.into(),
            subject,
            features,
            gestures,
            progress,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.ncols()
    }

    /// True where a gesture label exists.
    pub fn mask(&self) -> Vec<bool> {
        self.gestures.iter().map(Option::is_some).collect()
    }

    pub fn segments(&self) -> Vec<Segment> {
        frames_to_segments(&self.gestures)
    }
}

/// Subject letter of a trial id such as `Suturing_B001`.
pub fn subject_of(trial_id: &str) -> Result<char> {
    trial_id
        .rsplit('_')
        .next()
        .and_then(|tail| tail.chars().next())
        .filter(char::is_ascii_uppercase)
        .ok_or_else(|| Error::Invalid(format!("cannot read a subject letter from trial id {trial_id:?}")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepOptions {
    /// Standardize each feature over the trial before decimation. When false
    /// the caller is expected to normalize (for example with training-fold
    /// statistics).
    pub per_trial_normalization: bool,
    pub decimation: usize,
}

impl Default for PrepOptions {
    fn default() -> Self {
        PrepOptions {
            per_trial_normalization: true,
            decimation: DECIMATION_FACTOR,
        }
    }
}

/// Amend, select, filter, normalize and decimate one trial.
pub fn preprocess(raw: &RawTrial, amendments: &AmendmentTable, opts: &PrepOptions) -> Result<Demonstration> {
    let n = raw.frames.nrows();
    let transcript = apply_amendments(&raw.transcript, amendments, &raw.trial_id, n)?;
    let labels = segments_to_frames(&transcript, n);
    let mut signal = lowpass_filter(&select_features(&raw.frames)?)?;
    if opts.per_trial_normalization {
        signal = zscore(&signal);
    }
    let (features, gestures) = decimate(&signal, &labels, opts.decimation);
    Demonstration::new(raw.trial_id.clone(), raw.subject, features, gestures)
}

pub fn read_raw_trial(root: &Path, trial_id: &str) -> Result<RawTrial> {
    let frames = parse_kinematics(&root.join("kinematics").join("AllGestures").join(format!("{trial_id}.txt")))?;
    let transcript = parse_transcript(&root.join("transcriptions").join(format!("{trial_id}.txt")))?;
    Ok(RawTrial {
        trial_id: trial_id.to_string(),
        subject: subject_of(trial_id)?,
        frames,
        transcript,
    })
}

/// Loads every trial that has a transcript under `root/transcriptions`,
/// sorted by trial id.
pub fn load_jigsaws(root: &Path) -> Result<Vec<RawTrial>> {
    let mut ids: Vec<String> = fs::read_dir(root.join("transcriptions"))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    ids.iter().map(|id| read_raw_trial(root, id)).collect()
}

/// Columnar text form: a `#` header with trial metadata, then one row per
/// frame holding the features, the gesture token (`-` when unlabelled) and
/// the mask bit.
pub fn write_demonstration(demo: &Demonstration, path: &Path) -> Result<()> {
    fs::write(path, format_demonstration(demo))?;
    Ok(())
}

pub fn format_demonstration(demo: &Demonstration) -> String {
    let mut out = format!(
        "# trial={} subject={} frames={} dims={}\n",
        demo.trial_id,
        demo.subject,
        demo.len(),
        demo.dims()
    );
    for (row, label) in demo.features.rows().into_iter().zip(&demo.gestures) {
        for v in row {
            // Display of f64 prints the shortest representation that reads
            // back to the same bits.
            let _ = write!(out, "{v} ");
        }
        match label {
            Some(g) => {
                let _ = writeln!(out, "{g} 1");
            }
            None => out.push_str("- 0\n"),
        }
    }
    out
}

pub fn read_demonstration(path: &Path) -> Result<Demonstration> {
    parse_demonstration(&fs::read_to_string(path)?, path)
}

pub fn parse_demonstration(text: &str, path: &Path) -> Result<Demonstration> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| err(1, "header must start with '#'".into()))?;
    let field = |key: &str| -> Result<&str> {
        header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| err(1, format!("header lacks {key}=")))
    };
    let trial_id = field("trial")?.to_string();
    let subject = field("subject")?
        .chars()
        .next()
        .ok_or_else(|| err(1, "empty subject".into()))?;
    let frames: usize = field("frames")?.parse().map_err(|_| err(1, "bad frame count".into()))?;
    let dims: usize = field("dims")?.parse().map_err(|_| err(1, "bad dims".into()))?;

    let mut values = Vec::with_capacity(frames * dims);
    let mut gestures = Vec::with_capacity(frames);
    for (i, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dims + 2 {
            return Err(err(i + 1, format!("expected {} columns, found {}", dims + 2, tokens.len())));
        }
        for t in &tokens[..dims] {
            values.push(t.parse::<f64>().map_err(|_| err(i + 1, format!("bad value {t:?}")))?);
        }
        let label = match (tokens[dims], tokens[dims + 1]) {
            ("-", "0") => None,
            (g, "1") => Some(g.parse::<GestureId>()?),
            (g, m) => return Err(err(i + 1, format!("inconsistent label/mask {g} {m}"))),
        };
        gestures.push(label);
    }
    if gestures.len() != frames {
        return Err(err(0, format!("header says {frames} frames, found {}", gestures.len())));
    }
    let features = Array2::from_shape_vec((frames, dims), values).expect("sized above");
    Demonstration::new(trial_id, subject, features, gestures)
}
