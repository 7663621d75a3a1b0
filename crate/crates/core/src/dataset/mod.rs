//! JIGSAWS-format ingestion and the kinematic preprocessing chain.
//!
//! Order of operations for a trial: feature selection, zero-phase low-pass
//! filtering at the native 30 Hz, per-trial standardization, then
//! decimation to 5 Hz with labels picked at the same row indices.

mod amend;
mod demo;
mod parse;
mod signal;

pub use amend::{apply_amendments, count_changed_frames, Amendment, AmendmentTable};
pub use demo::{
    format_demonstration, load_jigsaws, parse_demonstration, preprocess, read_demonstration, read_raw_trial,
    subject_of, write_demonstration, Demonstration, PrepOptions, RawTrial,
};
pub use parse::{parse_kinematics, parse_kinematics_str, parse_transcript, parse_transcript_str};
pub use signal::{
    butterworth_lowpass, decimate, filtfilt, lowpass_filter, lowpass_filter_with, select_features, zscore,
    Biquad, CUTOFF_HZ, DECIMATION_FACTOR, FEATURE_COLUMNS, MIN_FILTER_LEN, NATIVE_RATE_HZ, RAW_COLUMNS, VARIANCE_FLOOR,
};
