//! Report files: JSON and `mean(std)` CSV tables, plus per-frame timelines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ScoreReport, Scores};

/// Fold-aggregated scores of one named model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub report: ScoreReport,
}

/// `mean(std)` with one decimal, `-` for metrics the model lacks.
fn cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.1}({s:.1})"),
        _ => "-".into(),
    }
}

pub fn format_csv(reports: &[ModelReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Invalid("no reports to emit".into()));
    }
    let mut s = format!("model,{}\n", Scores::NAMES.join(","));
    for r in reports {
        let cells: Vec<String> = r
            .report
            .mean
            .values()
            .iter()
            .zip(r.report.std.values())
            .map(|(m, sd)| cell(*m, sd))
            .collect();
        let _ = writeln!(s, "{},{}", r.name, cells.join(","));
    }
    Ok(s)
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn emit_report(reports: &[ModelReport], dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = format_csv(reports)?;
    fs::create_dir_all(dir)?;
    let json_path = dir.join("report.json");
    let csv_path = dir.join("report.csv");
    fs::write(&json_path, serde_json::to_string_pretty(reports)?)?;
    fs::write(&csv_path, csv)?;
    Ok(vec![json_path, csv_path])
}

/// One labelled track of a timeline plot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub name: String,
    pub labels: Vec<String>,
}

/// Per-frame labels of several tracks side by side:
/// `frame,<track>,<track>,...`.
pub fn timeline_csv(tracks: &[Track]) -> Result<String> {
    let len = tracks.first().map(|t| t.labels.len()).ok_or(Error::Invalid("no tracks".into()))?;
    if tracks.iter().any(|t| t.labels.len() != len) {
        return Err(Error::Shape("timeline tracks differ in length".into()));
    }
    let names: Vec<&str> = tracks.iter().map(|t| t.name.as_str()).collect();
    let mut s = format!("frame,{}\n", names.join(","));
    for f in 0..len {
        let row: Vec<&str> = tracks.iter().map(|t| t.labels[f].as_str()).collect();
        let _ = writeln!(s, "{f},{}", row.join(","));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::aggregate_folds;

    fn report(name: &str, folds: &[f64]) -> ModelReport {
        let per_fold = folds
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (
                    format!("{i}"),
                    Scores {
                        accuracy: Some(*a),
                        edit: Some(a - 1.0),
                        f1_10: Some(a + 1.0),
                        ..Scores::default()
                    },
                )
            })
            .collect();
        ModelReport {
            name: name.into(),
            report: aggregate_folds(per_fold),
        }
    }

    #[test]
    fn empty_input_is_error() {
        assert!(format_csv(&[]).is_err());
        assert!(emit_report(&[], Path::new("/nonexistent")).is_err());
        assert!(timeline_csv(&[]).is_err());
    }

    #[test]
    fn single_fold_shows_zero_std() {
        let csv = format_csv(&[report("A", &[80.0])]).unwrap();
        assert!(csv.lines().nth(1).unwrap().starts_with("A,80.0(0.0),79.0(0.0),81.0(0.0),-"));
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&[report("APc", &[80.0, 90.0])], dir.path()).unwrap();
        let back: Vec<ModelReport> = serde_json::from_str(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert_eq!(back[0].report.mean.accuracy, Some(85.0));
        assert!(fs::read_to_string(&paths[1]).unwrap().contains("85.0(5.0)"));
    }

    #[test]
    fn timeline_layout() {
        let t = |n: &str, l: &[&str]| Track {
            name: n.into(),
            labels: l.iter().map(|s| s.to_string()).collect(),
        };
        let csv = timeline_csv(&[t("truth", &["G1", "G2"]), t("APc", &["G1", "G1"])]).unwrap();
        assert_eq!(csv, "frame,truth,APc\n0,G1,G1\n1,G2,G1\n");
        assert!(timeline_csv(&[t("a", &["G1"]), t("b", &[])]).is_err());
    }
}
