use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::signal::RAW_COLUMNS;
use crate::error::{Error, Result};
use crate::gesture::{validate_segments, GestureId, Segment};

/// Reads a kinematics file: one frame per line, 76 whitespace-separated reals.
pub fn parse_kinematics(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    parse_kinematics_str(&text, path)
}

pub fn parse_kinematics_str(text: &str, path: &Path) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let before = values.len();
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| err(format!("non-numeric token {token:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value {token:?}")));
            }
            values.push(v);
        }
        if values.len() - before != RAW_COLUMNS {
            return Err(err(format!("expected {RAW_COLUMNS} columns, found {}", values.len() - before)));
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, RAW_COLUMNS), values).expect("row count matches values"))
}

/// Reads a transcript of `start end Gk` lines, returned sorted by start.
pub fn parse_transcript(path: &Path) -> Result<Vec<Segment>> {
    let text = fs::read_to_string(path)?;
    parse_transcript_str(&text, path)
}

pub fn parse_transcript_str(text: &str, path: &Path) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if tokens.len() != 3 {
            return Err(err(format!("expected \"start end label\", found {} tokens", tokens.len())));
        }
        let start: usize = tokens[0]
            .parse()
            .map_err(|_| err(format!("bad start frame {:?}", tokens[0])))?;
        let end: usize = tokens[1]
            .parse()
            .map_err(|_| err(format!("bad end frame {:?}", tokens[1])))?;
        let gesture: GestureId = tokens[2].parse()?;
        segments.push(Segment::new(start, end, gesture));
    }
    validate_segments(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn row(seed: usize) -> String {
        (0..RAW_COLUMNS)
            .map(|c| format!("{:.6}", (seed * 100 + c) as f64 * 0.01 - 3.0))
            .collect::<Vec<_>>()
            .join("   ")
    }

    // Line-by-line reference reader used only to cross-check the parser.
    fn reference_parse(text: &str) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for line in text.split('\n') {
            let nums: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
            if !nums.is_empty() {
                out.push(nums);
            }
        }
        out
    }

    #[test]
    fn three_lines_give_three_rows() {
        let text = (0..3).map(row).collect::<Vec<_>>().join("\n");
        let m = parse_kinematics_str(&text, Path::new("k.txt")).unwrap();
        assert_eq!(m.dim(), (3, 76));
        assert_eq!(m[[2, 0]], 2.0 * 100.0 * 0.01 - 3.0);
    }

    #[test]
    fn short_line_names_line_number() {
        let mut lines: Vec<String> = (0..3).map(row).collect();
        lines[1] = lines[1].rsplit_once(' ').unwrap().0.trim_end().to_string();
        let err = parse_kinematics_str(&lines.join("\n"), Path::new("k.txt")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 76 columns"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn trailing_blank_lines_ignored() {
        let body = (0..5).map(row).collect::<Vec<_>>().join("\n");
        let padded = format!("{body}\n\n   \n\n");
        let m = parse_kinematics_str(&padded, Path::new("k.txt")).unwrap();
        let reference = reference_parse(&padded);
        assert_eq!(m.nrows(), reference.len());
        for (r, expected) in reference.iter().enumerate() {
            assert_eq!(m.row(r).to_vec(), *expected);
        }
        assert_eq!(m, parse_kinematics_str(&body, Path::new("k.txt")).unwrap());
    }

    #[test]
    fn non_numeric_token_rejected() {
        let mut line = row(0);
        line.push_str(" abc");
        let text = line.replacen("-3.000000", "x1", 1);
        assert!(parse_kinematics_str(&text, Path::new("k")).is_err());
    }

    #[test]
    fn transcript_echo() {
        let t = parse_transcript_str("80 320 G1\n321 450 G5", Path::new("t")).unwrap();
        assert_eq!(
            t,
            vec![Segment::new(80, 320, GestureId::G1), Segment::new(321, 450, GestureId::G5)]
        );
    }

    #[test]
    fn transcript_overlap_and_g7_rejected() {
        assert!(parse_transcript_str("80 320 G1\n300 450 G5", Path::new("t")).is_err());
        assert!(parse_transcript_str("80 320 G7", Path::new("t")).is_err());
        assert!(parse_transcript_str("80 G1", Path::new("t")).is_err());
    }

    #[test]
    fn transcript_out_of_order_is_sorted() {
        let text = "500 600 G3\n80 320 G1 \n 321 450 G2\n";
        let t = parse_transcript_str(text, Path::new("t")).unwrap();
        let mut expected = vec![
            Segment::new(500, 600, GestureId::G3),
            Segment::new(80, 320, GestureId::G1),
            Segment::new(321, 450, GestureId::G2),
        ];
        expected.sort_by(|a, b| a.start.cmp(&b.start));
        assert_eq!(t, expected);
    }

    #[test]
    fn reads_from_disk() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", row(1)).unwrap();
        let m = parse_kinematics(f.path()).unwrap();
        assert_eq!(m.nrows(), 1);
    }
}
