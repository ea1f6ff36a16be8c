//! CSV ingestion and the percentage-change transforms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// Optional preprocessing applied after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    #[default]
    None,
    /// `(x_t / x_{t-1} - 1) * 100`.
    PctChange,
    /// The square of the percentage change.
    SquaredPctChange,
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Transform::None),
            "pct-change" => Ok(Transform::PctChange),
            "squared-pct-change" => Ok(Transform::SquaredPctChange),
            other => Err(Error::InvalidConfig(format!(
                "unknown transform `{other}` (expected none, pct-change or squared-pct-change)"
            ))),
        }
    }
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::PctChange => "pct-change",
            Transform::SquaredPctChange => "squared-pct-change",
        }
    }
}

/// Parse a CSV of observations.
///
/// Accepts one value per row, or `t,value` rows in which case the first
/// column is ignored and the grid is rebuilt as `i/n`. A non-numeric first
/// row is treated as a header. Any other non-numeric row fails with its
/// line number.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let field = trimmed
            .split(',')
            .next_back()
            .expect("split always yields one field")
            .trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(Error::NonFinite { index: line_no }),
            Err(_) if line_no == 1 => continue, // header row
            Err(_) => {
                return Err(Error::ParseError {
                    line: line_no,
                    reason: format!("`{field}` is not a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(values)
}

/// Apply a transform to raw values.
pub fn apply_transform(values: &[f64], transform: Transform) -> Result<Vec<f64>> {
    match transform {
        Transform::None => Ok(values.to_vec()),
        Transform::PctChange | Transform::SquaredPctChange => {
            let mut out = Vec::with_capacity(values.len().saturating_sub(1));
            for (i, pair) in values.windows(2).enumerate() {
                let pct = (pair[1] / pair[0] - 1.0) * 100.0;
                if !pct.is_finite() {
                    return Err(Error::NonFinite { index: i + 2 });
                }
                out.push(if transform == Transform::PctChange {
                    pct
                } else {
                    pct * pct
                });
            }
            Ok(out)
        }
    }
}

/// Read, parse and transform a CSV file into a [`Series`]. Also returns the
/// SHA-256 digest of the raw file bytes for the run manifest.
pub fn ingest(path: &Path, transform: Transform) -> Result<(Series, String)> {
    let bytes = std::fs::read(path)?;
    let digest = crate::report::bytes_digest(&bytes);
    let text = String::from_utf8_lossy(&bytes);
    let values = apply_transform(&parse_values(&text)?, transform)?;
    Ok((Series::new(values)?, digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_file_parses() {
        let values = parse_values("y\n1.0\n2.0\n").unwrap();
        assert_eq!(values, vec![1.0, 2.0]);
    }

    #[test]
    fn two_column_rows_take_the_last_field() {
        let values = parse_values("t,y\n0.1,5.0\n0.2,6.5\n").unwrap();
        assert_eq!(values, vec![5.0, 6.5]);
    }

    #[test]
    fn bad_rows_report_their_line() {
        let err = parse_values("1.0\n2.0\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 3, .. }));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse_values("y\n"), Err(Error::EmptySeries)));
        assert!(matches!(parse_values(""), Err(Error::EmptySeries)));
    }

    #[test]
    fn pct_change_examples() {
        let raw = [100.0, 110.0, 99.0];
        let pct = apply_transform(&raw, Transform::PctChange).unwrap();
        assert!((pct[0] - 10.0).abs() < 1e-12);
        assert!((pct[1] + 10.0).abs() < 1e-12);
        let sq = apply_transform(&raw, Transform::SquaredPctChange).unwrap();
        assert!((sq[0] - 100.0).abs() < 1e-12);
        assert!((sq[1] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_base_value_fails_the_transform() {
        let err = apply_transform(&[0.0, 1.0], Transform::PctChange).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
