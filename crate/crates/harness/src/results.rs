//! Result rows, summaries and their CSV encodings.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const RESULTS_SCHEMA: &str = "# schema: graphprop-results v1";
pub const TIMINGS_SCHEMA: &str = "# schema: graphprop-timings v1";
pub const SUMMARY_SCHEMA: &str = "# schema: graphprop-summary v1";

/// Sweep coordinates of one task. Unused axes stay empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coords {
    pub r: Option<usize>,
    pub missing_frac: Option<f64>,
    pub area_frac: Option<f64>,
    pub label_frac: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Nothing was missing, so the metric is undefined.
    NoMissingEntries,
    /// The method failed on this instance.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub repeat: usize,
    pub r: Option<usize>,
    pub missing_frac: Option<f64>,
    pub area_frac: Option<f64>,
    pub label_frac: Option<f64>,
    pub method: String,
    pub metric: String,
    pub variant: String,
    pub value: f64,
    pub status: Status,
}

impl ResultRow {
    pub fn coords(&self) -> Coords {
        Coords {
            r: self.r,
            missing_frac: self.missing_frac,
            area_frac: self.area_frac,
            label_frac: self.label_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub experiment: String,
    pub seed: u64,
    pub repeat: usize,
    pub r: Option<usize>,
    pub missing_frac: Option<f64>,
    pub area_frac: Option<f64>,
    pub label_frac: Option<f64>,
    pub method: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub r: Option<usize>,
    pub missing_frac: Option<f64>,
    pub area_frac: Option<f64>,
    pub label_frac: Option<f64>,
    pub method: String,
    pub metric: String,
    pub variant: String,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    /// Rows with status `ok` and a finite value.
    pub count: usize,
}

fn key_bits(v: Option<f64>) -> Option<u64> {
    v.map(f64::to_bits)
}

/// Mean and spread per (coordinates, method, metric, variant), in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    type Key = (
        Option<usize>,
        Option<u64>,
        Option<u64>,
        Option<u64>,
        String,
        String,
        String,
    );
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, (ResultRow, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        let key = (
            row.r,
            key_bits(row.missing_frac),
            key_bits(row.area_frac),
            key_bits(row.label_frac),
            row.method.clone(),
            row.metric.clone(),
            row.variant.clone(),
        );
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (row.clone(), Vec::new())
        });
        if row.status == Status::Ok && row.value.is_finite() {
            entry.1.push(row.value);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (first, values) = &groups[&key];
            let n = values.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / n as f64
            };
            let std = if n < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            SummaryRow {
                experiment: first.experiment.clone(),
                r: first.r,
                missing_frac: first.missing_frac,
                area_frac: first.area_frac,
                label_frac: first.label_frac,
                method: first.method.clone(),
                metric: first.metric.clone(),
                variant: first.variant.clone(),
                mean,
                std,
                count: n,
            }
        })
        .collect()
}

/// CSV text with a leading schema comment line.
pub fn to_csv<T: Serialize>(schema: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{schema}").expect("write to Vec");
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for row in rows {
            w.serialize(row).map_err(|e| HarnessError::Data(format!("csv: {e}")))?;
        }
        w.flush().expect("write to Vec");
    }
    Ok(out)
}

/// Reads rows back from CSV written by [`to_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(repeat: usize, method: &str, value: f64, status: Status) -> ResultRow {
        ResultRow {
            experiment: "rank-sweep".into(),
            seed: 1,
            repeat,
            r: Some(5),
            missing_frac: Some(0.4),
            area_frac: None,
            label_frac: None,
            method: method.into(),
            metric: "rmse".into(),
            variant: "root-mean".into(),
            value,
            status,
        }
    }

    #[test]
    fn summary_groups_and_skips_failures() {
        let rows = vec![
            row(0, "graphprop", 1.0, Status::Ok),
            row(1, "graphprop", 3.0, Status::Ok),
            row(0, "halrtc", 2.0, Status::Ok),
            row(1, "halrtc", f64::NAN, Status::Failed),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].method, "graphprop");
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((s[1].count, s[1].std), (1, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(0, "graphprop", 0.125, Status::Ok),
            row(1, "gtvm", f64::INFINITY, Status::NoMissingEntries),
        ];
        let bytes = to_csv(RESULTS_SCHEMA, &rows).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with(RESULTS_SCHEMA));
        assert!(text.contains("no-missing-entries"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, text).unwrap();
        let back: Vec<ResultRow> = read_csv(&p).unwrap();
        assert_eq!(back, rows);
    }
}
