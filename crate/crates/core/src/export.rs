//! CSV exports.
//!
//! All files are UTF-8 with a header row. Floats are written in Rust's
//! shortest round-trip decimal form, so a value read back parses to the same
//! bits. Rows are ordered by period index or consumer id.

use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use crate::aggregation::PeriodRecord;
use crate::billing::Bill;
use crate::detection::DetectionReport;
use crate::error::{Error, Result};
use crate::harness::{ConcentrationPoint, Estimate, TableCell, TrialOutcome};

pub const RECORDS_HEADER: [&str; 6] = [
    "period",
    "actual_total",
    "reported_total",
    "leakage",
    "sampled_id",
    "sampled_report",
];
pub const DETECTION_HEADER: [&str; 4] = ["consumer_id", "sample_count", "corr", "label"];
pub const BILLS_HEADER: [&str; 4] = ["consumer_id", "window_start", "window_end", "amount"];
pub const TABLE_HEADER: [&str; 5] = ["case", "months", "probability", "stderr", "reps"];
pub const OUTCOMES_HEADER: [&str; 9] = [
    "trial",
    "seed",
    "class",
    "exact_match",
    "false_positives",
    "missed",
    "labeled",
    "selected",
    "correct",
];

struct Csv<'p> {
    path: &'p Path,
    writer: csv::Writer<File>,
}

impl<'p> Csv<'p> {
    fn create(path: &'p Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut csv = Self {
            path,
            writer: csv::Writer::from_writer(file),
        };
        csv.row(header)?;
        Ok(csv)
    }

    fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| self.err(e))
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(self.path, e))
    }

    fn err(&self, e: csv::Error) -> Error {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(self.path, io),
            other => Error::io(self.path, std::io::Error::other(format!("{other:?}"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|c| c.to_string()).unwrap_or_default()
}

pub fn write_records(path: &Path, records: &[PeriodRecord]) -> Result<()> {
    let mut sorted: Vec<&PeriodRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.period_index);
    let mut csv = Csv::create(path, &RECORDS_HEADER)?;
    for r in sorted {
        csv.row([
            r.period_index.to_string(),
            r.actual_total.to_string(),
            r.reported_total.to_string(),
            r.leakage.to_string(),
            r.sampled_id.to_string(),
            r.sampled_report.to_string(),
        ])?;
    }
    csv.finish()
}

#[derive(Debug, Deserialize)]
struct RecordRow {
    period: u64,
    actual_total: f64,
    reported_total: f64,
    leakage: f64,
    sampled_id: u32,
    sampled_report: f64,
}

/// Reads a records CSV written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<PeriodRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(RECORDS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("expected header {}", RECORDS_HEADER.join(",")),
        });
    }
    reader
        .deserialize::<RecordRow>()
        .map(|row| {
            let r = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            Ok(PeriodRecord {
                period_index: r.period,
                actual_total: r.actual_total,
                reported_total: r.reported_total,
                leakage: r.leakage,
                sampled_id: r.sampled_id,
                sampled_report: r.sampled_report,
            })
        })
        .collect()
}

pub fn write_detection(path: &Path, report: &DetectionReport) -> Result<()> {
    let mut entries = report.entries.clone();
    entries.sort_by_key(|e| e.consumer_id);
    let mut csv = Csv::create(path, &DETECTION_HEADER)?;
    for e in entries {
        csv.row([
            e.consumer_id.to_string(),
            e.sample_count.to_string(),
            opt(e.corr),
            e.label.to_string(),
        ])?;
    }
    csv.finish()
}

/// Bills carry reported-value amounts only; there is deliberately no usage
/// column.
pub fn write_bills(path: &Path, bills: &[Bill]) -> Result<()> {
    let mut sorted = bills.to_vec();
    sorted.sort_by_key(|b| (b.window_start, b.consumer_id));
    let mut csv = Csv::create(path, &BILLS_HEADER)?;
    for b in sorted {
        csv.row([
            b.consumer_id.to_string(),
            b.window_start.to_string(),
            b.window_end.to_string(),
            b.amount.to_string(),
        ])?;
    }
    csv.finish()
}

/// One row per `(case, months)` cell.
pub fn write_table(path: &Path, cells: &[TableCell]) -> Result<()> {
    let mut csv = Csv::create(path, &TABLE_HEADER)?;
    for c in cells {
        estimate_row(&mut csv, c.case.label(), c.months, &c.estimate)?;
    }
    csv.finish()
}

fn estimate_row(csv: &mut Csv<'_>, case: &str, months: f64, e: &Estimate) -> Result<()> {
    csv.row([
        case.to_string(),
        months.to_string(),
        e.probability.to_string(),
        e.stderr.to_string(),
        e.reps.to_string(),
    ])
}

/// One row per case, one probability column per duration.
pub fn write_table_wide(path: &Path, cells: &[TableCell]) -> Result<()> {
    let mut months: Vec<f64> = Vec::new();
    for c in cells {
        if !months.contains(&c.months) {
            months.push(c.months);
        }
    }
    let mut header = vec!["case".to_string()];
    header.extend(months.iter().map(|m| format!("months_{m}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::create(path, &header_refs)?;
    let mut cases: Vec<_> = cells.iter().map(|c| c.case).collect();
    cases.dedup();
    for case in cases {
        let mut row = vec![case.label().to_string()];
        for m in &months {
            let cell = cells.iter().find(|c| c.case == case && c.months == *m);
            row.push(opt(cell.map(|c| c.estimate.probability)));
        }
        csv.row(row)?;
    }
    csv.finish()
}

/// Duration sweep for one scenario, in the table schema.
pub fn write_sweep(path: &Path, case: &str, points: &[(f64, Estimate)]) -> Result<()> {
    let mut csv = Csv::create(path, &TABLE_HEADER)?;
    for (m, e) in points {
        estimate_row(&mut csv, case, *m, e)?;
    }
    csv.finish()
}

pub fn write_outcomes(path: &Path, outcomes: &[TrialOutcome]) -> Result<()> {
    let mut csv = Csv::create(path, &OUTCOMES_HEADER)?;
    for (i, o) in outcomes.iter().enumerate() {
        let labeled: Vec<String> = o.labeled_malicious.iter().map(u32::to_string).collect();
        csv.row([
            i.to_string(),
            o.trial_seed.to_string(),
            o.class.to_string(),
            o.exact_match.to_string(),
            o.false_positive_count.to_string(),
            o.missed_count.to_string(),
            labeled.join(" "),
            o.selected.map(|s| s.to_string()).unwrap_or_default(),
            o.correct.to_string(),
        ])?;
    }
    csv.finish()
}

/// Per-consumer correlations for every duration, long format.
pub fn write_concentration(path: &Path, points: &[ConcentrationPoint]) -> Result<()> {
    let mut csv = Csv::create(
        path,
        &["months", "consumer_id", "sample_count", "corr", "label"],
    )?;
    for p in points {
        for e in &p.report.entries {
            csv.row([
                p.months.to_string(),
                e.consumer_id.to_string(),
                e.sample_count.to_string(),
                opt(e.corr),
                e.label.to_string(),
            ])?;
        }
    }
    csv.finish()
}

pub fn write_concentration_summary(path: &Path, points: &[ConcentrationPoint]) -> Result<()> {
    let mut csv = Csv::create(path, &["months", "benign_std"])?;
    for p in points {
        csv.row([p.months.to_string(), p.benign_std.to_string()])?;
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{ConsumerDetection, Label};

    #[test]
    fn detection_csv_is_sorted_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let entry = |id, corr, label| ConsumerDetection {
            consumer_id: id,
            sample_count: 3,
            corr,
            label,
        };
        let report = DetectionReport {
            entries: vec![
                entry(2, Some(-0.25), Label::Benign),
                entry(0, Some(1.0), Label::MaliciousUnder),
                entry(1, None, Label::InsufficientData),
            ],
        };
        write_detection(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "consumer_id,sample_count,corr,label\n\
             0,3,1,malicious_under\n\
             1,3,,insufficient_data\n\
             2,3,-0.25,benign\n"
        );
    }

    #[test]
    fn records_read_back_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records: Vec<PeriodRecord> = (0..20)
            .map(|t| {
                let a = 1.0 / (t as f64 + 3.0);
                PeriodRecord {
                    period_index: t,
                    actual_total: a * 100.0,
                    reported_total: a * 99.1,
                    leakage: a * 100.0 - a * 99.1,
                    sampled_id: (t % 7) as u32,
                    sampled_report: a.sqrt(),
                }
            })
            .collect();
        write_records(&path, &records).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn missing_directory_reports_path() {
        let err = write_bills(Path::new("/nonexistent-dir/x/bills.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/bills.csv"));
    }
}
