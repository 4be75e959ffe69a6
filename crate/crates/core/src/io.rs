//! CSV ingestion and export.
//!
//! Datasets use a `score,group[,label]` header (column order is free, extra
//! columns are ignored). Labels are `0` or `1`; an empty label cell means the
//! row is unlabeled.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::DisparityCurve;
use crate::model::{ScoreDomain, ScoredDataset, ScoredRow};

/// Column positions of a dataset header.
#[derive(Debug, Clone, Copy)]
pub struct Columns {
    pub score: usize,
    pub group: usize,
    pub label: Option<usize>,
}

impl Columns {
    pub fn locate(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        Ok(Columns {
            score: find("score").ok_or(Error::MissingColumn("score"))?,
            group: find("group").ok_or(Error::MissingColumn("group"))?,
            label: find("label"),
        })
    }

    /// Parses one record; `row` is the zero-based data row for messages.
    pub fn parse(&self, record: &csv::StringRecord, row: usize) -> Result<ScoredRow> {
        let raw = record.get(self.score).unwrap_or("").trim();
        let score = raw.parse::<f64>().map_err(|_| Error::BadScore {
            row,
            value: raw.to_string(),
        })?;
        if !score.is_finite() {
            return Err(Error::NonFiniteScore { row });
        }
        let group = record.get(self.group).unwrap_or("").trim().to_string();
        let label = match self.label.and_then(|i| record.get(i)).map(str::trim) {
            None | Some("") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            Some(other) => {
                return Err(Error::NonBinaryLabel {
                    row,
                    label: other.to_string(),
                })
            }
        };
        Ok(ScoredRow {
            score,
            group,
            label,
        })
    }
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<ScoredRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = Columns::locate(rdr.headers()?)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| cols.parse(&rec?, i))
        .collect()
}

pub fn read_dataset(path: impl AsRef<Path>, domain: ScoreDomain) -> Result<ScoredDataset> {
    let rows = read_rows(File::open(path)?)?;
    ScoredDataset::validate(rows, domain)
}

/// Writes rows with the standard header. The label column is written when
/// any row carries a label.
pub fn write_rows<W: Write>(writer: W, rows: &[ScoredRow]) -> Result<()> {
    let with_label = rows.iter().any(|r| r.label.is_some());
    let mut w = csv::Writer::from_writer(writer);
    if with_label {
        w.write_record(["score", "group", "label"])?;
    } else {
        w.write_record(["score", "group"])?;
    }
    for r in rows {
        let score = r.score.to_string();
        if with_label {
            let label = r.label.map(|l| l.to_string()).unwrap_or_default();
            w.write_record([score.as_str(), r.group.as_str(), label.as_str()])?;
        } else {
            w.write_record([score.as_str(), r.group.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format curve export: `threshold,group,metric,value`.
pub fn write_curve<W: Write>(writer: W, curve: &DisparityCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "group", "metric", "value"])?;
    let metric = curve.metric.name();
    for (group, values) in &curve.values {
        for (tau, v) in curve.grid.points().iter().zip(values) {
            w.write_record([tau.to_string(), group.clone(), metric.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
