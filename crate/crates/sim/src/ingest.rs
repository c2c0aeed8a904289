//! Measurement CSV ingestion.
//!
//! Layout: a header row, optional leading `operator` and `device` columns,
//! then the feature columns, then the runtime (target) column. Row order is
//! preserved since it carries the drift structure.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use streamreg::ObservedPair;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("line {line}: negative runtime {value}")]
    NegativeRuntime { line: u64, value: f64 },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestSchema {
    /// Expected number of feature columns; inferred from the header when unset.
    pub dims: Option<usize>,
    /// Accept negative targets, as in noisy synthetic streams.
    pub signed: bool,
}

impl IngestSchema {
    pub fn dims(k: usize) -> Self {
        Self { dims: Some(k), signed: false }
    }

    pub fn signed(mut self) -> Self {
        self.signed = true;
        self
    }

    /// Parses comma-separated flags: `dims=K`, `signed=true|false`.
    pub fn parse(flags: &str) -> Result<Self, String> {
        let mut schema = Self::default();
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag.split_once('=') {
                Some(("dims", v)) => schema.dims = Some(v.parse().map_err(|_| format!("bad dims value {v:?}"))?),
                Some(("signed", v)) => schema.signed = v.parse().map_err(|_| format!("bad signed value {v:?}"))?,
                _ => return Err(format!("unknown schema flag {flag:?}")),
            }
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub operator: String,
    pub device: String,
    pub features: Vec<f64>,
    pub runtime_ms: f64,
}

impl MeasurementRecord {
    pub fn to_pair(&self) -> ObservedPair {
        ObservedPair::new(self.features.clone(), self.runtime_ms)
    }
}

pub fn read_measurements<R: Read>(reader: R, schema: IngestSchema) -> Result<Vec<MeasurementRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = rdr.records();
    let parse_err = |line: u64, message: String| IngestError::ParseError { line, message };
    let header = match rows.next() {
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let labels = header.iter().take(2).take_while(|h| matches!(h.to_ascii_lowercase().as_str(), "operator" | "device")).count();
    let numeric = header.len().saturating_sub(labels);
    if numeric < 2 {
        return Err(parse_err(1, "need at least one feature column and a runtime column".into()));
    }
    let dims = numeric - 1;
    if let Some(k) = schema.dims.filter(|&k| k != dims) {
        return Err(parse_err(1, format!("header has {dims} feature columns, schema expects {k}")));
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), row.len())));
        }
        let mut values = Vec::with_capacity(numeric);
        for (col, field) in row.iter().enumerate().skip(labels) {
            let v: f64 = field.parse().map_err(|_| parse_err(line, format!("column {} is not a number: {field:?}", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {} is not finite", col + 1)));
            }
            values.push(v);
        }
        let runtime_ms = values.pop().expect("at least two numeric columns");
        if runtime_ms < 0.0 && !schema.signed {
            return Err(IngestError::NegativeRuntime { line, value: runtime_ms });
        }
        let label = |i: usize| if i < labels { row[i].to_string() } else { String::new() };
        out.push(MeasurementRecord { operator: label(0), device: label(1), features: values, runtime_ms });
    }
    Ok(out)
}

pub fn ingest_measurements(path: &Path, schema: IngestSchema) -> Result<Vec<ObservedPair>, IngestError> {
    let records = read_measurements(File::open(path)?, schema)?;
    Ok(records.iter().map(MeasurementRecord::to_pair).collect())
}
