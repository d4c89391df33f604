use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{Result, SpcaError};

/// Column order of every records file.
pub const CSV_HEADER: [&str; 17] = [
    "algorithm",
    "family",
    "d",
    "s",
    "k",
    "gamma",
    "delta",
    "n",
    "seed",
    "mode",
    "r",
    "T",
    "metric",
    "value",
    "wall_ms",
    "iterations_used",
    "flags",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sin2,
    Correlation2,
    /// Rayleigh quotient over the trace; used where no truth exists.
    VarianceFraction,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Sin2 => "sin2",
            Metric::Correlation2 => "correlation2",
            Metric::VarianceFraction => "variance_fraction",
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Sample count; `Population` is the noiseless `n = ∞` case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleSize {
    Finite(usize),
    Population,
}

impl Serialize for SampleSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleSize::Finite(n) => s.serialize_u64(*n as u64),
            SampleSize::Population => s.serialize_str("inf"),
        }
    }
}

fn join_flags<S: Serializer>(flags: &[String], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&flags.join(";"))
}

/// One output row. Optional columns serialize as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub algorithm: String,
    pub family: String,
    pub d: usize,
    pub s: usize,
    pub k: usize,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub n: SampleSize,
    pub seed: u64,
    pub mode: Option<String>,
    pub r: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub metric: Metric,
    pub value: f64,
    pub wall_ms: f64,
    pub iterations_used: usize,
    #[serde(serialize_with = "join_flags")]
    pub flags: Vec<String>,
}

impl ExperimentRecord {
    /// `value ∈ [0, 1]` and `wall_ms ≥ 0`.
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.value) {
            return Err(SpcaError::Numerical {
                message: format!("{} value {} outside [0, 1]", self.metric.as_str(), self.value),
                residual: self.value,
            });
        }
        if !(self.wall_ms >= 0.0) {
            return Err(SpcaError::param(format!("negative wall time {}", self.wall_ms)));
        }
        Ok(())
    }

    /// The same row with a different metric and value.
    pub fn with_metric(&self, metric: Metric, value: f64) -> Self {
        Self {
            metric,
            value,
            ..self.clone()
        }
    }
}

/// Writes records with the header row (also for an empty list).
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let fmt_err = |e: csv::Error| SpcaError::Format(format!("writing records: {e}"));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(fmt_err)?;
    for rec in records {
        w.serialize(rec).map_err(fmt_err)?;
    }
    w.flush()
        .map_err(|e| SpcaError::Format(format!("writing records: {e}")))
}

pub fn write_records_file(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SpcaError::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
}
