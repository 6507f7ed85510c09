//! Run reports and their CSV form.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::search::TracePoint;

/// First column of every report row.
pub const REPORT_FORMAT: &str = "maastar-report-v1";

/// One solver run. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub command: String,
    pub problem: String,
    pub horizon: usize,
    /// `mdp`, `recursive`, or `none` for brute force.
    pub heuristic: String,
    pub weight: f64,
    /// Negative infinity when no full-depth vector was found.
    pub value: f64,
    pub proven_optimal: bool,
    pub evaluated_count: u64,
    pub subsearch_evaluated: u64,
    pub max_open_size: usize,
    /// Empty when timing is suppressed.
    pub wall_time_s: Option<f64>,
    /// Incumbent improvements, `;`-separated `value@evaluated` or
    /// `value@evaluated@seconds` items.
    pub trace: String,
    pub published_value: Option<f64>,
    pub published_evaluated: Option<u64>,
    pub published_max_open: Option<u64>,
    pub published_match: Option<bool>,
}

impl RunReport {
    pub fn new(command: &str, problem: &str, horizon: usize, heuristic: &str, weight: f64) -> Self {
        RunReport {
            format: REPORT_FORMAT.to_string(),
            command: command.to_string(),
            problem: problem.to_string(),
            horizon,
            heuristic: heuristic.to_string(),
            weight,
            value: f64::NEG_INFINITY,
            proven_optimal: false,
            evaluated_count: 0,
            subsearch_evaluated: 0,
            max_open_size: 0,
            wall_time_s: None,
            trace: String::new(),
            published_value: None,
            published_evaluated: None,
            published_max_open: None,
            published_match: None,
        }
    }
}

pub fn format_trace(points: &[TracePoint], timing: bool) -> String {
    let mut out = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        write!(out, "{}@{}", p.value, p.evaluated).unwrap();
        if timing {
            write!(out, "@{}", p.elapsed.as_secs_f64()).unwrap();
        }
    }
    out
}

/// Parses a trace column back into `(value, evaluated)` pairs.
pub fn parse_trace(trace: &str) -> Option<Vec<(f64, u64)>> {
    if trace.is_empty() {
        return Some(Vec::new());
    }
    trace
        .split(';')
        .map(|item| {
            let mut parts = item.split('@');
            let value = parts.next()?.parse().ok()?;
            let evaluated = parts.next()?.parse().ok()?;
            Some((value, evaluated))
        })
        .collect()
}

pub fn write_reports<W: io::Write>(out: W, reports: &[RunReport]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in reports {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_reports(path: &Path, reports: &[RunReport]) -> csv::Result<()> {
    write_reports(std::fs::File::create(path)?, reports)
}

pub fn read_reports<R: io::Read>(input: R) -> csv::Result<Vec<RunReport>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn load_reports(path: &Path) -> csv::Result<Vec<RunReport>> {
    read_reports(std::fs::File::open(path)?)
}
