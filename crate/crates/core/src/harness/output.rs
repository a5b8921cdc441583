//! Trajectory CSV and the structured run report.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{EquilibriumReport, Prop3Bound, StabilityReport};
use crate::fields::FieldBounds;
use crate::harness::HarnessError;
use crate::sim::{InitialState, Metrics, Record};

pub const CSV_COLUMNS: [&str; 15] =
    ["t", "x", "y", "theta", "vx", "vy", "s", "eps", "sdot", "e", "omega", "sigma", "zeta", "r", "phi"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

pub fn write_trajectory_csv<W: Write>(out: W, records: &[Record]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(|e| HarnessError::Io(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn save_trajectory_csv(path: &Path, records: &[Record]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_trajectory_csv(std::io::BufWriter::new(file), records)
}

/// Reads a trajectory CSV, requiring the exact column schema.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<Record>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| HarnessError::Io(e.to_string()))?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(HarnessError::Parse {
            path: "header".into(),
            line: Some(1),
            message: format!("expected columns {}", CSV_COLUMNS.join(",")),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| HarnessError::Parse { path: "row".into(), line: Some(i + 2), message: e.to_string() })
        })
        .collect()
}

pub fn load_trajectory_csv(path: &Path) -> Result<Vec<Record>, HarnessError> {
    read_trajectory_csv(File::open(path).map_err(|e| io_err(path, e))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub index: usize,
    pub initial: InitialState,
    pub csv: String,
    pub metrics: Metrics,
}

/// Per-scenario summary. Analysis attachments are present only when
/// computable for the field kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub runs: Vec<RunEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_bounds: Option<FieldBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Prop3Bound>,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Record> {
        vec![
            Record { t: 0.0, x: 1.0, y: 2.0, theta: Some(0.5), s: 19.0, eps: -1.0, omega: Some(0.1), sigma: Some(0.0), r: Some(3.0), phi: Some(-1.5), ..Default::default() },
            Record { t: 0.01, x: 1.1, y: 2.0, vx: Some(0.5), vy: Some(0.0), s: 19.5, eps: -0.5, zeta: Some(0.25), ..Default::default() },
        ]
    }

    #[test]
    fn csv_round_trip_with_empty_cells() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,theta,vx,vy,s,eps,sdot,e,omega,sigma,zeta,r,phi\n"));
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "t,x,y\n0,1,2\n";
        assert!(read_trajectory_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn bad_row_reports_line() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap() + "x,1,2,,,,1,1,1,1,,,,,\n";
        match read_trajectory_csv(text.as_bytes()).unwrap_err() {
            HarnessError::Parse { line, .. } => assert_eq!(line, Some(4)),
            other => panic!("{other:?}"),
        }
    }
}
