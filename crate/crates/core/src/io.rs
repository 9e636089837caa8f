//! CSV tables, JSON documents and the run manifest.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so every value
//! survives a text round trip bit for bit and re-emitting a parsed table gives
//! identical bytes.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x:.16e}"),
        }
    }
}

impl Cell {
    fn parse(text: &str) -> Result<Cell> {
        if let Ok(i) = text.parse::<i64>() {
            return Ok(Cell::Int(i));
        }
        text.parse::<f64>().map(Cell::Float).map_err(|_| Error::Config(format!("cannot parse CSV cell `{text}`")))
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Int(i) => i as f64,
            Cell::Float(x) => x,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string)).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            rows.push(record.map_err(csv_error)?.iter().map(Cell::parse).collect::<Result<Vec<_>>>()?);
        }
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Table> {
        Table::from_csv(&fs::read_to_string(path)?)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("CSV: {e}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Provenance record written next to every command's outputs. Only the two
/// timestamps vary between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub state: Option<serde_json::Value>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cells_format() {
        assert_eq!(Cell::from(10usize).to_string(), "10");
        assert_eq!(Cell::from(0.5).to_string(), "5.0000000000000000e-1");
        assert_eq!(Cell::from(-1.25).to_string(), "-1.2500000000000000e0");
        assert_eq!(Cell::from(1e-7).to_string(), "9.9999999999999995e-8");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["N", "dg_over_g"]);
        t.push(vec![10usize.into(), 0.25.into()]);
        assert_eq!(t.to_csv().unwrap(), "N,dg_over_g\n10,2.5000000000000000e-1\n");
        assert_eq!(t.column("N").unwrap(), vec![10.0]);
        assert!(t.column("missing").is_none());
    }

    #[test]
    fn bad_cells_are_rejected() {
        assert!(Table::from_csv("a,b\n1,x\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["phi", "mean"]);
        t.push(vec![0.1.into(), (-0.3).into()]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn csv_round_trips_bytes(rows in proptest::collection::vec((0usize..100_000, any::<f64>(), -1e300f64..1e300), 0..20)) {
            let mut t = Table::new(&["N", "x", "y"]);
            for (n, x, y) in rows {
                t.push(vec![n.into(), x.into(), y.into()]);
            }
            let text = t.to_csv().unwrap();
            let again = Table::from_csv(&text).unwrap().to_csv().unwrap();
            prop_assert_eq!(&text, &again);
            for (a, b) in Table::from_csv(&text).unwrap().rows.iter().flatten().zip(t.rows.iter().flatten()) {
                prop_assert!(a.as_f64() == b.as_f64() || (a.as_f64().is_nan() && b.as_f64().is_nan()));
            }
        }
    }
}
