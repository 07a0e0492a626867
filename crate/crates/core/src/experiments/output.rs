//! CSV tables with a TOML metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ConfigFile, RunConfig};
use crate::{Error, Result};

pub const LIBRARY: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Flag(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(v),
            Cell::Flag(v) => v.to_string(),
        }
    }
}

/// Twelve significant digits in scientific notation.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000000e0"
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

#[derive(Debug, Clone, Serialize)]
struct SidecarMeta<'a> {
    library: &'a str,
    version: &'a str,
    command: &'a str,
    table: String,
}

#[derive(Debug, Clone, Serialize)]
struct Sidecar<'a> {
    meta: SidecarMeta<'a>,
    config: ConfigFile,
}

/// `out.csv` → `out.toml`.
pub fn sidecar_path(path: &Path) -> Result<PathBuf> {
    let side = path.with_extension("toml");
    if side == path {
        return Err(Error::Config(format!("output path {} collides with its sidecar", path.display())));
    }
    Ok(side)
}

/// Writes `table` to `path` and the resolved configuration next to it.
pub fn emit_table(table: &Table, path: &Path, command: &str, config: &RunConfig) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to write an empty result table"));
    }
    let file = std::fs::File::create(path)?;
    table.write_csv(std::io::BufWriter::new(file))?;
    let sidecar = Sidecar {
        meta: SidecarMeta {
            library: LIBRARY,
            version: VERSION,
            command,
            table: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        },
        config: config.to_file(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(sidecar_path(path)?, text)?;
    Ok(())
}

/// A CSV file read back as numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not in table ({})", self.header.join(", "))))
    }
}

pub fn read_table(path: &Path) -> Result<NumericTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| match s {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => s.parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}': {e}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_real(1.0), "1.00000000000e0");
        assert_eq!(format_real(-0.0), "0.00000000000e0");
        assert_eq!(format_real(0.1234567890123456), "1.23456789012e-1");
        let x: f64 = 2.718281828459045e-7;
        let back: f64 = format_real(x).parse().unwrap();
        assert!(((back - x) / x).abs() < 1e-11);
    }

    #[test]
    fn table_csv_layout() {
        let mut t = Table::new(vec!["sites".into(), "qfi".into(), "peak".into()]);
        t.push(vec![Cell::Int(3), Cell::Real(2.5), Cell::Flag(false)]);
        assert_eq!(t.to_csv_string(), "sites,qfi,peak\n3,2.50000000000e0,false\n");
    }

    #[test]
    fn sidecar_never_overwrites_table() {
        assert_eq!(sidecar_path(Path::new("a/run.csv")).unwrap(), PathBuf::from("a/run.toml"));
        assert!(sidecar_path(Path::new("run.toml")).is_err());
    }
}
