//! Column-named numeric tables and their CSV form.
//!
//! Reals are written as `{:.16e}` (17 significant digits), which parses back
//! to the same `f64`, so reading and rewriting a table is byte-identical.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Real(f64),
    Count(u64),
}

impl Cell {
    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Real(v) => v,
            Cell::Count(n) => n as f64,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Count(n) => n.to_string(),
        }
    }

    fn parse(field: &str) -> Result<Self> {
        let numeric = |e: std::num::ParseFloatError| Error::Format(format!("bad cell {field:?}: {e}"));
        if field.bytes().all(|b| b.is_ascii_digit()) && !field.is_empty() {
            field
                .parse()
                .map(Cell::Count)
                .map_err(|e| Error::Format(format!("bad cell {field:?}: {e}")))
        } else {
            field.parse().map(Cell::Real).map_err(numeric)
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Count(n as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Format(format!("writing CSV: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render())).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Format(format!("writing CSV: {e}")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let io = |e: csv::Error| Error::Format(format!("reading CSV: {e}"));
        let header = r.headers().map_err(io)?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map_err(io)?.iter().map(Cell::parse).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }
}
