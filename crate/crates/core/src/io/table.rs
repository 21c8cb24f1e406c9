//! Plain numeric CSV tables with `# key=value` metadata comments, used for
//! Q_i curves, temperature sweeps and inductance simulation points.

use std::collections::BTreeMap;
use std::path::Path;

use super::{fmt_f64, read_text, split_meta, write_text};
use crate::error::{Error, Result};
use crate::lk::SimPoint;

/// A numeric table; blank cells are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    origin: String,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let Some(comment) = line.trim().strip_prefix('#') else { break };
            if let Some((k, v)) = split_meta(comment) {
                meta.insert(k.to_string(), v.to_string());
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::parse(origin, 1, e.to_string()))?.clone();
        let columns: Vec<String> = headers.iter().map(str::to_string).collect();
        if columns.iter().all(|c| c.is_empty()) {
            return Err(Error::parse(origin, 1, "missing header"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(origin, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != columns.len() {
                return Err(Error::parse(origin, line, format!("expected {} columns, found {}", columns.len(), rec.len())));
            }
            let mut row = Vec::with_capacity(rec.len());
            for (cell, name) in rec.iter().zip(&columns) {
                if cell.is_empty() {
                    row.push(None);
                    continue;
                }
                let x = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(origin, line, format!("{name}: '{cell}' is not a finite number")))?;
                row.push(Some(x));
            }
            rows.push(row);
        }
        Ok(Table { meta, columns, rows, origin: origin.to_string() })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    /// Values of a required column.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::parse(&self.origin, 1, format!("missing column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    /// Rows where both columns are present.
    pub fn pairs(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let (xs, ys) = (self.column(x)?, self.column(y)?);
        Ok(xs.into_iter().zip(ys).filter_map(|(a, b)| Some((a?, b?))).collect())
    }

    /// Numeric metadata value.
    pub fn meta_f64(&self, key: &str) -> Result<Option<f64>> {
        self.meta
            .get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::parse(&self.origin, 0, format!("metadata {key}: '{v}' is not a number")))
            })
            .transpose()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(fmt_f64).unwrap_or_default())).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ASCII output"));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// Simulation points from columns `ls_ph_per_sq,f0_hz`.
pub fn read_sim_points(path: &Path) -> Result<Vec<SimPoint>> {
    sim_points(&Table::read(path)?)
}

pub fn sim_points(table: &Table) -> Result<Vec<SimPoint>> {
    Ok(table.pairs("ls_ph_per_sq", "f0_hz")?.into_iter().map(|(ls, f0)| SimPoint { ls: ls * 1e-12, f0 }).collect())
}
