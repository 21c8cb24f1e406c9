//! `freq_hz,s21_re,s21_im` trace files with `# key=value` metadata comments.

use std::path::Path;

use num_complex::Complex64;

use super::{apply_meta, finish_meta, fmt_f64, meta_pairs, read_text, split_meta, write_text};
use crate::error::{Error, Result};
use crate::trace::{ComplexTrace, TraceMeta};
use crate::units::{hz_to_rad, rad_to_hz};

pub const CSV_HEADER: [&str; 3] = ["freq_hz", "s21_re", "s21_im"];

/// Parses CSV trace text. `origin` names the source in error messages.
pub fn parse_csv_trace(text: &str, origin: &str) -> Result<ComplexTrace> {
    let mut meta = TraceMeta::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        let Some(comment) = line.strip_prefix('#') else {
            if line.is_empty() {
                continue;
            }
            break;
        };
        if let Some((k, v)) = split_meta(comment) {
            apply_meta(&mut meta, k, v).map_err(|m| Error::parse(origin, i + 1, m))?;
        }
    }
    finish_meta(&mut meta);

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(origin, 1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        let line = headers.position().map_or(1, |p| p.line() as usize);
        return Err(Error::parse(origin, line, format!("expected header '{}'", CSV_HEADER.join(","))));
    }

    let mut omega = Vec::new();
    let mut s21 = Vec::new();
    let mut prev_f = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(origin, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(Error::parse(origin, line, format!("expected 3 columns, found {}", rec.len())));
        }
        let mut vals = [0.0; 3];
        for (v, (field, name)) in vals.iter_mut().zip(rec.iter().zip(CSV_HEADER)) {
            *v = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(origin, line, format!("{name}: '{field}' is not a finite number")))?;
        }
        if !(vals[0] > prev_f) {
            return Err(Error::parse(origin, line, "frequencies must be strictly increasing"));
        }
        prev_f = vals[0];
        omega.push(hz_to_rad(vals[0]));
        s21.push(Complex64::new(vals[1], vals[2]));
    }
    if omega.is_empty() {
        return Err(Error::parse(origin, 0, "no data rows"));
    }
    ComplexTrace::new(omega, s21, meta)
}

pub fn read_csv_trace(path: &Path) -> Result<ComplexTrace> {
    parse_csv_trace(&read_text(path)?, &path.display().to_string())
}

/// Canonical CSV text of a trace.
pub fn csv_trace_text(trace: &ComplexTrace) -> String {
    let mut out = String::new();
    for (k, v) in meta_pairs(&trace.meta) {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (om, z) in trace.omega.iter().zip(&trace.s21) {
        w.write_record([fmt_f64(rad_to_hz(*om)), fmt_f64(z.re), fmt_f64(z.im)]).expect("in-memory write");
    }
    out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ASCII output"));
    out
}

pub fn write_csv_trace(path: &Path, trace: &ComplexTrace) -> Result<()> {
    write_text(path, &csv_trace_text(trace))
}
