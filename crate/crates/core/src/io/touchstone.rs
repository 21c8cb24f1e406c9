//! Touchstone v1 two-port files. Only S21 is kept.

use std::path::Path;

use num_complex::Complex64;

use super::{apply_meta, finish_meta, fmt_f64, meta_pairs, read_text, split_meta, write_text};
use crate::error::{Error, Result};
use crate::trace::{ComplexTrace, TraceMeta};
use crate::units::{hz_to_rad, rad_to_hz};

/// Number representation of the network data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchstoneFormat {
    /// Real and imaginary parts.
    Ri,
    /// Linear magnitude and angle in degrees.
    Ma,
    /// Magnitude in dB and angle in degrees.
    Db,
}

impl TouchstoneFormat {
    fn to_complex(self, a: f64, b: f64) -> Complex64 {
        match self {
            TouchstoneFormat::Ri => Complex64::new(a, b),
            TouchstoneFormat::Ma => Complex64::from_polar(a, b.to_radians()),
            TouchstoneFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }
}

struct OptionLine {
    unit: f64,
    format: TouchstoneFormat,
}

fn parse_option_line(body: &str) -> std::result::Result<OptionLine, String> {
    // defaults from the v1 standard
    let mut opt = OptionLine { unit: 1e9, format: TouchstoneFormat::Ma };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opt.unit = 1.0,
            "KHZ" => opt.unit = 1e3,
            "MHZ" => opt.unit = 1e6,
            "GHZ" => opt.unit = 1e9,
            "S" => {}
            "Y" | "Z" | "H" | "G" => return Err(format!("only S-parameters are supported, found '{tok}'")),
            "RI" => opt.format = TouchstoneFormat::Ri,
            "MA" => opt.format = TouchstoneFormat::Ma,
            "DB" => opt.format = TouchstoneFormat::Db,
            "R" => {
                let z = tokens.next().ok_or("missing reference impedance after 'R'")?;
                z.parse::<f64>().map_err(|_| format!("bad reference impedance '{z}'"))?;
            }
            other => return Err(format!("unknown option '{other}'")),
        }
    }
    Ok(opt)
}

/// Parses Touchstone v1 two-port text.
///
/// Each record holds frequency followed by S11, S21, S12, S22 as number
/// pairs; records may wrap across lines. `! key=value` comments carry the
/// same metadata as CSV traces.
pub fn parse_touchstone(text: &str, origin: &str) -> Result<ComplexTrace> {
    let mut meta = TraceMeta::default();
    let mut opt: Option<OptionLine> = None;
    let mut numbers: Vec<(f64, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let (data, comment) = match raw.split_once('!') {
            Some((d, c)) => (d, Some(c)),
            None => (raw, None),
        };
        if let Some((k, v)) = comment.and_then(split_meta) {
            apply_meta(&mut meta, k, v).map_err(|m| Error::parse(origin, lineno, m))?;
        }
        let data = data.trim();
        if data.is_empty() {
            continue;
        }
        if let Some(body) = data.strip_prefix('#') {
            // only the first option line counts
            if opt.is_none() {
                opt = Some(parse_option_line(body).map_err(|m| Error::parse(origin, lineno, m))?);
            }
            continue;
        }
        if data.starts_with('[') {
            return Err(Error::parse(origin, lineno, "Touchstone v2 keywords are not supported"));
        }
        for tok in data.split_whitespace() {
            let x = tok
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(origin, lineno, format!("'{tok}' is not a finite number")))?;
            numbers.push((x, lineno));
        }
    }
    let opt = opt.unwrap_or(OptionLine { unit: 1e9, format: TouchstoneFormat::Ma });
    finish_meta(&mut meta);

    if numbers.is_empty() {
        return Err(Error::parse(origin, 0, "no network data"));
    }
    if numbers.len() % 9 != 0 {
        let line = numbers.last().map_or(0, |n| n.1);
        return Err(Error::parse(origin, line, "incomplete two-port record (expected 9 numbers per frequency)"));
    }
    let mut omega = Vec::with_capacity(numbers.len() / 9);
    let mut s21 = Vec::with_capacity(numbers.len() / 9);
    let mut prev = f64::NEG_INFINITY;
    for rec in numbers.chunks_exact(9) {
        let f = rec[0].0 * opt.unit;
        if !(f > prev) {
            return Err(Error::parse(origin, rec[0].1, "frequencies must be strictly increasing"));
        }
        prev = f;
        omega.push(hz_to_rad(f));
        s21.push(opt.format.to_complex(rec[3].0, rec[4].0));
    }
    ComplexTrace::new(omega, s21, meta)
}

pub fn read_touchstone(path: &Path) -> Result<ComplexTrace> {
    parse_touchstone(&read_text(path)?, &path.display().to_string())
}

/// Canonical Touchstone text: Hz, RI, S12 = S21, S11 = S22 = 0.
pub fn touchstone_text(trace: &ComplexTrace) -> String {
    let mut out = String::new();
    for (k, v) in meta_pairs(&trace.meta) {
        out.push_str(&format!("! {k}={v}\n"));
    }
    out.push_str("# Hz S RI R 50\n");
    for (om, z) in trace.omega.iter().zip(&trace.s21) {
        let (re, im) = (fmt_f64(z.re), fmt_f64(z.im));
        out.push_str(&format!("{} 0 0 {re} {im} {re} {im} 0 0\n", fmt_f64(rad_to_hz(*om))));
    }
    out
}

pub fn write_touchstone(path: &Path, trace: &ComplexTrace) -> Result<()> {
    write_text(path, &touchstone_text(trace))
}
