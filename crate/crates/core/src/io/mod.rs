//! File formats: trace files (CSV and Touchstone), sweep manifests and
//! reports.
//!
//! Everything crossing this boundary is converted to SI units and rad/s on
//! the way in. Device-plane power is computed at parse time from the VNA
//! power and the line attenuation (68 dB when not stated).

mod csv_trace;
mod manifest;
mod report;
mod table;
mod touchstone;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::calibrate_power;
use crate::trace::{ComplexTrace, TraceMeta};
use crate::units::DEFAULT_ATTENUATION_DB;

pub use csv_trace::{csv_trace_text, parse_csv_trace, read_csv_trace, write_csv_trace, CSV_HEADER};
pub use manifest::{read_power_sweep, write_power_sweep, ManifestTruth, SweepManifest};
pub use report::{
    age_diff, parse_report_csv, write_qi_plot, write_trace_plot, AgeRow, AgeingTable, DeviceReport, PowerRow,
    QiDelta, Report, TableRow, REPORT_CSV_COLUMNS, SCHEMA_VERSION,
};
pub use table::{read_sim_points, sim_points, Table};
pub use touchstone::{parse_touchstone, read_touchstone, touchstone_text, write_touchstone, TouchstoneFormat};

/// Supported trace file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    Csv,
    TouchstoneS2p,
}

impl TraceFormat {
    /// Format implied by a file extension (`.csv`, `.s2p`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(TraceFormat::Csv),
            Some("s2p") => Ok(TraceFormat::TouchstoneS2p),
            _ => Err(Error::InvalidParameter(format!("cannot infer trace format of {}", path.display()))),
        }
    }
}

/// Reads a trace in the format implied by its extension.
pub fn read_trace(path: &Path) -> Result<ComplexTrace> {
    match TraceFormat::from_path(path)? {
        TraceFormat::Csv => read_csv_trace(path),
        TraceFormat::TouchstoneS2p => read_touchstone(path),
    }
}

pub fn write_trace(path: &Path, trace: &ComplexTrace) -> Result<()> {
    match TraceFormat::from_path(path)? {
        TraceFormat::Csv => write_csv_trace(path, trace),
        TraceFormat::TouchstoneS2p => write_touchstone(path, trace),
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Shortest text that parses back to the same `f64`, in exponent form for
/// very large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::parse(path.display().to_string(), 0, format!("not UTF-8: {e}")))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Metadata keys understood in trace file comments.
const META_KEYS: [&str; 6] = ["device_id", "power_dbm", "attenuation_db", "power_w", "temperature_k", "sweep_direction"];

/// Applies one `key=value` metadata comment.
pub(crate) fn apply_meta(meta: &mut TraceMeta, key: &str, value: &str) -> std::result::Result<(), String> {
    let num = || value.parse::<f64>().map_err(|_| format!("metadata {key}: '{value}' is not a number"));
    match key {
        "device_id" => meta.device_id = Some(value.to_string()),
        "power_dbm" => meta.power_dbm = Some(num()?),
        "attenuation_db" => meta.attenuation_db = Some(num()?),
        "power_w" => meta.power_w = Some(num()?),
        "temperature_k" => meta.temperature_k = Some(num()?),
        "sweep_direction" => meta.direction = value.parse().map_err(|e: Error| e.to_string())?,
        other => log::debug!("ignoring unknown metadata key '{other}'"),
    }
    Ok(())
}

/// Fills the device-plane power from the VNA power when not given.
pub(crate) fn finish_meta(meta: &mut TraceMeta) {
    if meta.power_w.is_none() {
        if let Some(dbm) = meta.power_dbm {
            let att = meta.attenuation_db.unwrap_or(DEFAULT_ATTENUATION_DB);
            meta.power_w = Some(calibrate_power(dbm, att).watts);
        }
    }
}

/// Metadata as `key=value` pairs in a fixed order.
pub(crate) fn meta_pairs(meta: &TraceMeta) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    for key in META_KEYS {
        let v = match key {
            "device_id" => meta.device_id.clone(),
            "power_dbm" => meta.power_dbm.map(fmt_f64),
            "attenuation_db" => meta.attenuation_db.map(fmt_f64),
            "power_w" => meta.power_w.map(fmt_f64),
            "temperature_k" => meta.temperature_k.map(fmt_f64),
            _ => Some(meta.direction.to_string()),
        };
        if let Some(v) = v {
            out.push((key, v));
        }
    }
    out
}

/// Splits `key=value`, trimming both sides.
pub(crate) fn split_meta(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty() && !k.contains(char::is_whitespace)).then(|| (k, v.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_from_vna_side() {
        let mut m = TraceMeta { power_dbm: Some(-40.0), ..Default::default() };
        finish_meta(&mut m);
        assert!((m.power_w.unwrap() / 10f64.powf(-13.8) - 1.0).abs() < 1e-12);
        let mut m = TraceMeta { power_dbm: Some(-40.0), attenuation_db: Some(78.0), ..Default::default() };
        finish_meta(&mut m);
        assert!((m.power_w.unwrap() / 10f64.powf(-14.8) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn formats_from_extension() {
        assert_eq!(TraceFormat::from_path(Path::new("a/b.CSV")).unwrap(), TraceFormat::Csv);
        assert_eq!(TraceFormat::from_path(Path::new("x.s2p")).unwrap(), TraceFormat::TouchstoneS2p);
        assert!(TraceFormat::from_path(Path::new("x.txt")).is_err());
    }

    proptest! {
        #[test]
        fn float_text_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
