//! Machine-readable reports: JSON (canonical), a CSV table mirror, ageing
//! comparisons and plot-ready data files.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{fmt_f64, read_text, write_text};
use crate::error::{Error, Result};
use crate::fitting::{GlobalFitResult, SingleTraceFit, TemperatureFitResult, TlsFitResult};
use crate::trace::ComplexTrace;
use crate::units::rad_to_hz;

pub const SCHEMA_VERSION: u32 = 1;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One drive power of a global fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRow {
    pub power_w: f64,
    pub n_ph_dimless: f64,
    pub gamma_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_stderr_hz: Option<f64>,
    pub q_i_dimless: f64,
}

/// Per-device results. Every field is optional so that partial reports
/// from separate fits can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_stderr_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_stderr_hz: Option<f64>,
    /// Lowest-power internal loss rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_stderr_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_stderr_hz: Option<f64>,
    /// Including the ±2 dB uncertainty of the line attenuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_stderr_with_power_systematic_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonator_converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_power: Vec<PowerRow>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_dimless: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_delta_tls_dimless: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_delta_tls_stderr_dimless: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c_photons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c_stderr_photons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_free_dimless: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls_converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls_ill_conditioned: Option<bool>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc_stderr_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lk_shift_coeff_dimless: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qi_max_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_crossover_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_ill_conditioned: Option<bool>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_age_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_age_stderr_hz: Option<f64>,

    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DeviceReport {
    pub fn from_global_fit(g: &GlobalFitResult) -> Self {
        let p = &g.params;
        DeviceReport {
            f0_hz: Some(rad_to_hz(p.omega0)),
            f0_stderr_hz: finite(rad_to_hz(g.omega0_stderr)),
            kappa_hz: Some(rad_to_hz(p.kappa)),
            kappa_stderr_hz: finite(rad_to_hz(g.kappa_stderr)),
            gamma_hz: Some(rad_to_hz(p.gamma)),
            gamma_stderr_hz: g.per_power.first().and_then(|pp| finite(rad_to_hz(pp.gamma_stderr))),
            kerr_hz: Some(rad_to_hz(p.kerr)),
            kerr_stderr_hz: finite(rad_to_hz(g.kerr_stderr)),
            kerr_stderr_with_power_systematic_hz: finite(rad_to_hz(g.kerr_stderr_with_power_systematic)),
            phi_rad: Some(p.phi),
            resonator_converged: Some(g.fit.converged),
            per_power: g
                .per_power
                .iter()
                .map(|pp| PowerRow {
                    power_w: pp.power_w,
                    n_ph_dimless: pp.n_ph,
                    gamma_hz: rad_to_hz(pp.gamma),
                    gamma_stderr_hz: finite(rad_to_hz(pp.gamma_stderr)),
                    q_i_dimless: pp.q_internal,
                })
                .collect(),
            ..Default::default()
        }
    }

    /// Kerr-free fit of one trace.
    pub fn from_single_trace(t: &SingleTraceFit) -> Self {
        let p = &t.params;
        let se = |i: usize| finite(t.fit.stderr[i]);
        DeviceReport {
            f0_hz: Some(rad_to_hz(p.omega0)),
            f0_stderr_hz: se(0).map(rad_to_hz),
            kappa_hz: Some(rad_to_hz(p.kappa)),
            kappa_stderr_hz: se(1).map(rad_to_hz),
            gamma_hz: Some(rad_to_hz(p.gamma)),
            gamma_stderr_hz: se(2).map(rad_to_hz),
            phi_rad: Some(p.phi),
            resonator_converged: Some(t.fit.converged),
            ..Default::default()
        }
    }

    pub fn from_tls_fit(t: &TlsFitResult) -> Self {
        let f = &t.fixed_beta;
        DeviceReport {
            delta0_dimless: Some(f.params.delta0),
            f_delta_tls_dimless: Some(f.params.f_delta_tls),
            f_delta_tls_stderr_dimless: finite(f.stderr("f_delta_tls")),
            n_c_photons: Some(f.params.n_c),
            n_c_stderr_photons: finite(f.stderr("n_c")),
            beta_free_dimless: t.free_beta.as_ref().map(|fb| fb.params.beta),
            tls_converged: Some(f.fit.converged),
            tls_ill_conditioned: Some(t.ill_conditioned),
            warnings: t.warnings.clone(),
            ..Default::default()
        }
    }

    pub fn from_temperature_fit(t: &TemperatureFitResult) -> Self {
        DeviceReport {
            f_delta_tls_dimless: Some(t.params.f_delta_tls),
            f_delta_tls_stderr_dimless: finite(t.stderr("f_delta_tls")),
            delta0_dimless: Some(t.params.delta0),
            tc_k: Some(t.tc()),
            tc_stderr_k: finite(t.stderr("tc")),
            lk_shift_coeff_dimless: Some(t.params.lk_shift_coeff),
            qi_max_k: t.qi_max_k,
            shift_crossover_k: t.shift_crossover_k,
            temperature_converged: Some(t.fit.converged),
            temperature_ill_conditioned: Some(t.ill_conditioned),
            warnings: t.warnings.clone(),
            ..Default::default()
        }
    }

    /// Overlays every field present in `other`; warnings accumulate.
    pub fn merge(&mut self, other: &DeviceReport) -> Result<()> {
        let mut base = serde_json::to_value(&*self)?;
        let over = serde_json::to_value(other)?;
        if let (Value::Object(b), Value::Object(o)) = (&mut base, over) {
            for (k, v) in o {
                if k == "warnings" {
                    continue;
                }
                b.insert(k, v);
            }
        }
        let mut warnings = std::mem::take(&mut self.warnings);
        warnings.extend(other.warnings.iter().cloned());
        *self = serde_json::from_value(base)?;
        self.warnings = warnings;
        Ok(())
    }
}

/// A complete report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Input file name to hex SHA-256.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub devices: BTreeMap<String, DeviceReport>,
}

impl Default for Report {
    fn default() -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: "kerrfit".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            inputs: BTreeMap::new(),
            devices: BTreeMap::new(),
        }
    }
}

/// Table columns of the CSV mirror, after `device_id`.
pub const REPORT_CSV_COLUMNS: [&str; 15] = [
    "width_nm",
    "f0_hz",
    "f0_stderr_hz",
    "kappa_hz",
    "kappa_stderr_hz",
    "gamma_hz",
    "gamma_stderr_hz",
    "kerr_hz",
    "kerr_stderr_hz",
    "f_delta_tls_dimless",
    "f_delta_tls_stderr_dimless",
    "n_c_photons",
    "n_c_stderr_photons",
    "df_age_hz",
    "df_age_stderr_hz",
];

/// Numeric cells of one CSV row, keyed by column; blank cells are absent.
pub type TableRow = BTreeMap<String, f64>;

impl Report {
    pub fn device_mut(&mut self, id: &str) -> &mut DeviceReport {
        self.devices.entry(id.to_string()).or_default()
    }

    /// Merges another report's devices and inputs into this one.
    pub fn merge(&mut self, other: &Report) -> Result<()> {
        for (k, v) in &other.inputs {
            self.inputs.insert(k.clone(), v.clone());
        }
        for (id, dev) in &other.devices {
            self.device_mut(id).merge(dev)?;
        }
        if self.seed.is_none() {
            self.seed = other.seed;
        }
        Ok(())
    }

    /// Copies the ageing shifts of `table` into the matching devices.
    pub fn apply_ageing(&mut self, table: &AgeingTable) {
        for (id, row) in &table.rows {
            let d = self.device_mut(id);
            d.df_age_hz = Some(row.df_age_hz);
            d.df_age_stderr_hz = row.df_age_stderr_hz;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| Error::parse("report", e.line(), e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!("unsupported schema_version {}", r.schema_version)));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::parse(path.display().to_string(), line, msg),
            other => other,
        })
    }

    /// CSV with one row per device in the column layout of the device table.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["device_id"];
        header.extend(REPORT_CSV_COLUMNS);
        w.write_record(&header).expect("in-memory write");
        for (id, dev) in &self.devices {
            let v = serde_json::to_value(dev)?;
            let mut row = vec![id.clone()];
            for col in REPORT_CSV_COLUMNS {
                row.push(v.get(col).and_then(Value::as_f64).map(fmt_f64).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output"))
    }
}

/// Parses the CSV mirror written by [`Report::to_csv`].
pub fn parse_report_csv(text: &str) -> Result<BTreeMap<String, TableRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse("report csv", 1, e.to_string()))?.clone();
    if headers.get(0) != Some("device_id") {
        return Err(Error::parse("report csv", 1, "first column must be device_id"));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse("report csv", e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut row = TableRow::new();
        for (name, cell) in headers.iter().zip(rec.iter()).skip(1) {
            if cell.is_empty() {
                continue;
            }
            let x = cell.parse::<f64>().map_err(|_| Error::parse("report csv", line, format!("{name}: '{cell}'")))?;
            row.insert(name.to_string(), x);
        }
        out.insert(rec.get(0).unwrap_or_default().to_string(), row);
    }
    Ok(out)
}

/// Q_i at matching drive powers before and after ageing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QiDelta {
    pub power_w: f64,
    pub n_ph_before_dimless: f64,
    pub n_ph_after_dimless: f64,
    pub q_i_before_dimless: f64,
    pub q_i_after_dimless: f64,
    pub q_i_delta_dimless: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeRow {
    pub f_before_hz: f64,
    pub f_after_hz: f64,
    /// Positive when the resonance moved down.
    pub df_age_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_age_stderr_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_i: Vec<QiDelta>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeingTable {
    pub schema_version: u32,
    pub rows: BTreeMap<String, AgeRow>,
    /// Devices only present, or without a resonance frequency, in the
    /// earlier report.
    pub unmatched_before: Vec<String>,
    pub unmatched_after: Vec<String>,
}

impl AgeingTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per matched device; unmatched devices are omitted.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["device_id", "f_before_hz", "f_after_hz", "df_age_hz", "df_age_stderr_hz"]).expect("in-memory write");
        for (id, r) in &self.rows {
            w.write_record([
                id.clone(),
                fmt_f64(r.f_before_hz),
                fmt_f64(r.f_after_hz),
                fmt_f64(r.df_age_hz),
                r.df_age_stderr_hz.map(fmt_f64).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }
}

/// Per-device frequency change between two reports.
pub fn age_diff(before: &Report, after: &Report) -> AgeingTable {
    let mut table = AgeingTable { schema_version: SCHEMA_VERSION, ..Default::default() };
    for (id, b) in &before.devices {
        let (Some(fb), Some(fa)) = (b.f0_hz, after.devices.get(id).and_then(|a| a.f0_hz)) else {
            table.unmatched_before.push(id.clone());
            continue;
        };
        let a = &after.devices[id];
        let stderr = match (b.f0_stderr_hz, a.f0_stderr_hz) {
            (Some(sb), Some(sa)) => Some(sb.hypot(sa)),
            _ => None,
        };
        let q_i = if a.per_power.len() == b.per_power.len() {
            b.per_power
                .iter()
                .zip(&a.per_power)
                .map(|(pb, pa)| QiDelta {
                    power_w: pb.power_w,
                    n_ph_before_dimless: pb.n_ph_dimless,
                    n_ph_after_dimless: pa.n_ph_dimless,
                    q_i_before_dimless: pb.q_i_dimless,
                    q_i_after_dimless: pa.q_i_dimless,
                    q_i_delta_dimless: pa.q_i_dimless - pb.q_i_dimless,
                })
                .collect()
        } else {
            Vec::new()
        };
        table.rows.insert(id.clone(), AgeRow { f_before_hz: fb, f_after_hz: fa, df_age_hz: fb - fa, df_age_stderr_hz: stderr, q_i });
    }
    for (id, a) in &after.devices {
        if !table.rows.contains_key(id) && (a.f0_hz.is_none() || !before.devices.contains_key(id)) {
            table.unmatched_after.push(id.clone());
        }
    }
    table
}

/// `freq_hz,abs_s21,phase_rad` columns, plus the model when given.
pub fn write_trace_plot(path: &Path, trace: &ComplexTrace, model: Option<&[Complex64]>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["freq_hz", "abs_s21", "phase_rad"];
    if model.is_some() {
        header.extend(["model_abs_s21", "model_phase_rad"]);
    }
    w.write_record(&header).expect("in-memory write");
    for (i, (om, z)) in trace.omega.iter().zip(&trace.s21).enumerate() {
        let mut row = vec![fmt_f64(rad_to_hz(*om)), fmt_f64(z.norm()), fmt_f64(z.arg())];
        if let Some(m) = model {
            row.push(fmt_f64(m[i].norm()));
            row.push(fmt_f64(m[i].arg()));
        }
        w.write_record(&row).expect("in-memory write");
    }
    write_text(path, std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ASCII output"))
}

/// `n_ph,q_i` columns, plus the model when given.
pub fn write_qi_plot(path: &Path, points: &[(f64, f64)], model: Option<&[f64]>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["n_ph", "q_i"];
    if model.is_some() {
        header.push("model_q_i");
    }
    w.write_record(&header).expect("in-memory write");
    for (i, (n, q)) in points.iter().enumerate() {
        let mut row = vec![fmt_f64(*n), fmt_f64(*q)];
        if let Some(m) = model {
            row.push(fmt_f64(m[i]));
        }
        w.write_record(&row).expect("in-memory write");
    }
    write_text(path, std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ASCII output"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::DEVICES;

    fn table_report() -> Report {
        let mut r = Report { seed: Some(7), ..Default::default() };
        for d in DEVICES.iter() {
            let dev = r.device_mut(d.id);
            dev.width_nm = Some(d.width_nm);
            dev.f0_hz = Some(d.f0_ghz * 1e9);
            dev.kappa_hz = Some(d.kappa_khz * 1e3);
            dev.gamma_hz = Some(d.gamma_khz * 1e3);
            dev.kerr_hz = Some(d.kerr_hz);
            dev.f_delta_tls_dimless = Some(d.f_delta_tls);
            dev.f_delta_tls_stderr_dimless = Some(d.f_delta_tls_err);
            dev.n_c_photons = Some(d.n_c);
            dev.n_c_stderr_photons = Some(d.n_c_err);
            dev.df_age_hz = d.df_age_mhz.map(|x| x * 1e6);
        }
        r
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = table_report();
        let text = r.to_json().unwrap();
        assert_eq!(Report::from_json(&text).unwrap(), r);
        assert_eq!(Report::from_json(&text).unwrap().to_json().unwrap(), text);
        assert!(text.contains("\"schema_version\": 1"));
        assert!(Report::from_json(&text.replace("\"kerr_hz\"", "\"kerr\"")).is_err());
    }

    #[test]
    fn csv_mirror_round_trip() {
        let r = table_report();
        let text = r.to_csv().unwrap();
        let header = text.lines().next().unwrap();
        for col in ["width_nm", "f0_hz", "kappa_hz", "gamma_hz", "kerr_hz", "f_delta_tls_dimless", "n_c_photons", "df_age_hz"] {
            assert!(header.split(',').any(|c| c == col), "{col}");
        }
        let parsed = parse_report_csv(&text).unwrap();
        assert_eq!(parsed.len(), DEVICES.len());
        for (id, dev) in &r.devices {
            let row = &parsed[id];
            assert_eq!(row["kerr_hz"], dev.kerr_hz.unwrap());
            assert_eq!(row["n_c_photons"], dev.n_c_photons.unwrap());
            assert_eq!(row.get("df_age_hz").copied(), dev.df_age_hz);
        }
    }

    #[test]
    fn merging_partial_reports() {
        let mut a = DeviceReport { f0_hz: Some(1.0), warnings: vec!["a".into()], ..Default::default() };
        let b = DeviceReport { n_c_photons: Some(5.0), f0_hz: Some(2.0), warnings: vec!["b".into()], ..Default::default() };
        a.merge(&b).unwrap();
        assert_eq!(a.f0_hz, Some(2.0));
        assert_eq!(a.n_c_photons, Some(5.0));
        assert_eq!(a.warnings, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ageing_tables() {
        let r = table_report();
        let same = age_diff(&r, &r);
        assert_eq!(same.rows.len(), DEVICES.len());
        assert!(same.rows.values().all(|row| row.df_age_hz == 0.0));

        let mut later = r.clone();
        for d in later.devices.values_mut() {
            d.f0_hz = d.f0_hz.map(|f| f - 3.42e6);
        }
        let t = age_diff(&r, &later);
        assert!((t.rows["801-500"].df_age_hz - 3.42e6).abs() < 1e-3);

        let mut other = Report::default();
        other.device_mut("999-1").f0_hz = Some(1e9);
        let t = age_diff(&r, &other);
        assert!(t.rows.is_empty());
        assert_eq!(t.unmatched_before.len(), DEVICES.len());
        assert_eq!(t.unmatched_after, vec!["999-1".to_string()]);
    }

    #[test]
    fn plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let trace = ComplexTrace::new(vec![1.0, 2.0], vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)], Default::default()).unwrap();
        let p = dir.path().join("t.csv");
        write_trace_plot(&p, &trace, Some(&trace.s21)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("freq_hz,abs_s21,phase_rad,model_abs_s21,model_phase_rad\n"));
        let q = dir.path().join("q.csv");
        write_qi_plot(&q, &[(1.0, 1e5), (10.0, 2e5)], None).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), "n_ph,q_i\n1,100000\n10,200000\n");
    }
}
