//! JSON manifest tying the trace files of one power sweep together.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, read_trace, write_text, write_trace};
use crate::error::{Error, Result};
use crate::model::{BaselineEnv, KerrResonatorParams};
use crate::synth::SweepPlan;
use crate::trace::PowerSweep;
use crate::units::rad_to_hz;

/// Ground truth in the units it is usually quoted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTruth {
    pub f0_hz: f64,
    pub kappa_hz: f64,
    pub gamma_hz: f64,
    pub kerr_hz: f64,
    pub phi_rad: f64,
}

impl From<&KerrResonatorParams> for ManifestTruth {
    fn from(p: &KerrResonatorParams) -> Self {
        ManifestTruth {
            f0_hz: rad_to_hz(p.omega0),
            kappa_hz: rad_to_hz(p.kappa),
            gamma_hz: rad_to_hz(p.gamma),
            kerr_hz: rad_to_hz(p.kerr),
            phi_rad: p.phi,
        }
    }
}

impl ManifestTruth {
    pub fn params(&self) -> Result<KerrResonatorParams> {
        KerrResonatorParams::from_hz(self.f0_hz, self.kappa_hz, self.gamma_hz, self.kerr_hz, self.phi_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_nm: Option<f64>,
    /// Trace files relative to the manifest's directory, one per power.
    pub traces: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ManifestTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<BaselineEnv>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SweepPlan>,
}

/// Writes each trace as `<stem>_p<i>.<ext>` plus `<stem>.json` into `dir`.
/// Returns the manifest path.
pub fn write_power_sweep(
    dir: &Path,
    stem: &str,
    sweep: &PowerSweep,
    extension: &str,
    noise_sigma: Option<f64>,
    width_nm: Option<f64>,
) -> Result<PathBuf> {
    let mut files = Vec::with_capacity(sweep.traces.len());
    for (i, trace) in sweep.traces.iter().enumerate() {
        let name = format!("{stem}_p{i}.{extension}");
        let mut t = trace.clone();
        if t.meta.device_id.is_none() {
            t.meta.device_id = sweep.device_id.clone();
        }
        write_trace(&dir.join(&name), &t)?;
        files.push(name);
    }
    let manifest = SweepManifest {
        schema_version: super::SCHEMA_VERSION,
        device_id: sweep.device_id.clone(),
        width_nm,
        traces: files,
        seed: sweep.seed,
        noise_sigma,
        truth: sweep.truth.as_ref().map(ManifestTruth::from),
        env: sweep.env,
        plan: sweep.plan.clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    write_text(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(path)
}

/// Reads a manifest and every trace it lists.
pub fn read_power_sweep(path: &Path) -> Result<(SweepManifest, PowerSweep)> {
    let manifest: SweepManifest = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
    if manifest.schema_version != super::SCHEMA_VERSION {
        return Err(Error::InvalidParameter(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            manifest.schema_version
        )));
    }
    if manifest.traces.is_empty() {
        return Err(Error::InsufficientData(format!("{} lists no traces", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut traces = Vec::with_capacity(manifest.traces.len());
    for name in &manifest.traces {
        let mut t = read_trace(&base.join(name))?;
        if t.meta.device_id.is_none() {
            t.meta.device_id = manifest.device_id.clone();
        }
        traces.push(t);
    }
    let sweep = PowerSweep {
        traces,
        device_id: manifest.device_id.clone(),
        truth: manifest.truth.map(|t| t.params()).transpose()?,
        env: manifest.env,
        seed: manifest.seed,
        plan: manifest.plan.clone(),
    };
    Ok((manifest, sweep))
}
