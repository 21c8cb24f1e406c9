//! Least-squares engine and the resonator and loss-model fits built on it.

mod baseline;
pub mod lm;
mod resonator;
mod temperature;
mod tls;

use serde::{Deserialize, Serialize};

pub use baseline::{apply_baseline, normalize_baseline};
pub use lm::{least_squares, FitConfig, FitResult, Termination};
pub use resonator::{
    fit_global_power, fit_single_trace, GlobalFitResult, PowerPoint, SingleTraceFit, NO_RESONANCE_LEVEL,
    TRACE_PARAM_NAMES,
};
pub use temperature::{
    fit_temperature, interior_qi_max, shift_crossover, TemperatureDatasets, TemperatureFitOptions,
    TemperatureFitResult, TEMPERATURE_PARAM_NAMES,
};
pub use tls::{fit_tls_power, TlsFit, TlsFitResult, TLS_PARAM_NAMES};

use crate::units::{db_factor, dbm_to_watts, POWER_SYSTEMATIC_DB};

/// Drive power at the device plane with its systematic band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPower {
    pub watts: f64,
    /// Power at −2 dB.
    pub low_w: f64,
    /// Power at +2 dB.
    pub high_w: f64,
    pub systematic_db: f64,
}

impl CalibratedPower {
    /// Multiplicative band [10^(−dB/10), 10^(dB/10)] applied to anything
    /// proportional to the power, such as ⟨n_ph⟩.
    pub fn factor_band(&self) -> (f64, f64) {
        (db_factor(-self.systematic_db), db_factor(self.systematic_db))
    }
}

/// Device-plane power from the VNA output power and the total line
/// attenuation (a positive number of dB).
pub fn calibrate_power(vna_power_dbm: f64, line_attenuation_db: f64) -> CalibratedPower {
    let dbm = vna_power_dbm - line_attenuation_db;
    CalibratedPower {
        watts: dbm_to_watts(dbm),
        low_w: dbm_to_watts(dbm - POWER_SYSTEMATIC_DB),
        high_w: dbm_to_watts(dbm + POWER_SYSTEMATIC_DB),
        systematic_db: POWER_SYSTEMATIC_DB,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_calibration() {
        let p = calibrate_power(-32.0, 68.0);
        assert!((p.watts / 1e-13 - 1.0).abs() < 1e-12);
        let (lo, hi) = p.factor_band();
        assert!((lo - 0.630957).abs() < 1e-6 && (hi - 1.584893).abs() < 1e-6);
        assert!((p.high_w / p.watts - hi).abs() < 1e-12);
        assert!((calibrate_power(0.0, 0.0).watts - 1e-3).abs() < 1e-18);
    }
}
