//! Physical constants (exact 2019 SI values) and unit conversions.
//!
//! Everything inside the library is SI with angular frequencies in rad/s.
//! Conversions to Hz, dBm and friends happen only at the file/CLI boundary.

use std::f64::consts::PI;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380649e-23;
/// Planck constant, J·s.
pub const H: f64 = 6.62607015e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = H / (2.0 * PI);

/// Line attenuation between VNA port and device, dB.
pub const DEFAULT_ATTENUATION_DB: f64 = 68.0;
/// Systematic uncertainty on the device-plane power, dB.
pub const POWER_SYSTEMATIC_DB: f64 = 2.0;

#[inline]
pub fn hz_to_rad(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

#[inline]
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Convert dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert watts to dBm.
#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Multiplicative factor corresponding to a power ratio in dB.
#[inline]
pub fn db_factor(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        for dbm in [-140.0, -100.0, -32.0, 0.0, 13.5] {
            assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-12);
        }
        assert_eq!(dbm_to_watts(0.0), 1e-3);
    }

    #[test]
    fn angular_conversion() {
        let f = 5.95e9;
        assert!((rad_to_hz(hz_to_rad(f)) - f).abs() < 1e-6);
    }
}
