//! Published film and device parameters, used as realistic defaults and
//! test truths.

use serde::Serialize;

use crate::error::Result;
use crate::model::KerrResonatorParams;
use crate::physics::{FilmProperties, InductorGeometry};

/// Film thickness common to all recipes, m.
pub const FILM_THICKNESS: f64 = 13e-9;

/// One sputtering recipe (Ar/N₂ flow in sccm) and its film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilmRow {
    pub recipe: &'static str,
    pub film: FilmProperties,
}

const fn film(recipe: &'static str, tc: f64, r_sq: f64, lk0_ph: f64, jc_a_per_cm2: f64) -> FilmRow {
    FilmRow {
        recipe,
        film: FilmProperties {
            tc,
            r_sq,
            thickness: FILM_THICKNESS,
            lk0: lk0_ph * 1e-12,
            jc: jc_a_per_cm2 * 1e4,
        },
    }
}

/// Films; a zero critical current density marks an unmeasured value.
pub const FILMS: [FilmRow; 9] = [
    film("80/0.5", 5.0, 106.0, 34.5, 0.0),
    film("80/1", 5.2, 122.0, 38.2, 1.23e6),
    film("80/2", 7.3, 151.0, 34.9, 1.36e6),
    film("80/3", 7.5, 196.0, 44.4, 1.66e6),
    film("80/4", 6.5, 225.0, 52.5, 1.51e6),
    film("80/5", 6.0, 267.0, 57.2, 1.21e6),
    film("80/6", 5.8, 310.0, 76.8, 1.05e6),
    film("80/7", 5.6, 362.0, 91.3, 0.0),
    film("80/8", 4.2, 518.0, 173.3, 0.0),
];

pub fn film_by_recipe(recipe: &str) -> Option<&'static FilmRow> {
    FILMS.iter().find(|r| r.recipe == recipe)
}

/// Measured device parameters, in the units they are usually quoted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceRow {
    pub id: &'static str,
    pub width_nm: f64,
    pub f0_ghz: f64,
    pub kappa_khz: f64,
    pub gamma_khz: f64,
    pub kerr_hz: f64,
    /// F·δ⁰_TLS (absolute, not ×10⁻⁵).
    pub f_delta_tls: f64,
    pub f_delta_tls_err: f64,
    pub n_c: f64,
    pub n_c_err: f64,
    pub df_age_mhz: Option<f64>,
}

impl DeviceRow {
    pub fn params(&self) -> Result<KerrResonatorParams> {
        KerrResonatorParams::from_hz(self.f0_ghz * 1e9, self.kappa_khz * 1e3, self.gamma_khz * 1e3, self.kerr_hz, 0.0)
    }

    pub fn geometry(&self) -> InductorGeometry {
        InductorGeometry::new(self.width_nm * 1e-9, FILM_THICKNESS)
    }
}

#[allow(clippy::too_many_arguments)]
const fn device(
    id: &'static str,
    width_nm: f64,
    f0_ghz: f64,
    kappa_khz: f64,
    gamma_khz: f64,
    kerr_hz: f64,
    fd_e5: f64,
    fd_err_e5: f64,
    n_c: f64,
    n_c_err: f64,
    df_age_mhz: Option<f64>,
) -> DeviceRow {
    DeviceRow {
        id,
        width_nm,
        f0_ghz,
        kappa_khz,
        gamma_khz,
        kerr_hz,
        f_delta_tls: fd_e5 * 1e-5,
        f_delta_tls_err: fd_err_e5 * 1e-5,
        n_c,
        n_c_err,
        df_age_mhz,
    }
}

pub const DEVICES: [DeviceRow; 15] = [
    device("801-500", 500.0, 5.58, 86.95, 57.52, -2.40, 1.02, 0.16, 34.14, 12.97, Some(3.42)),
    device("801-250", 250.0, 4.95, 112.87, 68.00, -19.58, 1.40, 0.05, 9.69, 4.35, None),
    device("802-500", 500.0, 5.87, 74.51, 61.77, -3.05, 1.00, 0.03, 47.07, 11.08, Some(3.78)),
    device("802-250", 250.0, 5.17, 40.59, 66.21, -5.56, 1.22, 0.27, 42.84, 48.82, None),
    device("803-500", 500.0, 5.95, 91.88, 95.96, -4.17, 1.83, 0.12, 1.74, 1.58, Some(4.83)),
    device("803-250", 250.0, 5.15, 50.42, 66.66, -11.50, 1.31, 0.07, 44.38, 16.56, None),
    device("804-500", 500.0, 5.49, 123.21, 95.31, -7.13, 1.69, 0.20, 77.03, 34.87, Some(4.00)),
    device("804-250", 250.0, 4.74, 45.52, 90.26, -9.59, 1.88, 0.094, 64.42, 22.21, None),
    device("805-500", 500.0, 5.72, 105.78, 91.09, -5.77, 1.53, 0.15, 47.82, 29.05, Some(3.76)),
    device("805-250", 250.0, 5.06, 59.69, 73.91, -13.94, 1.41, 0.07, 51.64, 14.33, None),
    device("806-500", 500.0, 4.93, 76.049, 111.30, -5.17, 2.16, 0.17, 48.56, 18.93, Some(3.28)),
    device("806-250", 250.0, 4.37, 64.83, 132.39, -14.88, 2.84, 0.19, 22.71, 12.56, None),
    device("807-500", 500.0, 6.47, 64.81, 42.17, -18.46, 0.67, 0.05, 94.46, 50.58, None),
    device("807-250", 250.0, 6.59, 49.06, 62.92, -82.39, 1.43, 0.63, 2.23, 4.27, None),
    device("808-500", 500.0, 3.34, 45.63, 233.55, -6.23, 6.72, 0.29, 30.84, 12.42, None),
];

pub fn device_by_id(id: &str) -> Option<&'static DeviceRow> {
    DEVICES.iter().find(|r| r.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups_and_units() {
        let d = device_by_id("803-500").unwrap();
        let p = d.params().unwrap();
        assert!((p.omega0 / (2.0 * std::f64::consts::PI) - 5.95e9).abs() < 1e-3);
        assert!((d.f_delta_tls - 1.83e-5).abs() < 1e-20);
        assert!(DEVICES.iter().all(|d| d.params().is_ok()));
        let f = film_by_recipe("80/3").unwrap();
        assert!((f.film.jc - 1.66e10).abs() < 1.0);
        assert!(FILMS.iter().all(|r| r.film.validate().is_ok()));
        assert!(device_by_id("900-1").is_none());
    }
}
