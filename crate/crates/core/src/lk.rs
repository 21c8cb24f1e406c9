//! Sheet kinetic inductance from measured resonance frequencies, using a
//! handful of simulated (L_s, f₀) points and f₀ = scale/√(L_s + offset).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{least_squares, FitConfig};
use crate::physics::{lk_bcs, FilmProperties};

/// One simulated design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    /// Sheet inductance, H/□.
    pub ls: f64,
    /// Simulated resonance frequency, Hz.
    pub f0: f64,
}

/// f₀ = scale/√(L_s + offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaFit {
    /// Hz·√(H/□).
    pub scale: f64,
    /// Series inductance not scaling with the film, H/□.
    pub offset: f64,
    /// RMS frequency residual, Hz.
    pub rms: f64,
    /// Frequency range of the simulation points, Hz.
    pub f_min: f64,
    pub f_max: f64,
    /// A negative offset was fitted and replaced by the offset-free law.
    pub offset_clamped: bool,
}

fn checked(points: &[SimPoint]) -> Result<Vec<SimPoint>> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 simulation points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.ls > 0.0 && p.f0 > 0.0 && p.ls.is_finite() && p.f0.is_finite())) {
        return Err(Error::InvalidParameter("simulation points need positive L_s and f0".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.ls.total_cmp(&b.ls));
    for w in sorted.windows(2) {
        if w[0].ls == w[1].ls {
            return Err(Error::DegenerateInput(format!("duplicate L_s value {}", w[0].ls)));
        }
        if !(w[1].f0 < w[0].f0) {
            return Err(Error::Inconsistent("simulated frequency must decrease as L_s grows".into()));
        }
    }
    Ok(sorted)
}

fn finish(points: &[SimPoint], scale: f64, offset: f64, clamped: bool) -> HyperbolaFit {
    let rms = (points.iter().map(|p| (scale / (p.ls + offset).sqrt() - p.f0).powi(2)).sum::<f64>()
        / points.len() as f64)
        .sqrt();
    let f_min = points.iter().map(|p| p.f0).fold(f64::INFINITY, f64::min);
    let f_max = points.iter().map(|p| p.f0).fold(0.0, f64::max);
    HyperbolaFit { scale, offset, rms, f_min, f_max, offset_clamped: clamped }
}

/// Offset-free law f₀ = scale/√L_s, least squares in frequency.
pub fn fit_hyperbola_pure(points: &[SimPoint]) -> Result<HyperbolaFit> {
    let pts = checked(points)?;
    // linear in scale: minimise Σ (scale·x − f)² with x = 1/√L_s
    let (sxx, sxf) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        let x = 1.0 / p.ls.sqrt();
        (a + x * x, b + x * p.f0)
    });
    Ok(finish(&pts, sxf / sxx, 0.0, false))
}

/// Least-squares fit of f₀ = scale/√(L_s + offset) with offset ≥ 0.
///
/// Seeded from the exact linearisation 1/f² = (L_s + offset)/scale², then
/// refined on frequency residuals. A negative offset falls back to the
/// offset-free law.
pub fn fit_hyperbola(points: &[SimPoint]) -> Result<HyperbolaFit> {
    let pts = checked(points)?;
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.ls).collect();
    let ys: Vec<f64> = pts.iter().map(|p| 1.0 / (p.f0 * p.f0)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope > 0.0) {
        return Err(Error::Inconsistent("simulation points do not follow an inverse square-root law".into()));
    }
    let scale0 = 1.0 / slope.sqrt();
    let offset0 = intercept / slope;

    // scaled unknowns: scale in units of scale0, offset in units of mean L_s
    let (s_unit, o_unit) = (scale0, mx);
    let f_unit = my.sqrt().recip();
    let cfg = FitConfig { gradient_tol: 1e-12, step_tol: 1e-14, ..FitConfig::default() }
        .with_bounds(vec![(1e-6, f64::INFINITY), (-pts[0].ls / o_unit * (1.0 - 1e-9), f64::INFINITY)]);
    let fit = least_squares(
        |x| {
            let (sc, off) = (x[0] * s_unit, x[1] * o_unit);
            pts.iter().map(|p| (sc / (p.ls + off).sqrt() - p.f0) / f_unit).collect()
        },
        &[1.0, offset0 / o_unit],
        &cfg,
    )?;
    let (scale, offset) = (fit.params[0] * s_unit, fit.params[1] * o_unit);
    if offset < 0.0 {
        let pure = fit_hyperbola_pure(&pts)?;
        return Ok(HyperbolaFit { offset_clamped: true, ..pure });
    }
    Ok(finish(&pts, scale, offset, false))
}

/// Sheet inductance implied by a measured frequency: (scale/f)² − offset.
pub fn invert_frequency(fit: &HyperbolaFit, f_measured: f64) -> Result<f64> {
    if !(f_measured > 0.0) || !f_measured.is_finite() {
        return Err(Error::InvalidParameter(format!("measured frequency must be positive, got {f_measured}")));
    }
    if f_measured < 0.5 * fit.f_min || f_measured > 2.0 * fit.f_max {
        log::warn!(
            "measured frequency {f_measured} Hz is far outside the simulated range {}..{} Hz",
            fit.f_min,
            fit.f_max
        );
    }
    let ls = (fit.scale / f_measured).powi(2) - fit.offset;
    if !(ls > 0.0) {
        return Err(Error::Inconsistent(format!("measured frequency {f_measured} Hz implies non-positive L_s")));
    }
    Ok(ls)
}

/// Mean and sample standard deviation of several estimates.
pub fn average_film_lk(estimates: &[f64]) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::InsufficientData("no inductance estimates to average".into()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    if estimates.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// BCS estimate against a resonator-derived value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkComparison {
    pub bcs_h_per_sq: f64,
    pub resonator_h_per_sq: f64,
    /// (resonator − BCS)/resonator.
    pub relative_difference: f64,
}

pub fn compare_bcs_vs_resonator(film: &FilmProperties, resonator_estimate: f64) -> Result<LkComparison> {
    film.validate()?;
    if !(resonator_estimate > 0.0) {
        return Err(Error::InvalidParameter(format!("resonator estimate must be positive, got {resonator_estimate}")));
    }
    let bcs = lk_bcs(film.r_sq, film.gap(), 0.0)?;
    Ok(LkComparison {
        bcs_h_per_sq: bcs,
        resonator_h_per_sq: resonator_estimate,
        relative_difference: (resonator_estimate - bcs) / resonator_estimate,
    })
}
