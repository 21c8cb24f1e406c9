//! Complex S21 fits: single linear traces and the multi-power Kerr fit.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{least_squares, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::model::{
    device_response, drive_photon_scale, notch_prefactor, notch_term, BranchRule, KerrResonatorParams,
};
use crate::trace::{ComplexTrace, PowerSweep};
use crate::units::{db_factor, POWER_SYSTEMATIC_DB};

/// Parameter order of [`SingleTraceFit::fit`].
pub const TRACE_PARAM_NAMES: [&str; 4] = ["omega0", "kappa", "gamma", "phi"];

/// Below this minimum |S21| a normalised trace is treated as having no dip.
pub const NO_RESONANCE_LEVEL: f64 = 0.99;

const PHI_LIMIT: f64 = 1.45;

/// Points on each side of a bistable jump left out of the first pass.
const JUMP_MASK_POINTS: usize = 10;
/// A jump is a step this many times the 99th-percentile step.
const JUMP_STEP_RATIO: f64 = 5.0;

/// Linear fit of one normalised trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTraceFit {
    /// K is zero by construction.
    pub params: KerrResonatorParams,
    /// Parameters in physical units (rad/s, rad), order [`TRACE_PARAM_NAMES`].
    pub fit: FitResult,
    /// Drive photon scale ⟨n_ph⟩ if the trace carries a device-plane power.
    pub n_ph: Option<f64>,
}

/// Rough linear-resonator estimate used to seed the fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinearGuess {
    pub omega0: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl LinearGuess {
    pub fn linewidth(&self) -> f64 {
        self.kappa + self.gamma
    }
}

/// Algebraic (Kåsa) circle fit; returns the centre.
fn circle_center(s21: &[Complex64]) -> Option<Complex64> {
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for z in s21 {
        let row = Vector3::new(z.re, z.im, 1.0);
        let rhs = -(z.re * z.re + z.im * z.im);
        a += row * row.transpose();
        b += row * rhs;
    }
    let sol = a.lu().solve(&b)?;
    let c = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    c.re.is_finite().then_some(c)
}

/// Seed (ω₀, κ, γ, φ) from a normalised trace.
///
/// The resonance circle gives φ and the depth κ/(κ+γ). Mapping each point
/// through u = (1 − S)/(2(1 − c)) = 1/(1 + 2iδ) gives δ per point, and a
/// weighted line through δ(ω) yields ω₀ and κ+γ.
pub(crate) fn initial_guess(omega: &[f64], s21: &[Complex64]) -> Result<LinearGuess> {
    let imin = s21
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
    let min_abs = s21[imin].norm();
    if min_abs > NO_RESONANCE_LEVEL {
        return Err(Error::NoResonance { min_abs });
    }
    let span = omega[omega.len() - 1] - omega[0];
    let fallback_width = fwhm(omega, s21, imin).unwrap_or(span / 10.0);

    let center = circle_center(s21).unwrap_or(Complex64::new((1.0 + min_abs) / 2.0, 0.0));
    let radius_vec = Complex64::new(1.0, 0.0) - center;
    let mut phi = radius_vec.arg();
    if !(phi.abs() < PHI_LIMIT) {
        phi = 0.0;
    }
    let depth = (2.0 * radius_vec.norm() * phi.cos()).clamp(1e-3, 1.0);

    // weighted regression of δ_k = Im(1/u_k)/2 against ω_k
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let x0 = omega[imin];
    for (&w, z) in omega.iter().zip(s21) {
        let u = (Complex64::new(1.0, 0.0) - z) / (2.0 * radius_vec);
        let un = u.norm_sqr();
        if un < 0.09 {
            continue;
        }
        let y = (u.inv().im) / 2.0;
        let x = (w - x0) / fallback_width;
        let wt = un * un;
        sw += wt;
        sx += wt * x;
        sy += wt * y;
        sxx += wt * x * x;
        sxy += wt * x * y;
    }
    let det = sw * sxx - sx * sx;
    let (mut omega0, mut width) = (x0, fallback_width);
    if det > 0.0 {
        let slope = (sw * sxy - sx * sy) / det;
        let intercept = (sy - slope * sx) / sw;
        let w = fallback_width / slope;
        let w0 = x0 - intercept / slope * fallback_width;
        if w.is_finite() && w > 0.0 && w < 2.0 * span && w0 > omega[0] - span && w0 < omega[omega.len() - 1] + span {
            omega0 = w0;
            width = w;
        }
    }
    Ok(LinearGuess { omega0, kappa: depth * width, gamma: ((1.0 - depth) * width).max(1e-3 * width), phi })
}

/// Full width at the half-depth of |S21|², linear interpolation between
/// samples.
fn fwhm(omega: &[f64], s21: &[Complex64], imin: usize) -> Option<f64> {
    let floor = s21[imin].norm_sqr();
    let level = (1.0 + floor) / 2.0;
    let mut left = None;
    for i in (0..imin).rev() {
        let (a, b) = (s21[i].norm_sqr(), s21[i + 1].norm_sqr());
        if a >= level {
            left = Some(omega[i] + (level - a) / (b - a) * (omega[i + 1] - omega[i]));
            break;
        }
    }
    let mut right = None;
    for i in imin + 1..s21.len() {
        let (a, b) = (s21[i - 1].norm_sqr(), s21[i].norm_sqr());
        if b >= level {
            right = Some(omega[i - 1] + (level - a) / (b - a) * (omega[i] - omega[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Some(r - l),
        (Some(l), None) => Some(2.0 * (omega[imin] - l)),
        (None, Some(r)) => Some(2.0 * (r - omega[imin])),
        _ => None,
    }
    .filter(|w| *w > 0.0)
}

fn linear_params(x: &[f64], anchor: f64, scale: f64) -> KerrResonatorParams {
    KerrResonatorParams {
        omega0: anchor + x[0] * scale,
        kappa: x[1] * scale,
        gamma: x[2] * scale,
        kerr: 0.0,
        phi: x[3],
    }
}

/// Fit (ω₀, κ, γ, φ) with K = 0 to a baseline-normalised trace.
pub fn fit_single_trace(trace: &ComplexTrace, cfg: &FitConfig) -> Result<SingleTraceFit> {
    trace.validate()?;
    if trace.len() < 8 {
        return Err(Error::InsufficientData(format!("{} points are too few for a resonance fit", trace.len())));
    }
    let guess = initial_guess(&trace.omega, &trace.s21)?;
    let anchor = guess.omega0;
    let scale = guess.linewidth();
    let init = [0.0, guess.kappa / scale, guess.gamma / scale, guess.phi];
    let mut cfg = cfg.clone();
    if cfg.bounds.is_none() {
        let reach = (trace.omega[trace.len() - 1] - trace.omega[0]) / scale;
        cfg.bounds = Some(vec![(-reach, reach), (1e-6, 1e3), (0.0, 1e3), (-PHI_LIMIT, PHI_LIMIT)]);
    }
    let omega = &trace.omega;
    let data = &trace.s21;
    let fit = least_squares(
        |x| {
            let p = linear_params(x, anchor, scale);
            let pre = notch_prefactor(&p);
            let lw = p.linewidth();
            let mut r = Vec::with_capacity(2 * omega.len());
            for (&w, z) in omega.iter().zip(data) {
                let d = notch_term(pre, (w - p.omega0) / lw) - z;
                r.push(d.re);
                r.push(d.im);
            }
            r
        },
        &init,
        &cfg,
    )?;
    let fit = fit.rescaled(&[scale, scale, scale, 1.0], &[anchor, 0.0, 0.0, 0.0]);
    let params = KerrResonatorParams {
        omega0: fit.params[0],
        kappa: fit.params[1],
        gamma: fit.params[2],
        kerr: 0.0,
        phi: fit.params[3],
    };
    let n_ph = trace.meta.power_w.map(|p| drive_photon_scale(&params, p));
    Ok(SingleTraceFit { params, fit, n_ph })
}

/// Per-power quantities of a global fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub power_w: f64,
    pub gamma: f64,
    pub gamma_stderr: f64,
    pub q_internal: f64,
    /// Drive photon scale |α̃_in|².
    pub n_ph: f64,
    pub xi: f64,
    /// Largest intracavity occupation n·|α̃_in|² along the sweep.
    pub n_intracavity_peak: f64,
}

/// Result of the joint multi-power fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFitResult {
    /// Shared parameters; `gamma` is the lowest-power value.
    pub params: KerrResonatorParams,
    pub omega0_stderr: f64,
    pub kappa_stderr: f64,
    pub kerr_stderr: f64,
    pub phi_stderr: f64,
    /// K with the ±2 dB power systematic folded in.
    pub kerr_stderr_with_power_systematic: f64,
    /// K range spanned by the ±2 dB power systematic.
    pub kerr_systematic_band: (f64, f64),
    pub per_power: Vec<PowerPoint>,
    /// Physical units; order ω₀, κ, K, φ, then γ per trace.
    pub fit: FitResult,
}

impl GlobalFitResult {
    pub fn gammas(&self) -> Vec<f64> {
        self.per_power.iter().map(|p| p.gamma).collect()
    }
}

struct GlobalLayout {
    anchor: f64,
    scale: f64,
    kerr_scale: f64,
}

impl GlobalLayout {
    fn params(&self, x: &[f64], i: usize) -> KerrResonatorParams {
        KerrResonatorParams {
            omega0: self.anchor + x[0] * self.scale,
            kappa: x[1] * self.scale,
            gamma: x[4 + i] * self.scale,
            kerr: x[2] * self.kerr_scale,
            phi: x[3],
        }
    }
}

/// Joint fit over several drive powers: (ω₀, κ, K, φ) shared, γ per trace.
///
/// Traces must be baseline-normalised, share one frequency grid and carry
/// the device-plane power in their metadata.
pub fn fit_global_power(sweep: &PowerSweep, cfg: &FitConfig) -> Result<GlobalFitResult> {
    let traces = &sweep.traces;
    if traces.len() < 3 {
        return Err(Error::InsufficientData(format!("global fit needs at least 3 powers, got {}", traces.len())));
    }
    let grid = &traces[0].omega;
    let mut powers = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        t.validate()?;
        if t.omega.len() != grid.len()
            || t.omega.iter().zip(grid).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs())
        {
            return Err(Error::Inconsistent(format!("trace {i} uses a different frequency grid")));
        }
        let p = t.meta.power_w.ok_or_else(|| Error::InvalidParameter(format!("trace {i} has no device power")))?;
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("trace {i} has non-positive power {p}")));
        }
        powers.push(p);
    }

    // independent linear fits seed γ per trace and the Kerr pull of ω₀
    let mut singles = Vec::with_capacity(traces.len());
    for t in traces {
        singles.push(fit_single_trace(t, &FitConfig { max_iterations: 60, ..FitConfig::default() })?);
    }
    let low = (0..traces.len()).min_by(|&a, &b| powers[a].total_cmp(&powers[b])).unwrap_or(0);
    check_windows(&singles, low)?;
    let base = singles[low].params;
    let scale = base.linewidth();
    let n_tilde: Vec<f64> = singles.iter().zip(&powers).map(|(s, &p)| drive_photon_scale(&s.params, p)).collect();
    // dip position ω₀ + 2Kñ: regress against ñ
    let (omega0_init, kerr_init) = {
        let m = n_tilde.len() as f64;
        let mx = n_tilde.iter().sum::<f64>() / m;
        let my = singles.iter().map(|s| s.params.omega0).sum::<f64>() / m;
        let sxx: f64 = n_tilde.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = n_tilde.iter().zip(&singles).map(|(x, s)| (x - mx) * (s.params.omega0 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (my - slope * mx, slope / 2.0)
    };
    let n_max = n_tilde.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let layout = GlobalLayout { anchor: omega0_init, scale, kerr_scale: scale / n_max };

    let mut init = vec![0.0, base.kappa / scale, kerr_init / layout.kerr_scale, base.phi];
    init.extend(singles.iter().map(|s| (s.params.gamma / scale).max(1e-4)));
    let mut cfg = cfg.clone();
    if cfg.bounds.is_none() {
        let reach = (grid[grid.len() - 1] - grid[0]) / scale;
        let mut b = vec![(-reach, reach), (1e-6, 1e3), (-1e3, 1e3), (-PHI_LIMIT, PHI_LIMIT)];
        b.extend(std::iter::repeat((0.0, 1e3)).take(traces.len()));
        cfg.bounds = Some(b);
    }

    let mut photons = Vec::new();
    let mut model = Vec::new();
    let mut mask: Vec<Option<(usize, usize)>> = vec![None; traces.len()];
    let mut residuals = |x: &[f64], mask: &[Option<(usize, usize)>]| {
        let mut r = Vec::with_capacity(2 * grid.len() * traces.len());
        for (i, t) in traces.iter().enumerate() {
            let p = layout.params(x, i);
            device_response(&p, grid, powers[i], t.meta.direction, BranchRule::Continuation, &mut photons, &mut model);
            for (k, (m, z)) in model.iter().zip(&t.s21).enumerate() {
                let d = match mask[i] {
                    Some((lo, hi)) if (lo..hi).contains(&k) => Complex64::new(0.0, 0.0),
                    _ => m - z,
                };
                r.push(d.re);
                r.push(d.im);
            }
        }
        r
    };
    // Just before a bistable jump the occupied branch ends in a square-root
    // cusp. The few points there have nearly singular derivatives and can
    // pin the whole fit, so the fit runs first with them left out and is
    // then polished on all points.
    for (i, t) in traces.iter().enumerate() {
        if let Some(k) = data_jump(&t.s21) {
            mask[i] = Some((k.saturating_sub(JUMP_MASK_POINTS), (k + 1 + JUMP_MASK_POINTS).min(t.s21.len())));
        }
    }
    let mut fit = least_squares(|x| residuals(x, &mask), &init, &cfg)?;
    if mask.iter().any(Option::is_some) {
        let unmasked = vec![None; traces.len()];
        let masked_params = fit.params.clone();
        fit = least_squares(|x| residuals(x, &unmasked), &masked_params, &cfg)?;
    }

    let n = init.len();
    let mut scales = vec![scale, scale, layout.kerr_scale, 1.0];
    scales.extend(std::iter::repeat(scale).take(traces.len()));
    let mut offsets = vec![0.0; n];
    offsets[0] = layout.anchor;
    let phys = fit.rescaled(&scales, &offsets);

    let shared = layout.params(&fit.params, low);
    let mut per_power = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        let p = layout.params(&fit.params, i);
        let n_ph = drive_photon_scale(&p, powers[i]);
        let xi = n_ph * p.kerr / p.linewidth();
        device_response(&p, grid, powers[i], t.meta.direction, BranchRule::Continuation, &mut photons, &mut model);
        let peak = photons.iter().cloned().fold(0.0, f64::max) * n_ph;
        per_power.push(PowerPoint {
            power_w: powers[i],
            gamma: p.gamma,
            gamma_stderr: phys.stderr[4 + i],
            q_internal: p.q_internal(),
            n_ph,
            xi,
            n_intracavity_peak: peak,
        });
    }
    let kerr = shared.kerr;
    let kerr_stderr = phys.stderr[2];
    let (lo, hi) = (kerr * db_factor(-POWER_SYSTEMATIC_DB), kerr * db_factor(POWER_SYSTEMATIC_DB));
    let sys = (db_factor(POWER_SYSTEMATIC_DB) - 1.0) * kerr.abs();
    Ok(GlobalFitResult {
        params: shared,
        omega0_stderr: phys.stderr[0],
        kappa_stderr: phys.stderr[1],
        kerr_stderr,
        phi_stderr: phys.stderr[3],
        kerr_stderr_with_power_systematic: (kerr_stderr * kerr_stderr + sys * sys).sqrt(),
        kerr_systematic_band: (lo.min(hi), lo.max(hi)),
        per_power,
        fit: phys,
    })
}

/// Index k of a jump between points k and k + 1, if the trace has one: a
/// single step far larger than the trace's ordinary point-to-point steps.
fn data_jump(s21: &[Complex64]) -> Option<usize> {
    if s21.len() < 100 {
        return None;
    }
    let steps: Vec<f64> = s21.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let (k, &largest) = steps.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let mut sorted = steps.clone();
    sorted.sort_by(f64::total_cmp);
    let p99 = sorted[sorted.len() * 99 / 100];
    (largest > JUMP_STEP_RATIO * p99).then_some(k)
}

/// Every trace's dip window (±5 widths) must overlap the lowest-power one.
fn check_windows(singles: &[SingleTraceFit], low: usize) -> Result<()> {
    let window = |s: &SingleTraceFit| {
        let h = 5.0 * s.params.linewidth();
        (s.params.omega0 - h, s.params.omega0 + h)
    };
    let (a0, b0) = window(&singles[low]);
    for (i, s) in singles.iter().enumerate() {
        let (a, b) = window(s);
        if b < a0 || a > b0 {
            return Err(Error::Inconsistent(format!("notch of trace {i} does not overlap the lowest-power notch")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_trace, BaselineEnv};
    use crate::trace::{linspace, SweepDirection};
    use crate::units::hz_to_rad;

    fn device_801() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.8e9, 86.95e3, 57.52e3, 0.0, 0.0).unwrap()
    }

    fn grid(p: &KerrResonatorParams, points: usize, half: f64) -> Vec<f64> {
        linspace(p.omega0 - half * p.linewidth(), p.omega0 + half * p.linewidth(), points)
    }

    #[test]
    fn guess_is_close_for_clean_trace() {
        let mut p = device_801();
        p.phi = 0.3;
        let w = grid(&p, 801, 8.0);
        let t = forward_trace(&p, &BaselineEnv::identity(), &w, 1e-18, SweepDirection::Up, BranchRule::Continuation)
            .unwrap();
        let g = initial_guess(&t.omega, &t.s21).unwrap();
        assert!(((g.omega0 - p.omega0) / p.linewidth()).abs() < 1e-3);
        assert!((g.kappa / p.kappa - 1.0).abs() < 1e-3, "{g:?}");
        assert!((g.phi - 0.3).abs() < 1e-3);
    }

    #[test]
    fn noiseless_single_trace_recovery() {
        let p = device_801();
        let w = grid(&p, 1001, 8.0);
        let t = forward_trace(&p, &BaselineEnv::identity(), &w, 1e-18, SweepDirection::Up, BranchRule::Continuation)
            .unwrap();
        let fit = fit_single_trace(&t, &FitConfig::default()).unwrap();
        assert!(fit.fit.converged);
        assert!((fit.params.kappa / p.kappa - 1.0).abs() < 1e-6);
        assert!((fit.params.gamma / p.gamma - 1.0).abs() < 1e-6);
        assert!(((fit.params.omega0 - p.omega0) / p.omega0).abs() < 1e-12);
    }

    #[test]
    fn flat_trace_has_no_resonance() {
        let w = linspace(hz_to_rad(5e9), hz_to_rad(5.001e9), 200);
        let s = vec![Complex64::new(1.0, 0.0); 200];
        let t = ComplexTrace::new(w, s, Default::default()).unwrap();
        assert!(matches!(fit_single_trace(&t, &FitConfig::default()), Err(Error::NoResonance { .. })));
    }

    #[test]
    fn global_fit_needs_three_powers() {
        let p = device_801();
        let w = grid(&p, 201, 6.0);
        let traces: Vec<_> = [1e-16, 1e-15]
            .iter()
            .map(|&pw| {
                forward_trace(&p, &BaselineEnv::identity(), &w, pw, SweepDirection::Up, BranchRule::Continuation)
                    .unwrap()
            })
            .collect();
        let sweep = PowerSweep { traces, ..Default::default() };
        assert!(matches!(fit_global_power(&sweep, &FitConfig::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn global_fit_rejects_mismatched_grids() {
        let p = device_801();
        let mut traces = Vec::new();
        for (k, pw) in [1e-16, 1e-15, 1e-14].into_iter().enumerate() {
            let w = grid(&p, 201 + k, 6.0);
            traces.push(
                forward_trace(&p, &BaselineEnv::identity(), &w, pw, SweepDirection::Up, BranchRule::Continuation)
                    .unwrap(),
            );
        }
        let sweep = PowerSweep { traces, ..Default::default() };
        assert!(matches!(fit_global_power(&sweep, &FitConfig::default()), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn noiseless_global_recovery() {
        let p = KerrResonatorParams::from_hz(5.95e9, 91.88e3, 95.96e3, -4.17, 0.05).unwrap();
        let w = grid(&p, 601, 6.0);
        let traces: Vec<_> = [-80.0, -64.0, -48.0, -40.0]
            .iter()
            .map(|&dbm| {
                let pw = crate::units::dbm_to_watts(dbm - 68.0);
                forward_trace(&p, &BaselineEnv::identity(), &w, pw, SweepDirection::Up, BranchRule::Continuation)
                    .unwrap()
            })
            .collect();
        let sweep = PowerSweep { traces, ..Default::default() };
        let fit = fit_global_power(&sweep, &FitConfig::default()).unwrap();
        assert!(fit.fit.converged);
        assert!((fit.params.kerr / p.kerr - 1.0).abs() < 1e-5, "{}", fit.params.kerr / p.kerr);
        assert!((fit.params.kappa / p.kappa - 1.0).abs() < 1e-6);
        for pp in &fit.per_power {
            assert!((pp.gamma / p.gamma - 1.0).abs() < 1e-6);
        }
        let (lo, hi) = fit.kerr_systematic_band;
        assert!(lo < fit.params.kerr && fit.params.kerr < hi);
    }
}
