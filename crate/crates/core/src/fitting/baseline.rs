//! Removal of the wiring transmission (gain, gain slope, cable delay, phase).

use std::f64::consts::PI;

use super::lm::{least_squares, FitConfig};
use super::resonator::{initial_guess, NO_RESONANCE_LEVEL};
use crate::error::{Error, Result};
use crate::model::{notch_prefactor, notch_term, wrap_phase, BaselineEnv, KerrResonatorParams};
use crate::trace::ComplexTrace;

/// Fraction of the span at each end used for the first baseline estimate.
const EDGE_FRACTION: f64 = 0.1;

/// Linear fit y = a + b x.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

fn unwrap(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let d = phases[i] - phases[i - 1];
        phases[i] -= 2.0 * PI * (d / (2.0 * PI)).round();
    }
}

/// Baseline estimate from the two ends of the sweep.
fn edge_estimate(trace: &ComplexTrace, omega_ref: f64) -> BaselineEnv {
    let n = trace.len();
    let m = ((n as f64 * EDGE_FRACTION) as usize).clamp(3, n / 2);
    let left: Vec<usize> = (0..m).collect();
    let right: Vec<usize> = (n - m..n).collect();

    let mut phase_l: Vec<f64> = left.iter().map(|&i| trace.s21[i].arg()).collect();
    let mut phase_r: Vec<f64> = right.iter().map(|&i| trace.s21[i].arg()).collect();
    unwrap(&mut phase_l);
    unwrap(&mut phase_r);
    let xl: Vec<f64> = left.iter().map(|&i| trace.omega[i] - omega_ref).collect();
    let xr: Vec<f64> = right.iter().map(|&i| trace.omega[i] - omega_ref).collect();
    // bring the right edge onto the left edge's branch
    let (al, bl) = line_fit(&xl, &phase_l);
    let (ar, br) = line_fit(&xr, &phase_r);
    let slope_guess = 0.5 * (bl + br);
    let predicted = al + slope_guess * xr[0];
    let at_r = ar + br * xr[0];
    let shift = 2.0 * PI * ((at_r - predicted) / (2.0 * PI)).round();
    let xs: Vec<f64> = xl.iter().chain(&xr).cloned().collect();
    let ps: Vec<f64> = phase_l.iter().cloned().chain(phase_r.iter().map(|p| p - shift)).collect();
    let (phase0, phase_slope) = line_fit(&xs, &ps);

    let fs: Vec<f64> = xs.iter().map(|x| x / (2.0 * PI)).collect();
    let amps: Vec<f64> = left.iter().chain(&right).map(|&i| trace.s21[i].norm()).collect();
    let (amp, amp_slope) = line_fit(&fs, &amps);
    let amp = if amp > 0.0 { amp } else { amps.iter().sum::<f64>() / amps.len() as f64 };
    BaselineEnv { amp, slope: amp_slope / amp, tau: -phase_slope, phase0: wrap_phase(phase0), omega_ref }
}

fn divide(trace: &ComplexTrace, env: &BaselineEnv) -> ComplexTrace {
    let s21 = trace.omega.iter().zip(&trace.s21).map(|(&w, z)| z / env.at(w)).collect();
    ComplexTrace { omega: trace.omega.clone(), s21, meta: trace.meta.clone() }
}

struct EnvScale {
    omega_ref: f64,
    span_hz: f64,
    span_omega: f64,
}

impl EnvScale {
    fn env(&self, x: &[f64]) -> BaselineEnv {
        BaselineEnv {
            amp: x[0],
            slope: x[1] / self.span_hz,
            tau: x[2] / self.span_omega,
            phase0: x[3],
            omega_ref: self.omega_ref,
        }
    }

    fn encode(&self, env: &BaselineEnv) -> [f64; 4] {
        [env.amp, env.slope * self.span_hz, env.tau * self.span_omega, env.phase0]
    }
}

/// Estimate the wiring transmission and divide it out.
///
/// The baseline is referred to the centre of the sweep. With a resonance
/// present the baseline and a linear resonator are fitted jointly; without
/// one only the baseline is fitted.
pub fn normalize_baseline(trace: &ComplexTrace) -> Result<(ComplexTrace, BaselineEnv)> {
    trace.validate()?;
    let n = trace.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!("{n} points are too few to calibrate a baseline")));
    }
    let (w_first, w_last) = (trace.omega[0], trace.omega[n - 1]);
    let span_omega = w_last - w_first;
    let scale = EnvScale { omega_ref: 0.5 * (w_first + w_last), span_hz: span_omega / (2.0 * PI), span_omega };
    let first = edge_estimate(trace, scale.omega_ref);
    let provisional = divide(trace, &first);
    let cfg = FitConfig::default();

    let guess = match initial_guess(&provisional.omega, &provisional.s21) {
        Ok(g) => Some(g),
        Err(Error::NoResonance { .. }) => None,
        Err(e) => return Err(e),
    };

    let env = match guess {
        None => {
            let omega = &trace.omega;
            let data = &trace.s21;
            let fit = least_squares(
                |x| {
                    let env = scale.env(x);
                    let mut r = Vec::with_capacity(2 * n);
                    for (&w, z) in omega.iter().zip(data) {
                        let d = env.at(w) - z;
                        r.push(d.re);
                        r.push(d.im);
                    }
                    r
                },
                &scale.encode(&first),
                &cfg,
            )?;
            scale.env(&fit.params)
        }
        Some(g) => {
            let lw = g.linewidth();
            if lw > 0.5 * span_omega {
                return Err(Error::CannotCalibrate(format!(
                    "resonance width {:.3e} rad/s covers more than half of the {:.3e} rad/s span",
                    lw, span_omega
                )));
            }
            if g.omega0 - w_first < 10.0 * lw || w_last - g.omega0 < 10.0 * lw {
                log::warn!("sweep extends less than 10 linewidths beyond the notch; baseline may absorb resonance tails");
            }
            let anchor = g.omega0;
            let mut init = scale.encode(&first).to_vec();
            init.extend([0.0, g.kappa / lw, g.gamma / lw, g.phi]);
            let reach = span_omega / lw;
            let bounds = vec![
                (1e-12, f64::INFINITY),
                (f64::NEG_INFINITY, f64::INFINITY),
                (f64::NEG_INFINITY, f64::INFINITY),
                (f64::NEG_INFINITY, f64::INFINITY),
                (-reach, reach),
                (1e-6, 1e3),
                (0.0, 1e3),
                (-1.45, 1.45),
            ];
            let omega = &trace.omega;
            let data = &trace.s21;
            let fit = least_squares(
                |x| {
                    let env = scale.env(&x[..4]);
                    let p = KerrResonatorParams {
                        omega0: anchor + x[4] * lw,
                        kappa: x[5] * lw,
                        gamma: x[6] * lw,
                        kerr: 0.0,
                        phi: x[7],
                    };
                    let pre = notch_prefactor(&p);
                    let total = p.linewidth();
                    let mut r = Vec::with_capacity(2 * n);
                    for (&w, z) in omega.iter().zip(data) {
                        let d = env.at(w) * notch_term(pre, (w - p.omega0) / total) - z;
                        r.push(d.re);
                        r.push(d.im);
                    }
                    r
                },
                &init,
                &cfg.with_bounds(bounds),
            )?;
            scale.env(&fit.params[..4])
        }
    };
    let env = BaselineEnv { phase0: wrap_phase(env.phase0), ..env };
    env.validate()?;
    let normalized = divide(trace, &env);
    if guess.is_none() {
        let min_abs = normalized.s21.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        log::debug!("baseline-only calibration, min |S21| after normalisation {min_abs:.4} (threshold {NO_RESONANCE_LEVEL})");
    }
    Ok((normalized, env))
}

/// Normalised trace for an already known baseline.
pub fn apply_baseline(trace: &ComplexTrace, env: &BaselineEnv) -> Result<ComplexTrace> {
    env.validate()?;
    Ok(divide(trace, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::model::{forward_trace, BranchRule};
    use crate::trace::{linspace, SweepDirection};

    fn device() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.8e9, 86.95e3, 57.52e3, 0.0, 0.1).unwrap()
    }

    fn grid(p: &KerrResonatorParams) -> Vec<f64> {
        linspace(p.omega0 - 15.0 * p.linewidth(), p.omega0 + 15.0 * p.linewidth(), 1501)
    }

    #[test]
    fn recovers_delay_and_amplitude() {
        let p = device();
        let w = grid(&p);
        let truth = BaselineEnv { amp: 0.5, slope: 2e-8, tau: 40e-9, phase0: 1.1, omega_ref: p.omega0 };
        let t = forward_trace(&p, &truth, &w, 1e-18, SweepDirection::Up, BranchRule::Continuation).unwrap();
        let (norm, env) = normalize_baseline(&t).unwrap();
        let env = env.rebased(truth.omega_ref);
        assert!((env.amp / truth.amp - 1.0).abs() < 1e-2);
        assert!((env.tau / truth.tau - 1.0).abs() < 1e-2, "{}", env.tau);
        assert!((env.slope / truth.slope - 1.0).abs() < 1e-2);
        assert!(wrap_phase(env.phase0 - truth.phase0).abs() < 1e-2);
        for z in norm.s21.iter().take(20).chain(norm.s21.iter().rev().take(20)) {
            assert!((z.norm() - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn identity_in_identity_out() {
        let p = device();
        let w = grid(&p);
        let t = forward_trace(&p, &BaselineEnv::identity(), &w, 1e-18, SweepDirection::Up, BranchRule::Continuation)
            .unwrap();
        let (_, env) = normalize_baseline(&t).unwrap();
        assert!(env.is_identity(1e-8), "{env:?}");
    }

    #[test]
    fn pure_delay_flattens() {
        let w = linspace(2.0 * PI * 5e9, 2.0 * PI * 5.002e9, 400);
        let s: Vec<Complex64> = w.iter().map(|&x| Complex64::from_polar(0.8, -(x - w[0]) * 40e-9)).collect();
        let t = ComplexTrace::new(w, s, Default::default()).unwrap();
        let (norm, _) = normalize_baseline(&t).unwrap();
        for z in &norm.s21 {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn wide_notch_cannot_be_calibrated() {
        let p = device();
        let w = linspace(p.omega0 - 0.6 * p.linewidth(), p.omega0 + 0.6 * p.linewidth(), 300);
        let t = forward_trace(&p, &BaselineEnv::identity(), &w, 1e-18, SweepDirection::Up, BranchRule::Continuation)
            .unwrap();
        assert!(matches!(normalize_baseline(&t), Err(Error::CannotCalibrate(_))));
    }
}
