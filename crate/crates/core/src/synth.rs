//! Synthetic datasets with known ground truth.
//!
//! Every generator is a pure function of its inputs and seed. Random draws
//! come from a ChaCha8 stream seeded with the given `u64`, so equal inputs
//! give bit-identical output on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::calibrate_power;
use crate::model::{forward_trace, BaselineEnv, BranchRule, KerrResonatorParams};
use crate::physics::{freq_shift_model, qi_model, LossModelParams};
use crate::trace::{check_strictly_increasing, linspace, ComplexTrace, PowerSweep, SweepDirection};
use crate::units::{hz_to_rad, DEFAULT_ATTENUATION_DB};

/// Additive complex Gaussian noise. `sigma` is the standard deviation of
/// each of the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { sigma: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Drive powers and frequency grid of a simulated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub powers_dbm: Vec<f64>,
    #[serde(default = "default_attenuation")]
    pub attenuation_db: f64,
    pub freq_start_hz: f64,
    pub freq_stop_hz: f64,
    pub points: usize,
    #[serde(default)]
    pub direction: SweepDirection,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_DB
}

impl SweepPlan {
    /// Grid of `points` centred on `center_hz` spanning ±`half_span_hz`.
    pub fn centered(powers_dbm: Vec<f64>, center_hz: f64, half_span_hz: f64, points: usize) -> Self {
        SweepPlan {
            powers_dbm,
            attenuation_db: DEFAULT_ATTENUATION_DB,
            freq_start_hz: center_hz - half_span_hz,
            freq_stop_hz: center_hz + half_span_hz,
            points,
            direction: SweepDirection::Up,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 50 {
            return Err(Error::InvalidParameter(format!("a sweep needs at least 50 points, got {}", self.points)));
        }
        if !(self.freq_start_hz < self.freq_stop_hz) || !(self.freq_start_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < start < stop, got {} .. {} Hz",
                self.freq_start_hz, self.freq_stop_hz
            )));
        }
        if self.powers_dbm.is_empty() || self.powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("sweep plan needs finite powers".into()));
        }
        if !self.attenuation_db.is_finite() {
            return Err(Error::InvalidParameter("attenuation must be finite".into()));
        }
        Ok(())
    }

    /// Angular-frequency grid, rad/s.
    pub fn omega(&self) -> Vec<f64> {
        linspace(hz_to_rad(self.freq_start_hz), hz_to_rad(self.freq_stop_hz), self.points)
    }

    /// Same plan with the grid moved by `df_hz`.
    pub fn shifted(&self, df_hz: f64) -> Self {
        SweepPlan { freq_start_hz: self.freq_start_hz + df_hz, freq_stop_hz: self.freq_stop_hz + df_hz, ..self.clone() }
    }
}

fn add_noise(trace: &mut ComplexTrace, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    for z in trace.s21.iter_mut() {
        z.re += normal.sample(rng);
        z.im += normal.sample(rng);
    }
}

/// One noisy trace of `truth` seen through `env`.
pub fn generate_trace(
    truth: &KerrResonatorParams,
    env: &BaselineEnv,
    omega: &[f64],
    power_w: f64,
    direction: SweepDirection,
    noise: &NoiseSpec,
) -> Result<ComplexTrace> {
    noise.validate()?;
    let mut trace = forward_trace(truth, env, omega, power_w, direction, BranchRule::Continuation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    add_noise(&mut trace, noise.sigma, &mut rng);
    Ok(trace)
}

/// Traces of `truth` at every power of `plan`, noise drawn from one stream
/// in plan order.
pub fn generate_power_sweep(
    truth: &KerrResonatorParams,
    env: &BaselineEnv,
    plan: &SweepPlan,
    noise: &NoiseSpec,
) -> Result<PowerSweep> {
    plan.validate()?;
    noise.validate()?;
    truth.validate()?;
    let omega = plan.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut traces = Vec::with_capacity(plan.powers_dbm.len());
    for &dbm in &plan.powers_dbm {
        let power = calibrate_power(dbm, plan.attenuation_db);
        let mut trace = forward_trace(truth, env, &omega, power.watts, plan.direction, BranchRule::Continuation)?;
        add_noise(&mut trace, noise.sigma, &mut rng);
        trace.meta.power_dbm = Some(dbm);
        trace.meta.attenuation_db = Some(plan.attenuation_db);
        traces.push(trace);
    }
    Ok(PowerSweep {
        traces,
        device_id: None,
        truth: Some(*truth),
        env: Some(*env),
        seed: Some(noise.seed),
        plan: Some(plan.clone()),
    })
}

/// Multiplicative log-normal scatter: each value is multiplied by
/// exp(σ·z) with z standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalScatter {
    pub sigma_ln: f64,
    pub seed: u64,
}

/// Q_i(n_ph) on `n_grid` at temperature `t` and frequency `f_r` (Hz).
pub fn generate_qi_curve(
    p: &LossModelParams,
    t: f64,
    f_r: f64,
    n_grid: &[f64],
    scatter: Option<LogNormalScatter>,
) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    if n_grid.is_empty() || n_grid[0] <= 0.0 {
        return Err(Error::InvalidParameter("photon grid must be positive and non-empty".into()));
    }
    check_strictly_increasing(n_grid)?;
    let mut rng = scatter.map(|s| ChaCha8Rng::seed_from_u64(s.seed));
    Ok(n_grid
        .iter()
        .map(|&n| {
            let q = qi_model(n, t, f_r, p);
            let factor = match (&mut rng, scatter) {
                (Some(r), Some(s)) => {
                    let z: f64 = StandardNormal.sample(r);
                    (s.sigma_ln * z).exp()
                }
                _ => 1.0,
            };
            (n, q * factor)
        })
        .collect())
}

/// Q_i(T) and Δf(T)/f_r at fixed photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweep {
    pub temperatures_k: Vec<f64>,
    pub qi: Vec<f64>,
    pub df_over_f: Vec<f64>,
}

impl TemperatureSweep {
    pub fn qi_points(&self) -> Vec<(f64, f64)> {
        self.temperatures_k.iter().cloned().zip(self.qi.iter().cloned()).collect()
    }

    pub fn shift_points(&self) -> Vec<(f64, f64)> {
        self.temperatures_k.iter().cloned().zip(self.df_over_f.iter().cloned()).collect()
    }

    /// Copy with relative Gaussian scatter on Q_i and absolute scatter on
    /// Δf/f_r.
    pub fn perturbed(&self, qi_rel_sigma: f64, shift_sigma: f64, seed: u64) -> Result<Self> {
        if !(qi_rel_sigma >= 0.0 && shift_sigma >= 0.0) {
            return Err(Error::InvalidParameter("scatter must be >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for (q, d) in out.qi.iter_mut().zip(out.df_over_f.iter_mut()) {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            *q *= 1.0 + qi_rel_sigma * a;
            *d += shift_sigma * b;
        }
        Ok(out)
    }
}

/// Exact Q_i(T) and Δf(T)/f_r on `t_grid` (K) at photon number `n_ph`.
pub fn generate_temperature_sweep(
    p: &LossModelParams,
    f_r: f64,
    n_ph: f64,
    t_grid: &[f64],
) -> Result<TemperatureSweep> {
    p.validate()?;
    if t_grid.is_empty() || t_grid[0] <= 0.0 {
        return Err(Error::InvalidParameter("temperature grid must be positive and non-empty".into()));
    }
    check_strictly_increasing(t_grid)?;
    let mut qi = Vec::with_capacity(t_grid.len());
    let mut df = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        qi.push(qi_model(n_ph, t, f_r, p));
        df.push(freq_shift_model(t, f_r, p)?);
    }
    Ok(TemperatureSweep { temperatures_k: t_grid.to_vec(), qi, df_over_f: df })
}

/// Sweeps of a device before and after ageing. The second device has its
/// resonance lowered by `df_age_hz` and its internal loss rate multiplied
/// by `qi_scale`; its grid follows the resonance. Both use the same seed.
pub fn generate_ageing_pair(
    truth: &KerrResonatorParams,
    env: &BaselineEnv,
    plan: &SweepPlan,
    noise: &NoiseSpec,
    df_age_hz: f64,
    qi_scale: f64,
) -> Result<(PowerSweep, PowerSweep)> {
    if !(df_age_hz >= 0.0) || !(qi_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need df_age >= 0 and qi_scale > 0, got {df_age_hz}, {qi_scale}"
        )));
    }
    let before = generate_power_sweep(truth, env, plan, noise)?;
    let aged = KerrResonatorParams {
        omega0: truth.omega0 - hz_to_rad(df_age_hz),
        gamma: truth.gamma * qi_scale,
        ..*truth
    };
    let after = generate_power_sweep(&aged, env, &plan.shifted(-df_age_hz), noise)?;
    Ok((before, after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::drive_photon_scale;
    use crate::trace::logspace;
    use crate::units::rad_to_hz;

    fn device() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.95e9, 91.88e3, 95.96e3, -4.17, 0.0).unwrap()
    }

    fn plan(powers: Vec<f64>) -> SweepPlan {
        SweepPlan::centered(powers, 5.95e9, 600e3, 2001)
    }

    #[test]
    fn zero_noise_equals_model() {
        let p = device();
        let pl = plan(vec![-60.0]);
        let sweep = generate_power_sweep(&p, &BaselineEnv::identity(), &pl, &NoiseSpec::none()).unwrap();
        let power = calibrate_power(-60.0, 68.0).watts;
        let exact = forward_trace(&p, &BaselineEnv::identity(), &pl.omega(), power, SweepDirection::Up, BranchRule::Continuation)
            .unwrap();
        assert_eq!(sweep.traces[0].s21, exact.s21);
    }

    #[test]
    fn deterministic_with_seed() {
        let pl = plan(vec![-70.0, -50.0]);
        let noise = NoiseSpec { sigma: 1e-3, seed: 11 };
        let a = generate_power_sweep(&device(), &BaselineEnv::identity(), &pl, &noise).unwrap();
        let b = generate_power_sweep(&device(), &BaselineEnv::identity(), &pl, &noise).unwrap();
        assert_eq!(a, b);
        let c = generate_power_sweep(&device(), &BaselineEnv::identity(), &pl, &NoiseSpec { seed: 12, ..noise }).unwrap();
        assert_ne!(a.traces[0].s21, c.traces[0].s21);
    }

    #[test]
    fn noise_statistics() {
        let pl = plan(vec![-80.0; 6]);
        let noise = NoiseSpec { sigma: 2e-3, seed: 5 };
        let clean = generate_power_sweep(&device(), &BaselineEnv::identity(), &pl, &NoiseSpec::none()).unwrap();
        let noisy = generate_power_sweep(&device(), &BaselineEnv::identity(), &pl, &noise).unwrap();
        let mut acc = 0.0;
        let mut count = 0.0;
        for (a, b) in clean.traces.iter().zip(&noisy.traces) {
            for (x, y) in a.s21.iter().zip(&b.s21) {
                let d = y - x;
                acc += d.re * d.re + d.im * d.im;
                count += 2.0;
            }
        }
        let std = (acc / count).sqrt();
        assert!((std / 2e-3 - 1.0).abs() < 0.05, "{std}");
    }

    #[test]
    fn kerr_dip_shift_matches_photon_scale() {
        let p = device();
        // ⟨n_ph⟩ from about 1 to 10³
        let powers = vec![-72.0, -67.0, -62.0, -57.0, -52.0, -47.0, -42.0];
        let pl = SweepPlan::centered(powers.clone(), 5.95e9, 300e3, 20001);
        let sweep = generate_power_sweep(&p, &BaselineEnv::identity(), &pl, &NoiseSpec::none()).unwrap();
        let dip = |t: &ComplexTrace| rad_to_hz(t.omega[t.argmin_abs().unwrap()]);
        let n_lo = drive_photon_scale(&p, calibrate_power(powers[0], 68.0).watts);
        let n_hi = drive_photon_scale(&p, calibrate_power(powers[6], 68.0).watts);
        assert!(n_lo > 0.5 && n_lo < 2.0 && n_hi > 500.0 && n_hi < 2000.0, "{n_lo} {n_hi}");
        let shift = dip(&sweep.traces[6]) - dip(&sweep.traces[0]);
        // at the dip n = 2, so the Kerr pull is 2K·ñ
        let predicted = 2.0 * rad_to_hz(p.kerr) * (n_hi - n_lo);
        let resolution = 600e3 / 20000.0;
        assert!((shift - predicted).abs() < 2.0 * resolution, "{shift} vs {predicted}");
    }

    #[test]
    fn qi_curve_properties() {
        let p = LossModelParams { gap: 0.0, ..LossModelParams::new(1e-6, 2.84e-5, 22.71, 0.2, 1.0) };
        let grid = logspace(0.1, 1e5, 25);
        let curve = generate_qi_curve(&p, 0.015, 5.95e9, &grid, None).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for (n, q) in &curve {
            assert_eq!(*q, qi_model(*n, 0.015, 5.95e9, &p));
        }
        // plateau: remaining TLS loss at 10⁵ is a few percent of δ₀ for β = 0.2
        let top = curve.last().unwrap().1;
        let tls_left = 2.84e-5 / (1.0 + 1e5 / 22.71f64).powf(0.2);
        assert!((1.0 / top - (1e-6 + tls_left)).abs() < 1e-12);
        let scattered =
            generate_qi_curve(&p, 0.015, 5.95e9, &grid, Some(LogNormalScatter { sigma_ln: 0.05, seed: 1 })).unwrap();
        assert_ne!(scattered, curve);
    }

    #[test]
    fn temperature_sweep_shape() {
        let p = LossModelParams::new(1e-6, 1.8e-5, 1.74, 0.2, 7.4).with_lk_shift(0.55);
        let grid = linspace(0.015, 1.0, 600);
        let s = generate_temperature_sweep(&p, 5.95e9, 50.0, &grid).unwrap();
        let (imax, _) = s.qi.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!(grid[imax] > 0.3 && grid[imax] < 0.8, "{}", grid[imax]);
        // the TLS bracket at 15 mK is about −1/(24y²) with y ≈ 3
        assert!(s.df_over_f[0].abs() < 0.05 * s.df_over_f.iter().fold(0.0f64, |m, d| m.max(d.abs())));
        let hot = crate::physics::shift_terms(0.8, 5.95e9, &p).unwrap();
        assert!(hot.kinetic.abs() > hot.tls.abs());
    }

    #[test]
    fn ageing_pair() {
        let p = device();
        let pl = plan(vec![-70.0, -60.0, -50.0]);
        let noise = NoiseSpec { sigma: 1e-3, seed: 3 };
        let (a, b) = generate_ageing_pair(&p, &BaselineEnv::identity(), &pl, &noise, 0.0, 1.0).unwrap();
        assert_eq!(a.traces, b.traces);
        let (a, b) = generate_ageing_pair(&p, &BaselineEnv::identity(), &pl, &NoiseSpec::none(), 3.42e6, 1.0).unwrap();
        let dip = |t: &ComplexTrace| rad_to_hz(t.omega[t.argmin_abs().unwrap()]);
        let sep = dip(&a.traces[0]) - dip(&b.traces[0]);
        let resolution = 1.2e6 / 2000.0;
        assert!((sep - 3.42e6).abs() <= resolution, "{sep}");
    }
}
