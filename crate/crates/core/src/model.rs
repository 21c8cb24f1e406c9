//! Steady-state response of a driven Kerr resonator side-coupled to a feedline.
//!
//! The drive enters through three reduced quantities: the detuning `delta` in
//! units of the total linewidth, the reduced nonlinearity `xi`, and the drive
//! photon scale `n_tilde_sq`. The intracavity population, normalised by the
//! drive photon scale, solves
//!
//! ```text
//! xi² n³ − 2 delta xi n² + (delta² + 1/4) n − 1/2 = 0
//! ```
//!
//! and the transmission is
//!
//! ```text
//! S21 = 1 − κ/(κ+γ) · e^{iφ}/cos φ · 1 / (1 + 2i(delta − xi n)).
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{check_strictly_increasing, ComplexTrace, SweepDirection, TraceMeta};
use crate::units::{hz_to_rad, HBAR};

/// Resonator parameters; all rates are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrResonatorParams {
    pub omega0: f64,
    /// External coupling rate.
    pub kappa: f64,
    /// Internal loss rate.
    pub gamma: f64,
    /// Self-Kerr coefficient, signed.
    pub kerr: f64,
    /// Impedance-mismatch rotation, rad.
    pub phi: f64,
}

impl KerrResonatorParams {
    pub fn new(omega0: f64, kappa: f64, gamma: f64, kerr: f64, phi: f64) -> Result<Self> {
        let p = KerrResonatorParams { omega0, kappa, gamma, kerr, phi };
        p.validate()?;
        Ok(p)
    }

    /// Build from ordinary frequencies (Hz); every rate is multiplied by 2π.
    pub fn from_hz(f0_hz: f64, kappa_hz: f64, gamma_hz: f64, kerr_hz: f64, phi: f64) -> Result<Self> {
        Self::new(hz_to_rad(f0_hz), hz_to_rad(kappa_hz), hz_to_rad(gamma_hz), hz_to_rad(kerr_hz), phi)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega0, self.kappa, self.gamma, self.kerr, self.phi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite resonator parameter".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.phi.abs() >= PI / 2.0 {
            return Err(Error::InvalidParameter(format!("|phi| must be below pi/2, got {}", self.phi)));
        }
        Ok(())
    }

    /// Total loss rate κ + γ.
    pub fn linewidth(&self) -> f64 {
        self.kappa + self.gamma
    }

    pub fn q_internal(&self) -> f64 {
        self.omega0 / self.gamma
    }

    pub fn q_coupling(&self) -> f64 {
        self.omega0 / self.kappa
    }
}

/// Drive tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCondition {
    pub omega_d: f64,
    /// Power at the device plane, W.
    pub power_w: f64,
}

impl DriveCondition {
    pub fn new(omega_d: f64, power_w: f64) -> Result<Self> {
        if !(power_w >= 0.0) || !omega_d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drive needs finite frequency and non-negative power, got ({omega_d}, {power_w})"
            )));
        }
        Ok(DriveCondition { omega_d, power_w })
    }
}

/// Dimensionless drive variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedDriveVars {
    pub delta: f64,
    pub xi: f64,
    /// Drive photon scale |α̃_in|², the reported ⟨n_ph⟩.
    pub n_tilde_sq: f64,
}

/// Drive photon scale κ/(κ+γ)² · P/(ħω₀).
pub fn drive_photon_scale(params: &KerrResonatorParams, power_w: f64) -> f64 {
    let total = params.linewidth();
    params.kappa / (total * total) * power_w / (HBAR * params.omega0)
}

pub fn reduced_vars(params: &KerrResonatorParams, drive: &DriveCondition) -> Result<ReducedDriveVars> {
    let total = params.linewidth();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("kappa + gamma must be positive".into()));
    }
    let n_tilde_sq = drive_photon_scale(params, drive.power_w);
    Ok(ReducedDriveVars {
        delta: (drive.omega_d - params.omega0) / total,
        xi: n_tilde_sq * params.kerr / total,
        n_tilde_sq,
    })
}

/// Recover K from a fitted reduced nonlinearity: K = ξ(κ+γ)/|α̃_in|².
pub fn kerr_from_fit(xi: f64, kappa: f64, gamma: f64, n_tilde_sq: f64) -> Result<f64> {
    if !(n_tilde_sq > 0.0) {
        return Err(Error::UndefinedKerr);
    }
    Ok(xi * (kappa + gamma) / n_tilde_sq)
}

/// Rule for picking the physical root when the photon cubic is bistable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchRule {
    Lowest,
    Highest,
    /// Root nearest to the previous point of the sweep; lowest root when
    /// there is no history or on an exact tie.
    #[default]
    Continuation,
}

/// Real non-negative roots of the photon cubic, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSolution {
    roots: [f64; 3],
    count: usize,
    pub selected: usize,
    pub branch_rule: BranchRule,
}

impl PhotonSolution {
    pub fn roots(&self) -> &[f64] {
        &self.roots[..self.count]
    }

    /// The physical photon number.
    pub fn n(&self) -> f64 {
        self.roots[self.selected]
    }

    pub fn is_bistable(&self) -> bool {
        self.count == 3
    }

    /// Re-select the branch under a different rule.
    pub fn select(mut self, rule: BranchRule, previous: Option<f64>) -> Self {
        let roots = self.roots();
        self.selected = match (rule, previous) {
            (BranchRule::Lowest, _) | (BranchRule::Continuation, None) => 0,
            (BranchRule::Highest, _) => roots.len() - 1,
            (BranchRule::Continuation, Some(prev)) => {
                let mut best = 0;
                for (i, r) in roots.iter().enumerate().skip(1) {
                    // strict comparison keeps ties on the lower root
                    if (r - prev).abs() < (roots[best] - prev).abs() {
                        best = i;
                    }
                }
                best
            }
        };
        self.branch_rule = rule;
        self
    }
}

/// Cubic polynomial value and its scale (sum of term magnitudes).
#[inline]
fn cubic_eval(delta: f64, xi: f64, n: f64) -> (f64, f64, f64) {
    let b = delta * delta + 0.25;
    let c2 = -2.0 * delta * xi;
    let c3 = xi * xi;
    let value = ((c3 * n + c2) * n + b) * n - 0.5;
    let slope = (3.0 * c3 * n + 2.0 * c2) * n + b;
    let scale = c3 * n.abs().powi(3) + c2.abs() * n * n + b * n.abs() + 0.5;
    (value, slope, scale)
}

/// Relative residual |f(n)| / Σ|terms| of the photon cubic.
pub fn cubic_relative_residual(delta: f64, xi: f64, n: f64) -> f64 {
    let (value, _, scale) = cubic_eval(delta, xi, n);
    value.abs() / scale
}

fn newton_polish(delta: f64, xi: f64, mut n: f64) -> f64 {
    let (mut f, mut df, _) = cubic_eval(delta, xi, n);
    for _ in 0..6 {
        if f == 0.0 || df == 0.0 {
            break;
        }
        let step = f / df;
        let candidate = n - step;
        let (fc, dfc, _) = cubic_eval(delta, xi, candidate);
        // near a double root the slope vanishes and Newton can overshoot
        if fc.abs() > f.abs() {
            break;
        }
        n = candidate;
        f = fc;
        df = dfc;
        if step.abs() <= 4.0 * f64::EPSILON * n.abs() {
            break;
        }
    }
    n
}

/// Collapses sorted roots closer than 1e-6 relative into one, keeping the
/// member with the smaller residual. Returns the number of distinct roots.
fn merge_coincident(roots: &mut [f64; 3], delta: f64, xi: f64) -> usize {
    let mut count = 1;
    for i in 1..3 {
        let last = roots[count - 1];
        let r = roots[i];
        if (r - last).abs() <= 1e-6 * r.abs().max(last.abs()) {
            if cubic_relative_residual(delta, xi, r) < cubic_relative_residual(delta, xi, last) {
                roots[count - 1] = r;
            }
        } else {
            roots[count] = r;
            count += 1;
        }
    }
    count
}

/// All real roots of the photon cubic with the default branch rule and no
/// sweep history (lowest root selected).
pub fn solve_photon_cubic(delta: f64, xi: f64) -> PhotonSolution {
    solve_photon_cubic_with(delta, xi, BranchRule::Continuation, None)
}

/// All real roots of the photon cubic, selecting a branch with `rule`.
///
/// Closed-form solution of the depressed cubic in `m = xi n`, each root then
/// polished by Newton iteration on the original polynomial. Every real root is
/// positive and bounded by 2.
pub fn solve_photon_cubic_with(
    delta: f64,
    xi: f64,
    rule: BranchRule,
    previous: Option<f64>,
) -> PhotonSolution {
    let mut roots = [0.0; 3];
    let count;
    if xi == 0.0 {
        roots[0] = 0.5 / (delta * delta + 0.25);
        count = 1;
    } else {
        // m³ − 2δ m² + (δ² + 1/4) m − ξ/2 = 0 with m = t + 2δ/3
        let p = 0.25 - delta * delta / 3.0;
        let q = 2.0 * delta.powi(3) / 27.0 + delta / 6.0 - xi / 2.0;
        let shift = 2.0 * delta / 3.0;
        let half_q = 0.5 * q;
        let third_p = p / 3.0;
        let disc = half_q * half_q + third_p * third_p * third_p;
        // a discriminant within rounding of zero is a tangent double root
        let disc_tol = 1e-14 * (half_q * half_q).max(third_p.powi(3).abs());
        if disc > disc_tol {
            let s = -half_q;
            let a = (s + s.signum() * disc.sqrt()).cbrt();
            let t = if a == 0.0 { 0.0 } else { a - third_p / a };
            roots[0] = newton_polish(delta, xi, (t + shift) / xi);
            count = 1;
        } else {
            let r = (-third_p).sqrt();
            let cos3 = if r == 0.0 { 0.0 } else { (-half_q / (r * r * r)).clamp(-1.0, 1.0) };
            let theta = cos3.acos();
            for (k, root) in roots.iter_mut().enumerate() {
                let t = 2.0 * r * ((theta - 2.0 * PI * k as f64) / 3.0).cos();
                *root = newton_polish(delta, xi, (t + shift) / xi);
            }
            roots.sort_by(f64::total_cmp);
            count = merge_coincident(&mut roots, delta, xi);
        }
    }
    PhotonSolution { roots, count, selected: 0, branch_rule: rule }.select(rule, previous)
}

/// Complex prefactor κ/(κ+γ) · e^{iφ}/cos φ of the notch term.
#[inline]
pub(crate) fn notch_prefactor(params: &KerrResonatorParams) -> Complex64 {
    let depth = params.kappa / params.linewidth();
    Complex64::from_polar(depth / params.phi.cos(), params.phi)
}

#[inline]
pub(crate) fn notch_term(prefactor: Complex64, effective_detuning: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - prefactor / Complex64::new(1.0, 2.0 * effective_detuning)
}

/// Hanger transmission for given reduced variables and photon number.
pub fn s21_hanger(params: &KerrResonatorParams, delta: f64, xi: f64, n: f64) -> Result<Complex64> {
    let cos_phi = params.phi.cos();
    if cos_phi.abs() < 1e-12 || !(params.linewidth() > 0.0) {
        return Err(Error::InvalidParameter("cos(phi) = 0 or zero linewidth".into()));
    }
    Ok(notch_term(notch_prefactor(params), delta - xi * n))
}

/// Transmission of the wiring around the device: gain, gain slope, cable
/// delay and a global phase, all referred to `omega_ref`.
///
/// `baseline(ω) = amp · (1 + slope·(f − f_ref)) · exp(i(phase0 − (ω − ω_ref)·tau))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEnv {
    pub amp: f64,
    /// Relative amplitude slope, 1/Hz.
    pub slope: f64,
    /// Cable delay, s.
    pub tau: f64,
    /// Phase at the reference frequency, rad.
    pub phase0: f64,
    /// Reference angular frequency for slope and phase, rad/s.
    pub omega_ref: f64,
}

impl Default for BaselineEnv {
    fn default() -> Self {
        Self::identity()
    }
}

impl BaselineEnv {
    pub fn identity() -> Self {
        BaselineEnv { amp: 1.0, slope: 0.0, tau: 0.0, phase0: 0.0, omega_ref: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp > 0.0) || !self.slope.is_finite() || !self.tau.is_finite() || !self.phase0.is_finite() {
            return Err(Error::InvalidParameter("baseline amplitude must be positive and terms finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, omega: f64) -> Complex64 {
        let dw = omega - self.omega_ref;
        let gain = self.amp * (1.0 + self.slope * dw / (2.0 * PI));
        Complex64::from_polar(gain, self.phase0 - dw * self.tau)
    }

    /// Same physical baseline expressed about a new reference frequency.
    pub fn rebased(&self, omega_ref: f64) -> Self {
        let dw = omega_ref - self.omega_ref;
        let gain = 1.0 + self.slope * dw / (2.0 * PI);
        BaselineEnv {
            amp: self.amp * gain,
            slope: self.slope / gain,
            tau: self.tau,
            phase0: wrap_phase(self.phase0 - dw * self.tau),
            omega_ref,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.amp - 1.0).abs() < tol
            && self.slope.abs() < tol
            && self.tau.abs() < tol
            && wrap_phase(self.phase0).abs() < tol
    }
}

/// Wrap a phase into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Visit sweep points in acquisition order and solve the photon cubic with
/// the requested branch rule. Returns the normalised photon number per
/// point, stored in ascending frequency order.
pub(crate) fn photon_branch(
    params: &KerrResonatorParams,
    xi: f64,
    omega: &[f64],
    direction: SweepDirection,
    rule: BranchRule,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(omega.len(), 0.0);
    let total = params.linewidth();
    let mut previous = None;
    let mut visit = |i: usize| {
        let delta = (omega[i] - params.omega0) / total;
        let n = solve_photon_cubic_with(delta, xi, rule, previous).n();
        previous = Some(n);
        out[i] = n;
    };
    match direction {
        SweepDirection::Up => (0..omega.len()).for_each(&mut visit),
        SweepDirection::Down => (0..omega.len()).rev().for_each(&mut visit),
    }
}

/// Device response only (no baseline) along a sweep, ascending order.
pub(crate) fn device_response(
    params: &KerrResonatorParams,
    omega: &[f64],
    power_w: f64,
    direction: SweepDirection,
    rule: BranchRule,
    photons: &mut Vec<f64>,
    out: &mut Vec<Complex64>,
) {
    let total = params.linewidth();
    let xi = drive_photon_scale(params, power_w) * params.kerr / total;
    photon_branch(params, xi, omega, direction, rule, photons);
    let prefactor = notch_prefactor(params);
    out.clear();
    out.extend(omega.iter().zip(photons.iter()).map(|(&w, &n)| {
        let delta = (w - params.omega0) / total;
        notch_term(prefactor, delta - xi * n)
    }));
}

/// Simulated trace of one resonator seen through the wiring `env`.
///
/// `omega` must be strictly increasing; `direction` sets the order in which
/// the bistable branch is followed.
pub fn forward_trace(
    params: &KerrResonatorParams,
    env: &BaselineEnv,
    omega: &[f64],
    power_w: f64,
    direction: SweepDirection,
    rule: BranchRule,
) -> Result<ComplexTrace> {
    params.validate()?;
    env.validate()?;
    DriveCondition::new(params.omega0, power_w)?;
    check_strictly_increasing(omega)?;
    let mut photons = Vec::new();
    let mut s21 = Vec::new();
    device_response(params, omega, power_w, direction, rule, &mut photons, &mut s21);
    for (z, &w) in s21.iter_mut().zip(omega) {
        *z *= env.at(w);
    }
    let meta = TraceMeta { power_w: Some(power_w), direction, ..TraceMeta::default() };
    Ok(ComplexTrace { omega: omega.to_vec(), s21, meta })
}

/// Several hangers on one feedline, modelled as the product of their notch
/// factors. Returns the trace plus overlap warnings for pairs closer than
/// ten linewidths.
pub fn multiplex_feedline(
    resonators: &[KerrResonatorParams],
    env: &BaselineEnv,
    omega: &[f64],
    power_w: f64,
    direction: SweepDirection,
) -> Result<(ComplexTrace, Vec<String>)> {
    env.validate()?;
    check_strictly_increasing(omega)?;
    let mut warnings = Vec::new();
    for (i, a) in resonators.iter().enumerate() {
        a.validate()?;
        for b in &resonators[i + 1..] {
            let width = a.linewidth().max(b.linewidth());
            if (a.omega0 - b.omega0).abs() <= 10.0 * width {
                let msg = format!(
                    "resonators at {:.6e} and {:.6e} rad/s are closer than 10 linewidths",
                    a.omega0, b.omega0
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let mut s21: Vec<Complex64> = omega.iter().map(|&w| env.at(w)).collect();
    let mut photons = Vec::new();
    let mut factor = Vec::new();
    for r in resonators {
        device_response(r, omega, power_w, direction, BranchRule::Continuation, &mut photons, &mut factor);
        for (z, f) in s21.iter_mut().zip(&factor) {
            *z *= f;
        }
    }
    let meta = TraceMeta { power_w: Some(power_w), direction, ..TraceMeta::default() };
    Ok((ComplexTrace { omega: omega.to_vec(), s21, meta }, warnings))
}
