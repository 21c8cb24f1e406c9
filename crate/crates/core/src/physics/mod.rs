//! Film and loss physics: BCS kinetic inductance, current nonlinearity, Kerr
//! scaling across devices, and the TLS + quasiparticle loss and frequency
//! shift models.

mod digamma;

pub use digamma::{digamma, digamma_real};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{H, HBAR, K_B};

/// Weak-coupling BCS ratio Δ / (k_B T_C).
pub const BCS_GAP_RATIO: f64 = 1.764;
/// Exponent of the fast-relaxation current dependence of L_k.
pub const N_FR: f64 = 2.21;
/// TLS saturation exponent observed across devices.
pub const TYPICAL_BETA: f64 = 0.2;

/// Properties of one deposited film. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmProperties {
    /// Critical temperature, K.
    pub tc: f64,
    /// Normal-state sheet resistance, Ω/□.
    pub r_sq: f64,
    /// Film thickness, m.
    pub thickness: f64,
    /// Zero-temperature, zero-current kinetic inductance, H/□.
    pub lk0: f64,
    /// Critical current density, A/m². Zero when unknown.
    pub jc: f64,
}

impl FilmProperties {
    pub fn validate(&self) -> Result<()> {
        if !(self.tc > 0.0 && self.r_sq > 0.0 && self.thickness > 0.0 && self.jc >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid film properties {self:?}")));
        }
        Ok(())
    }

    pub fn gap(&self) -> f64 {
        gap_energy(self.tc)
    }
}

/// Parameters of the internal-loss and frequency-shift models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModelParams {
    /// Residual loss not attributed to TLS or quasiparticles.
    pub delta0: f64,
    /// Filling factor times intrinsic TLS loss, F·δ⁰_TLS.
    pub f_delta_tls: f64,
    /// TLS saturation photon number.
    pub n_c: f64,
    /// TLS saturation exponent.
    pub beta: f64,
    /// Kinetic fraction of the total inductance.
    pub alpha_k: f64,
    /// Superconducting gap Δ, J.
    pub gap: f64,
    /// Zero-energy density of states of Cooper pairs, 1/(J·m³). Cancels in
    /// both models; kept for evaluating `n_qp` itself.
    pub ns0: f64,
    /// Proportionality constant of ΔL_k/L_k = c · (k_B T/Δ)⁴.
    pub lk_shift_coeff: f64,
}

impl LossModelParams {
    /// TLS-only parameters with α = 1 and the given critical temperature.
    pub fn new(delta0: f64, f_delta_tls: f64, n_c: f64, beta: f64, tc: f64) -> Self {
        LossModelParams {
            delta0,
            f_delta_tls,
            n_c,
            beta,
            alpha_k: 1.0,
            gap: gap_energy(tc),
            ns0: 1.0,
            lk_shift_coeff: 0.0,
        }
    }

    pub fn with_lk_shift(mut self, coeff: f64) -> Self {
        self.lk_shift_coeff = coeff;
        self
    }

    pub fn tc(&self) -> f64 {
        self.gap / (BCS_GAP_RATIO * K_B)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta0 >= 0.0
            && self.f_delta_tls >= 0.0
            && self.n_c > 0.0
            && self.beta > 0.0
            && self.beta <= 1.0
            && (0.0..=1.0).contains(&self.alpha_k)
            && self.gap >= 0.0
            && self.lk_shift_coeff.is_finite();
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid loss model parameters {self:?}")));
        }
        Ok(())
    }
}

/// Cross-section of the inductor wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InductorGeometry {
    pub width: f64,
    pub thickness: f64,
    pub n_fr: f64,
}

impl InductorGeometry {
    pub fn new(width: f64, thickness: f64) -> Self {
        InductorGeometry { width, thickness, n_fr: N_FR }
    }
}

/// BCS gap Δ = 1.764 k_B T_C, J.
pub fn gap_energy(tc: f64) -> f64 {
    BCS_GAP_RATIO * K_B * tc
}

/// Kinetic inductance per square, L_k(T) = R_□ħ/(πΔ) · coth(Δ/2k_BT), H/□.
pub fn lk_bcs(r_sq: f64, gap: f64, t: f64) -> Result<f64> {
    if !(gap > 0.0) || !(t >= 0.0) || !(r_sq > 0.0) {
        return Err(Error::InvalidParameter(format!("lk_bcs needs R > 0, gap > 0, T >= 0; got {r_sq}, {gap}, {t}")));
    }
    let zero_t = r_sq * HBAR / (PI * gap);
    if t == 0.0 {
        return Ok(zero_t);
    }
    Ok(zero_t / (gap / (2.0 * K_B * t)).tanh())
}

/// Current-dependent kinetic inductance L_k0 (1 − (I/I_c)^n)^{−1/n}.
pub fn lk_current(i: f64, ic: f64, lk0: f64, n_fr: f64) -> Result<f64> {
    let ratio = current_ratio(i, ic)?;
    Ok(lk0 * (1.0 - ratio.powf(n_fr)).powf(-1.0 / n_fr))
}

/// Small-current expansion L_k0 (1 + (I/I_c)^n / n).
pub fn lk_current_expansion(i: f64, ic: f64, lk0: f64, n_fr: f64) -> Result<f64> {
    let ratio = current_ratio(i, ic)?;
    Ok(lk0 * (1.0 + ratio.powf(n_fr) / n_fr))
}

fn current_ratio(i: f64, ic: f64) -> Result<f64> {
    if !(ic > 0.0) || !(i >= 0.0) || i >= ic {
        return Err(Error::OutOfRange(format!("need 0 <= I < I_c, got I = {i}, I_c = {ic}")));
    }
    Ok(i / ic)
}

/// L_k0 ω₀² / (j_c w t)^n_fr. The unknown prefactor is dropped, so only
/// ratios between devices are meaningful.
pub fn kerr_scaling(lk0: f64, omega0: f64, jc: f64, geom: &InductorGeometry) -> Result<f64> {
    if !(jc > 0.0 && geom.width > 0.0 && geom.thickness > 0.0) {
        return Err(Error::InvalidParameter("kerr_scaling needs j_c, width and thickness > 0".into()));
    }
    Ok(lk0 * omega0 * omega0 / (jc * geom.width * geom.thickness).powf(geom.n_fr))
}

/// Thermal quasiparticle density n_s(0) √(2π k_B T Δ) e^{−Δ/k_B T}, 1/m³.
pub fn n_qp(t: f64, gap: f64, ns0: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let kt = K_B * t;
    ns0 * (2.0 * PI * kt * gap).sqrt() * (-gap / kt).exp()
}

/// n_qp / (n_s(0) Δ), independent of n_s(0).
pub fn qp_fraction(t: f64, gap: f64) -> f64 {
    if t <= 0.0 || gap <= 0.0 {
        return 0.0;
    }
    let kt = K_B * t;
    (2.0 * PI * kt / gap).sqrt() * (-gap / kt).exp()
}

/// Individual contributions to 1/Q_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub residual: f64,
    pub tls: f64,
    pub qp: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.residual + self.tls + self.qp
    }

    pub fn q_i(&self) -> f64 {
        1.0 / self.total()
    }
}

/// The three loss channels at photon number `n_ph`, temperature `t` and
/// resonance frequency `f_r` (Hz).
pub fn loss_terms(n_ph: f64, t: f64, f_r: f64, p: &LossModelParams) -> LossTerms {
    let thermal = if t > 0.0 { (H * f_r / (2.0 * K_B * t)).tanh() } else { 1.0 };
    let tls = p.f_delta_tls * thermal / (1.0 + n_ph / p.n_c).powf(p.beta);
    let qp = if p.gap > 0.0 {
        p.alpha_k / PI * (2.0 * p.gap / (H * f_r)).sqrt() * qp_fraction(t, p.gap)
    } else {
        0.0
    };
    LossTerms { residual: p.delta0, tls, qp }
}

/// Internal quality factor Q_i.
pub fn qi_model(n_ph: f64, t: f64, f_r: f64, p: &LossModelParams) -> f64 {
    loss_terms(n_ph, t, f_r, p).q_i()
}

/// Re ψ(½ + y/i) − ln y with y = h f_r / (2π k_B T). Vanishes as y → ∞.
pub fn tls_shift_bracket(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("TLS bracket needs y > 0, got {y}")));
    }
    if y > 1e6 {
        // Re ψ(½ + iy) − ln y = −1/(24y²) + O(y⁻⁴)
        return Ok(-1.0 / (24.0 * y * y));
    }
    let psi = digamma(Complex64::new(0.5, -y))?;
    Ok(psi.re - y.ln())
}

/// TLS and kinetic-inductance contributions to Δf/f_r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftTerms {
    pub tls: f64,
    /// −α ΔL_k/L_k, driven by quasiparticles.
    pub kinetic: f64,
}

impl ShiftTerms {
    pub fn total(&self) -> f64 {
        self.tls + self.kinetic
    }
}

pub fn shift_terms(t: f64, f_r: f64, p: &LossModelParams) -> Result<ShiftTerms> {
    if t < 0.0 || !(f_r > 0.0) {
        return Err(Error::InvalidParameter(format!("need T >= 0 and f_r > 0, got {t}, {f_r}")));
    }
    if t == 0.0 {
        return Ok(ShiftTerms { tls: 0.0, kinetic: 0.0 });
    }
    let kt = K_B * t;
    let y = H * f_r / (2.0 * PI * kt);
    let tls = p.f_delta_tls / PI * tls_shift_bracket(y)?;
    let kinetic = if p.gap > 0.0 {
        -p.alpha_k * p.lk_shift_coeff * (kt / p.gap).powi(4)
    } else {
        0.0
    };
    Ok(ShiftTerms { tls, kinetic })
}

/// Fractional frequency shift Δf/f_r at temperature `t`.
pub fn freq_shift_model(t: f64, f_r: f64, p: &LossModelParams) -> Result<f64> {
    shift_terms(t, f_r, p).map(|s| s.total())
}
