//! Power dependence of the internal loss: residual + saturable TLS term.

use serde::{Deserialize, Serialize};

use super::lm::{least_squares, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::physics::{LossModelParams, TYPICAL_BETA};
use crate::units::{H, K_B};

/// Parameter order of [`TlsFit::fit`].
pub const TLS_PARAM_NAMES: [&str; 4] = ["delta0", "f_delta_tls", "n_c", "beta"];

const MIN_POINTS: usize = 6;
const MIN_DECADES: f64 = 3.0;

/// One TLS fit variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsFit {
    pub params: LossModelParams,
    pub beta_fixed: bool,
    /// Physical parameters in [`TLS_PARAM_NAMES`] order; a fixed β carries
    /// zero variance.
    pub fit: FitResult,
}

impl TlsFit {
    pub fn stderr(&self, name: &str) -> f64 {
        TLS_PARAM_NAMES.iter().position(|n| *n == name).map(|i| self.fit.stderr[i]).unwrap_or(f64::NAN)
    }
}

/// Both variants plus conditioning diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsFitResult {
    /// β held at the typical value 0.2.
    pub fixed_beta: TlsFit,
    pub free_beta: Option<TlsFit>,
    pub ill_conditioned: bool,
    pub warnings: Vec<String>,
}

/// tanh(h f / 2 k_B T), 1 at T = 0.
fn thermal_factor(t: f64, f_r: f64) -> f64 {
    if t > 0.0 {
        (H * f_r / (2.0 * K_B * t)).tanh()
    } else {
        1.0
    }
}

/// Non-negative weighted least squares for y ≈ a + b·x in two unknowns.
fn nnls2(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let cost = |a: f64, b: f64| -> f64 {
        x.iter().zip(y).zip(w).map(|((xi, yi), wi)| (wi * (a + b * xi - yi)).powi(2)).sum()
    };
    let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        let w2 = wi * wi;
        s00 += w2;
        s01 += w2 * xi;
        s11 += w2 * xi * xi;
        r0 += w2 * yi;
        r1 += w2 * xi * yi;
    }
    let det = s00 * s11 - s01 * s01;
    let mut candidates = vec![(0.0f64.max(r0 / s00), 0.0), (0.0, if s11 > 0.0 { (r1 / s11).max(0.0) } else { 0.0 })];
    if det > 0.0 {
        let a = (r0 * s11 - r1 * s01) / det;
        let b = (s00 * r1 - s01 * r0) / det;
        if a >= 0.0 && b >= 0.0 {
            candidates.push((a, b));
        }
    }
    candidates
        .into_iter()
        .map(|(a, b)| (a, b, cost(a, b)))
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .unwrap_or((0.0, 0.0, f64::INFINITY))
}

/// Grid search over (n_c, β) with the linear pair (δ₀, Fδ) solved exactly
/// in relative-loss residuals.
fn seed(n: &[f64], loss: &[f64], thermal: f64, betas: &[f64]) -> (f64, f64, f64, f64) {
    let w: Vec<f64> = loss.iter().map(|l| 1.0 / l).collect();
    let mut best = (loss.iter().cloned().fold(f64::INFINITY, f64::min), 0.0, 1.0, TYPICAL_BETA, f64::INFINITY);
    for &beta in betas {
        for k in 0..=80 {
            let n_c = 10f64.powf(-2.0 + 8.0 * k as f64 / 80.0);
            let x: Vec<f64> = n.iter().map(|ni| thermal / (1.0 + ni / n_c).powf(beta)).collect();
            let (a, b, c) = nnls2(&x, loss, &w);
            if c < best.4 {
                best = (a, b, n_c, beta, c);
            }
        }
    }
    (best.0, best.1, best.2, best.3)
}

fn fit_variant(
    n: &[f64],
    loss: &[f64],
    t: f64,
    f_r: f64,
    free_beta: bool,
    cfg: &FitConfig,
) -> Result<TlsFit> {
    let thermal = thermal_factor(t, f_r);
    let betas: Vec<f64> = if free_beta { (1..=10).map(|i| i as f64 * 0.1).collect() } else { vec![TYPICAL_BETA] };
    let (d0, fd, nc, beta) = seed(n, loss, thermal, &betas);
    // losses scaled to O(1) by the median loss
    let mut sorted = loss.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = 1.0 / sorted[sorted.len() / 2];

    let mut init = vec![d0 * s, fd * s, nc.ln()];
    let mut bounds = vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY), ((1e-4f64).ln(), (1e9f64).ln())];
    if free_beta {
        init.push(beta);
        bounds.push((0.01, 1.0));
    }
    let model = |x: &[f64], ni: f64| -> f64 {
        let b = if free_beta { x[3] } else { TYPICAL_BETA };
        x[0] / s + x[1] / s * thermal / (1.0 + ni / x[2].exp()).powf(b)
    };
    let mut cfg = cfg.clone();
    if cfg.bounds.is_none() {
        cfg.bounds = Some(bounds);
    }
    let fit = least_squares(
        |x| n.iter().zip(loss).map(|(&ni, &li)| li.ln() - model(x, ni).ln()).collect(),
        &init,
        &cfg,
    )?;
    // physical parameters; β appended with zero variance when fixed
    let mut phys = fit.reparam(|i, x| match i {
        0 | 1 => (x / s, 1.0 / s),
        2 => (x.exp(), x.exp()),
        _ => (x, 1.0),
    });
    if !free_beta {
        phys.params.push(TYPICAL_BETA);
        phys.stderr.push(0.0);
        for row in phys.covariance.iter_mut() {
            row.push(0.0);
        }
        phys.covariance.push(vec![0.0; 4]);
    }
    let mut params = LossModelParams::new(phys.params[0], phys.params[1], phys.params[2], phys.params[3], 1.0);
    params.gap = 0.0;
    Ok(TlsFit { params, beta_fixed: !free_beta, fit: phys })
}

/// Fit 1/Q_i = δ₀ + Fδ⁰_TLS·tanh(hf/2k_BT)/(1 + n/n_c)^β to (n_ph, Q_i)
/// pairs measured at temperature `t` and frequency `f_r` (Hz).
///
/// Residuals are differences of ln Q_i, matching multiplicative scatter.
/// The quasiparticle term is neglected at the base temperature.
pub fn fit_tls_power(points: &[(f64, f64)], t: f64, f_r: f64, cfg: &FitConfig) -> Result<TlsFitResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("TLS fit needs at least 4 points, got {}", points.len())));
    }
    if !(f_r > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("need f_r > 0 and T >= 0, got {f_r}, {t}")));
    }
    if points.iter().any(|&(n, q)| !(n > 0.0 && q > 0.0 && n.is_finite() && q.is_finite())) {
        return Err(Error::InvalidParameter("photon numbers and Q_i must be positive and finite".into()));
    }
    let n: Vec<f64> = points.iter().map(|p| p.0).collect();
    let loss: Vec<f64> = points.iter().map(|p| 1.0 / p.1).collect();

    let mut warnings = Vec::new();
    let lo = n.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = n.iter().cloned().fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    if points.len() < MIN_POINTS || decades < MIN_DECADES {
        warnings.push(format!(
            "{} points spanning {decades:.2} decades of n_ph; at least {MIN_POINTS} points over {MIN_DECADES} decades are needed for a well-conditioned fit",
            points.len()
        ));
    }

    let fixed_beta = fit_variant(&n, &loss, t, f_r, false, cfg)?;
    let free_beta = match fit_variant(&n, &loss, t, f_r, true, cfg) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("free-beta fit failed: {e}"));
            None
        }
    };
    if fixed_beta.fit.pseudo_inverse {
        warnings.push("fixed-beta covariance is singular; some parameters are unconstrained".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TlsFitResult { ill_conditioned: !warnings.is_empty(), fixed_beta, free_beta, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::qi_model;
    use crate::trace::logspace;

    fn truth() -> LossModelParams {
        let mut p = LossModelParams::new(1e-6, 1.83e-5, 1.74, 0.2, 1.0);
        p.gap = 0.0;
        p
    }

    fn curve(p: &LossModelParams) -> Vec<(f64, f64)> {
        logspace(0.1, 1e5, 25).into_iter().map(|n| (n, qi_model(n, 0.015, 5.95e9, p))).collect()
    }

    #[test]
    fn noiseless_recovery() {
        let p = truth();
        let res = fit_tls_power(&curve(&p), 0.015, 5.95e9, &FitConfig::default()).unwrap();
        let f = &res.fixed_beta.params;
        assert!((f.f_delta_tls / p.f_delta_tls - 1.0).abs() < 1e-6, "{f:?}");
        assert!((f.n_c / p.n_c - 1.0).abs() < 1e-5);
        assert!((f.delta0 / p.delta0 - 1.0).abs() < 1e-5);
        let free = res.free_beta.unwrap();
        assert!((free.params.beta - 0.2).abs() < 1e-5);
        assert!(!res.ill_conditioned);
    }

    #[test]
    fn flat_data_has_no_tls() {
        let pts: Vec<(f64, f64)> = logspace(0.1, 1e5, 25)
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, 1e6 * (1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0))))
            .collect();
        let res = fit_tls_power(&pts, 0.015, 5.95e9, &FitConfig::default()).unwrap();
        let fd = res.fixed_beta.params.f_delta_tls;
        let se = res.fixed_beta.stderr("f_delta_tls");
        assert!(fd <= 3.0 * se + 1e-12, "{fd} vs {se}");
    }

    #[test]
    fn narrow_range_is_flagged() {
        let p = truth();
        let pts: Vec<_> = logspace(1.0, 50.0, 8).into_iter().map(|n| (n, qi_model(n, 0.015, 5.95e9, &p))).collect();
        let res = fit_tls_power(&pts, 0.015, 5.95e9, &FitConfig::default()).unwrap();
        assert!(res.ill_conditioned);
        assert!(fit_tls_power(&pts[..3], 0.015, 5.95e9, &FitConfig::default()).is_err());
    }
}
