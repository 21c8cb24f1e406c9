//! Joint fit of Q_i(T) and Δf(T)/f_r.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::lm::{least_squares, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::physics::{gap_energy, loss_terms, shift_terms, tls_shift_bracket, LossModelParams, TYPICAL_BETA};
use crate::trace::{linspace, logspace};
use crate::units::{H, K_B};

/// Parameter order of [`TemperatureFitResult::fit`].
pub const TEMPERATURE_PARAM_NAMES: [&str; 4] = ["delta0", "f_delta_tls", "tc", "lk_shift_coeff"];

/// Quantities held fixed during the temperature fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureFitOptions {
    /// TLS saturation photon number from the power fit.
    pub n_c: f64,
    /// TLS saturation exponent from the power fit.
    pub beta: f64,
    pub alpha_k: f64,
    /// Centre of the initial T_C scan, and the T_C used when only Δf data
    /// are supplied.
    pub tc_guess_k: f64,
}

impl Default for TemperatureFitOptions {
    fn default() -> Self {
        TemperatureFitOptions { n_c: 1.0, beta: TYPICAL_BETA, alpha_k: 1.0, tc_guess_k: 7.0 }
    }
}

/// Which datasets entered the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureDatasets {
    Joint,
    QiOnly,
    ShiftOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFitResult {
    pub params: LossModelParams,
    /// Physical parameters in [`TEMPERATURE_PARAM_NAMES`] order. Parameters
    /// held fixed carry zero variance.
    pub fit: FitResult,
    pub datasets: TemperatureDatasets,
    /// Residual scatter used as the weight of each dataset: relative for
    /// Q_i, absolute for Δf/f_r.
    pub qi_sigma: Option<f64>,
    pub shift_sigma: Option<f64>,
    pub ill_conditioned: bool,
    pub warnings: Vec<String>,
    /// Temperature of the fitted Q_i maximum inside the data range.
    pub qi_max_k: Option<f64>,
    /// Temperature above which the kinetic (quasiparticle) shift outweighs
    /// the TLS shift.
    pub shift_crossover_k: Option<f64>,
}

impl TemperatureFitResult {
    pub fn tc(&self) -> f64 {
        self.fit.params[2]
    }

    pub fn stderr(&self, name: &str) -> f64 {
        TEMPERATURE_PARAM_NAMES.iter().position(|n| *n == name).map(|i| self.fit.stderr[i]).unwrap_or(f64::NAN)
    }
}

/// Per-point coefficients of the model pieces that do not depend on the
/// linear parameters.
struct QiRow {
    t: f64,
    tls: f64,
    loss: f64,
}

struct ShiftRow {
    t: f64,
    bracket: f64,
    df: f64,
}

struct Problem<'a> {
    qi: Vec<QiRow>,
    df: Vec<ShiftRow>,
    f_r: f64,
    n_ph: f64,
    opts: &'a TemperatureFitOptions,
}

impl Problem<'_> {
    fn params(&self, delta0: f64, fd: f64, tc: f64, c: f64) -> LossModelParams {
        LossModelParams {
            alpha_k: self.opts.alpha_k,
            lk_shift_coeff: c,
            ..LossModelParams::new(delta0, fd, self.opts.n_c, self.opts.beta, tc)
        }
    }

    fn qp_loss(&self, t: f64, tc: f64) -> f64 {
        let p = self.params(0.0, 0.0, tc, 0.0);
        loss_terms(self.n_ph, t, self.f_r, &p).qp
    }

    fn kinetic(&self, t: f64, tc: f64) -> f64 {
        let r = K_B * t / gap_energy(tc);
        self.opts.alpha_k * r.powi(4)
    }

    /// Weighted linear least squares in (δ₀, Fδ, c) at fixed T_C.
    fn linear_solve(&self, tc: f64, sq: f64, sf: f64) -> Option<([f64; 3], f64)> {
        let mut a = Matrix3::<f64>::zeros();
        let mut b = Vector3::<f64>::zeros();
        let mut rows: Vec<(Vector3<f64>, f64)> = Vec::new();
        for r in &self.qi {
            let qp = self.qp_loss(r.t, tc);
            let w = 1.0 / (r.loss * sq);
            rows.push((Vector3::new(w, r.tls * w, 0.0), (r.loss - qp) * w));
        }
        for r in &self.df {
            let w = 1.0 / sf;
            rows.push((Vector3::new(0.0, r.bracket * w, -self.kinetic(r.t, tc) * w), r.df * w));
        }
        for (row, y) in &rows {
            a += row * row.transpose();
            b += row * *y;
        }
        // unidentified columns get a tiny ridge so the solve stays regular
        for i in 0..3 {
            if a[(i, i)] == 0.0 {
                a[(i, i)] = 1.0;
            }
        }
        let x = a.cholesky()?.solve(&b);
        let x = [x[0].max(0.0), x[1].max(0.0), x[2]];
        let cost = rows.iter().map(|(row, y)| (row.dot(&Vector3::from(x)) - y).powi(2)).sum();
        Some((x, cost))
    }
}

/// Fit δ₀, Fδ⁰_TLS, T_C and the kinetic-shift coefficient jointly to
/// Q_i(T) and Δf(T)/f_r taken at photon number `n_ph` and frequency `f_r`
/// (Hz). n_c and β come from the power fit through `opts`.
///
/// With only one dataset the fit falls back to the identifiable subset:
/// Q_i alone fixes the shift coefficient at 0, Δf alone fixes δ₀ at 0 and
/// T_C at `opts.tc_guess_k`.
pub fn fit_temperature(
    qi_vs_t: &[(f64, f64)],
    df_vs_t: &[(f64, f64)],
    f_r: f64,
    n_ph: f64,
    opts: &TemperatureFitOptions,
    cfg: &FitConfig,
) -> Result<TemperatureFitResult> {
    if !(f_r > 0.0) || !(n_ph >= 0.0) {
        return Err(Error::InvalidParameter(format!("need f_r > 0 and n_ph >= 0, got {f_r}, {n_ph}")));
    }
    if !(opts.n_c > 0.0 && opts.beta > 0.0 && opts.beta <= 1.0 && opts.tc_guess_k > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid temperature-fit options {opts:?}")));
    }
    if qi_vs_t.iter().chain(df_vs_t).any(|&(t, y)| !(t > 0.0) || !y.is_finite()) {
        return Err(Error::InvalidParameter("temperatures must be positive and values finite".into()));
    }
    if qi_vs_t.iter().any(|&(_, q)| !(q > 0.0)) {
        return Err(Error::InvalidParameter("Q_i values must be positive".into()));
    }
    let datasets = match (qi_vs_t.is_empty(), df_vs_t.is_empty()) {
        (false, false) => TemperatureDatasets::Joint,
        (false, true) => TemperatureDatasets::QiOnly,
        (true, false) => TemperatureDatasets::ShiftOnly,
        (true, true) => return Err(Error::InsufficientData("no temperature data supplied".into())),
    };
    let mut warnings = Vec::new();
    if datasets != TemperatureDatasets::Joint {
        warnings.push(format!("single-dataset fallback ({datasets:?}); some parameters held fixed"));
    }

    let tls_probe = LossModelParams { gap: 0.0, ..LossModelParams::new(0.0, 1.0, opts.n_c, opts.beta, 1.0) };
    let qi: Vec<QiRow> = qi_vs_t
        .iter()
        .map(|&(t, q)| QiRow { t, tls: loss_terms(n_ph, t, f_r, &tls_probe).tls, loss: 1.0 / q })
        .collect();
    let mut df = Vec::with_capacity(df_vs_t.len());
    for &(t, d) in df_vs_t {
        let y = H * f_r / (2.0 * std::f64::consts::PI * K_B * t);
        df.push(ShiftRow { t, bracket: tls_shift_bracket(y)? / std::f64::consts::PI, df: d });
    }
    let problem = Problem { qi, df, f_r, n_ph, opts };
    let n_free = match datasets {
        TemperatureDatasets::Joint => 4,
        _ => 3,
    };
    let n_points = problem.qi.len() + problem.df.len();
    if n_points <= n_free {
        return Err(Error::InsufficientData(format!("{n_points} points cannot constrain {n_free} parameters")));
    }
    let t_max = qi_vs_t.iter().chain(df_vs_t).map(|p| p.0).fold(0.0, f64::max);
    if datasets != TemperatureDatasets::ShiftOnly && t_max < 0.08 * opts.tc_guess_k {
        warnings.push(format!(
            "highest temperature {t_max} K is below 8% of the T_C guess; the quasiparticle regime is not sampled"
        ));
    }

    let fit_stage = |sq: f64, sf: f64| -> Result<FitResult> {
        // seed from a scan over T_C with the linear parameters solved exactly
        let (mut seed, mut tc0) = ([0.0; 3], opts.tc_guess_k);
        if datasets == TemperatureDatasets::ShiftOnly {
            if let Some((x, _)) = problem.linear_solve(tc0, sq, sf) {
                seed = x;
            }
        } else {
            let mut best = f64::INFINITY;
            for tc in logspace(0.2 * opts.tc_guess_k, 5.0 * opts.tc_guess_k, 121) {
                if let Some((x, cost)) = problem.linear_solve(tc, sq, sf) {
                    if cost < best {
                        best = cost;
                        seed = x;
                        tc0 = tc;
                    }
                }
            }
        }
        let loss_scale = problem
            .qi
            .iter()
            .map(|r| r.loss)
            .chain(std::iter::once(seed[1]))
            .fold(0.0, f64::max)
            .max(1e-12);
        let s = 1.0 / loss_scale;
        let residuals = |d0: f64, fd: f64, tc: f64, c: f64| -> Vec<f64> {
            let p = problem.params(d0, fd, tc, c);
            let mut r = Vec::with_capacity(n_points);
            for row in &problem.qi {
                let model = loss_terms(n_ph, row.t, f_r, &p).total();
                r.push((row.loss.ln() - model.ln()) / sq);
            }
            for row in &problem.df {
                let model = fd * row.bracket - c * problem.kinetic(row.t, tc);
                r.push((model - row.df) / sf);
            }
            r
        };
        let tc_bounds = (0.02 * opts.tc_guess_k, 50.0 * opts.tc_guess_k);
        let pos = (0.0, f64::INFINITY);
        let free = (f64::NEG_INFINITY, f64::INFINITY);
        let full = match datasets {
            TemperatureDatasets::Joint => {
                let cfg = cfg.clone().with_bounds(vec![pos, pos, tc_bounds, free]);
                let fit = least_squares(
                    |x| residuals(x[0] / s, x[1] / s, x[2], x[3]),
                    &[seed[0] * s, seed[1] * s, tc0, seed[2]],
                    &cfg,
                )?;
                fit.reparam(|i, x| if i < 2 { (x / s, 1.0 / s) } else { (x, 1.0) })
            }
            TemperatureDatasets::QiOnly => {
                let cfg = cfg.clone().with_bounds(vec![pos, pos, tc_bounds]);
                let fit = least_squares(
                    |x| residuals(x[0] / s, x[1] / s, x[2], 0.0),
                    &[seed[0] * s, seed[1] * s, tc0],
                    &cfg,
                )?;
                embed(fit.reparam(|i, x| if i < 2 { (x / s, 1.0 / s) } else { (x, 1.0) }), &[0, 1, 2], &[0.0; 4])
            }
            TemperatureDatasets::ShiftOnly => {
                let cfg = cfg.clone().with_bounds(vec![pos, free]);
                let fit = least_squares(|x| residuals(0.0, x[0] / s, tc0, x[1]), &[seed[1] * s, seed[2]], &cfg)?;
                embed(fit.reparam(|i, x| if i == 0 { (x / s, 1.0 / s) } else { (x, 1.0) }), &[1, 3], &[0.0, 0.0, tc0, 0.0])
            }
        };
        Ok(full)
    };

    // stage one: crude scales; stage two: weights from the stage-one scatter
    let q_scale = 0.05;
    let f_scale = problem.df.iter().map(|r| r.df.abs()).fold(0.0, f64::max).max(1e-15) * 0.05;
    let first = fit_stage(q_scale, f_scale)?;
    let scatter = |fit: &FitResult| -> (f64, f64) {
        let p = problem.params(fit.params[0], fit.params[1], fit.params[2], fit.params[3]);
        let rms = |v: Vec<f64>| if v.is_empty() { 0.0 } else { (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt() };
        let rq = rms(problem.qi.iter().map(|r| r.loss.ln() - loss_terms(n_ph, r.t, f_r, &p).total().ln()).collect());
        let rf = rms(problem
            .df
            .iter()
            .map(|r| fit.params[1] * r.bracket - fit.params[3] * problem.kinetic(r.t, fit.params[2]) - r.df)
            .collect());
        (rq, rf)
    };
    let (rq, rf) = scatter(&first);
    let sq = rq.max(1e-9 * q_scale / 0.05);
    let sf = rf.max(1e-9 * f_scale / 0.05);
    let fit = fit_stage(sq, sf)?;

    let params = problem.params(fit.params[0], fit.params[1], fit.params[2], fit.params[3]);
    let t_min = qi_vs_t.iter().chain(df_vs_t).map(|p| p.0).fold(f64::INFINITY, f64::min);
    let qi_max_k = interior_qi_max(&params, t_min, t_max, n_ph, f_r);
    let shift_crossover_k = shift_crossover(&params, t_min.min(0.05), t_max.max(2.0), f_r);

    let tc = fit.params[2];
    let tc_se = fit.stderr[2];
    let qp_at_top = problem.qp_loss(t_max, tc);
    let total_at_top = loss_terms(n_ph, t_max, f_r, &params).total();
    let mut ill = fit.pseudo_inverse || !fit.converged;
    if datasets != TemperatureDatasets::ShiftOnly {
        if qp_at_top < 0.01 * total_at_top {
            warnings.push(format!("quasiparticle loss is below 1% of the total at {t_max} K; T_C is unconstrained"));
            ill = true;
        }
        if !(tc_se < 0.5 * tc) {
            warnings.push(format!("T_C = {tc} K has relative uncertainty above 50%"));
            ill = true;
        }
    }
    if datasets != TemperatureDatasets::Joint {
        ill = true;
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TemperatureFitResult {
        params,
        fit,
        datasets,
        qi_sigma: (!problem.qi.is_empty()).then_some(sq),
        shift_sigma: (!problem.df.is_empty()).then_some(sf),
        ill_conditioned: ill,
        warnings,
        qi_max_k,
        shift_crossover_k,
    })
}

/// Place a reduced fit into the four-parameter layout; fixed entries take
/// `fixed` values and zero variance.
fn embed(fit: FitResult, slots: &[usize], fixed: &[f64; 4]) -> FitResult {
    let mut params = fixed.to_vec();
    let mut stderr = vec![0.0; 4];
    let mut cov = vec![vec![0.0; 4]; 4];
    for (a, &i) in slots.iter().enumerate() {
        params[i] = fit.params[a];
        stderr[i] = fit.stderr[a];
        for (b, &j) in slots.iter().enumerate() {
            cov[i][j] = fit.covariance[a][b];
        }
    }
    FitResult { params, stderr, covariance: cov, ..fit }
}

/// Location of the Q_i(T) maximum when it lies strictly inside the range.
pub fn interior_qi_max(p: &LossModelParams, t_lo: f64, t_hi: f64, n_ph: f64, f_r: f64) -> Option<f64> {
    if !(t_hi > t_lo) {
        return None;
    }
    let grid = linspace(t_lo, t_hi, 2001);
    let q: Vec<f64> = grid.iter().map(|&t| loss_terms(n_ph, t, f_r, p).q_i()).collect();
    let (imax, _) = q.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    (imax > 0 && imax + 1 < grid.len()).then_some(grid[imax])
}

/// Lowest temperature above which |kinetic shift| > |TLS shift| everywhere
/// up to `t_hi`.
pub fn shift_crossover(p: &LossModelParams, t_lo: f64, t_hi: f64, f_r: f64) -> Option<f64> {
    let grid = linspace(t_lo, t_hi, 4001);
    let dominant: Vec<bool> = grid
        .iter()
        .map(|&t| shift_terms(t, f_r, p).map(|s| s.kinetic.abs() > s.tls.abs()).unwrap_or(false))
        .collect();
    if !*dominant.last()? {
        return None;
    }
    let first_kinetic = dominant.iter().rposition(|d| !d).map(|i| i + 1).unwrap_or(0);
    (first_kinetic > 0).then(|| 0.5 * (grid[first_kinetic - 1] + grid[first_kinetic]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{freq_shift_model, qi_model};

    fn truth() -> LossModelParams {
        LossModelParams::new(1e-6, 1.8e-5, 1.74, 0.2, 7.4).with_lk_shift(0.55)
    }

    fn data(p: &LossModelParams, temps: &[f64]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let qi = temps.iter().map(|&t| (t, qi_model(50.0, t, 5.95e9, p))).collect();
        let df = temps.iter().map(|&t| (t, freq_shift_model(t, 5.95e9, p).unwrap())).collect();
        (qi, df)
    }

    fn opts() -> TemperatureFitOptions {
        TemperatureFitOptions { n_c: 1.74, beta: 0.2, ..Default::default() }
    }

    #[test]
    fn noiseless_joint_recovery() {
        let p = truth();
        let temps = linspace(0.02, 1.0, 40);
        let (qi, df) = data(&p, &temps);
        let res = fit_temperature(&qi, &df, 5.95e9, 50.0, &opts(), &FitConfig::default()).unwrap();
        assert_eq!(res.datasets, TemperatureDatasets::Joint);
        assert!((res.tc() / 7.4 - 1.0).abs() < 1e-4, "{}", res.tc());
        assert!((res.params.f_delta_tls / 1.8e-5 - 1.0).abs() < 1e-4);
        assert!((res.params.lk_shift_coeff / 0.55 - 1.0).abs() < 1e-3);
        assert!(res.qi_max_k.is_some());
        assert!(!res.ill_conditioned, "{:?}", res.warnings);
    }

    #[test]
    fn no_quasiparticles_flags_tc() {
        let mut p = truth();
        p.gap = 0.0;
        let temps = linspace(0.02, 1.0, 40);
        let (qi, df) = data(&p, &temps);
        let res = fit_temperature(&qi, &df, 5.95e9, 50.0, &opts(), &FitConfig::default()).unwrap();
        assert!(res.ill_conditioned);
    }

    #[test]
    fn shift_only_below_400mk() {
        // TLS-dominated regime: the kinetic shift at 0.4 K is no larger
        // than the measurement scatter
        let p = truth();
        let temps = linspace(0.02, 0.4, 30);
        let kinetic_at_top = shift_terms(0.4, 5.95e9, &p).unwrap().kinetic.abs();
        let sweep = crate::synth::generate_temperature_sweep(&p, 5.95e9, 50.0, &temps)
            .unwrap()
            .perturbed(0.0, kinetic_at_top, 4)
            .unwrap();
        let res = fit_temperature(&[], &sweep.shift_points(), 5.95e9, 50.0, &opts(), &FitConfig::default()).unwrap();
        assert_eq!(res.datasets, TemperatureDatasets::ShiftOnly);
        let c = res.params.lk_shift_coeff;
        assert!(c.abs() < 3.0 * res.stderr("lk_shift_coeff"), "{c} ± {}", res.stderr("lk_shift_coeff"));
    }

    #[test]
    fn qi_only_fallback() {
        let p = truth();
        let temps = linspace(0.02, 1.0, 40);
        let (qi, _) = data(&p, &temps);
        let res = fit_temperature(&qi, &[], 5.95e9, 50.0, &opts(), &FitConfig::default()).unwrap();
        assert_eq!(res.datasets, TemperatureDatasets::QiOnly);
        assert!(res.ill_conditioned);
        assert!((res.tc() / 7.4 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn crossover_of_truth() {
        let t = shift_crossover(&truth(), 0.05, 2.0, 5.95e9).unwrap();
        assert!(t > 0.5 && t < 0.9, "{t}");
    }
}
