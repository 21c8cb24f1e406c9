use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kerrfit::fitting::{
    apply_baseline, fit_global_power, fit_single_trace, fit_temperature, fit_tls_power, normalize_baseline,
    TemperatureFitOptions,
};
use kerrfit::fixtures::{device_by_id, film_by_recipe, DeviceRow};
use kerrfit::io::{
    age_diff, file_digest, read_power_sweep, read_sim_points, read_trace, write_power_sweep, write_qi_plot,
    write_trace_plot, AgeingTable, DeviceReport, Report, Table,
};
use kerrfit::lk::{average_film_lk, compare_bcs_vs_resonator, fit_hyperbola, fit_hyperbola_pure, invert_frequency};
use kerrfit::physics::{freq_shift_model, gap_energy, lk_bcs, loss_terms, qi_model, LossModelParams};
use kerrfit::synth::{
    generate_ageing_pair, generate_power_sweep, generate_qi_curve, generate_temperature_sweep, LogNormalScatter,
    NoiseSpec, SweepPlan,
};
use kerrfit::trace::{linspace, logspace};
use kerrfit::units::rad_to_hz;
use kerrfit::{forward_trace, BaselineEnv, BranchRule, Error, FilmProperties, FitConfig};
use serde_json::json;

use crate::{BaselineMode, Command, Common, ReportFormat, SynthArgs, SynthKind, TraceExt};

pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    fn from_converged(ok: bool) -> Self {
        if ok {
            Outcome::Done
        } else {
            Outcome::NotConverged
        }
    }
}

/// 2 for fits that ran but found nothing, 1 for anything the user can fix,
/// 3 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(k) = cause.downcast_ref::<Error>() {
            return match k {
                Error::NoResonance { .. } | Error::NonFinite { .. } => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    3
}

fn bad_input(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter(msg.into()).into()
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn fit_config(common: &Common) -> FitConfig {
    FitConfig { seed: common.seed, ..FitConfig::default() }
}

fn new_report(common: &Common) -> Report {
    Report { seed: Some(common.seed), ..Report::default() }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), cause: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), cause: e })?;
    Ok(())
}

fn write_report(common: &Common, name: &str, report: &Report) -> Result<PathBuf> {
    let json_path = common.out.join(format!("{name}.json"));
    write_file(&json_path, &report.to_json()?)?;
    if common.format == ReportFormat::Csv {
        write_file(&common.out.join(format!("{name}.csv")), &report.to_csv()?)?;
    }
    Ok(json_path)
}

fn record_input(report: &mut Report, path: &Path) -> Result<()> {
    report.inputs.insert(file_name(path), file_digest(path)?);
    Ok(())
}

pub fn run(common: &Common, command: Command) -> Result<Outcome> {
    match command {
        Command::FitTrace { file, device_id } => fit_trace(common, &file, device_id),
        Command::FitSweep { manifests, baseline } => fit_sweep(common, &manifests, baseline),
        Command::FitTls { file, temperature_k, fr_hz, device_id } => fit_tls(common, &file, temperature_k, fr_hz, device_id),
        Command::FitTemp { file, fr_hz, n_ph, n_c, beta, tc_guess_k, device_id } => {
            let opts = TemperatureFitOptions { n_c, beta, tc_guess_k, ..TemperatureFitOptions::default() };
            fit_temp(common, &file, fr_hz, n_ph, opts, device_id)
        }
        Command::EstimateLk { sim, f_measured_hz, recipe, tc_k, rsq_ohm } => {
            estimate_lk(common, &sim, &f_measured_hz, recipe, tc_k.zip(rsq_ohm))
        }
        Command::Bcs { tc_k, rsq_ohm, temperature_k } => bcs(common, tc_k, rsq_ohm, temperature_k),
        Command::Synth(args) => synth(common, &args),
        Command::AgeDiff { before, after } => ageing(common, &before, &after),
        Command::Report { reports, ageing } => merge_reports(common, &reports, ageing.as_deref()),
    }
}

fn fit_trace(common: &Common, file: &Path, device_id: Option<String>) -> Result<Outcome> {
    let trace = read_trace(file)?;
    let id = device_id.or_else(|| trace.meta.device_id.clone()).unwrap_or_else(|| stem(file));
    let (norm, _env) = normalize_baseline(&trace).with_context(|| format!("calibrating {}", file.display()))?;
    let fit = fit_single_trace(&norm, &fit_config(common))?;

    let model = forward_trace(&fit.params, &BaselineEnv::identity(), &norm.omega, 1e-18, norm.meta.direction, BranchRule::Continuation)?;
    write_trace_plot(&common.out.join(format!("{}.trace.csv", stem(file))), &norm, Some(&model.s21))?;

    let mut report = new_report(common);
    record_input(&mut report, file)?;
    *report.device_mut(&id) = DeviceReport::from_single_trace(&fit);
    write_report(common, &format!("{}.report", stem(file)), &report)?;
    println!(
        "{id}: f0 = {:.6} GHz, kappa = {:.3} kHz, gamma = {:.3} kHz",
        rad_to_hz(fit.params.omega0) / 1e9,
        rad_to_hz(fit.params.kappa) / 1e3,
        rad_to_hz(fit.params.gamma) / 1e3
    );
    Ok(Outcome::from_converged(fit.fit.converged))
}

struct SweepOutcome {
    id: String,
    digests: Vec<(String, String)>,
    device: DeviceReport,
    converged: bool,
}

fn fit_one_sweep(common: &Common, manifest_path: &Path, baseline: BaselineMode) -> Result<SweepOutcome> {
    let (manifest, mut sweep) = read_power_sweep(manifest_path)?;
    let id = manifest.device_id.clone().unwrap_or_else(|| stem(manifest_path));
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut digests = vec![(file_name(manifest_path), file_digest(manifest_path)?)];
    for t in &manifest.traces {
        digests.push((t.clone(), file_digest(&base.join(t))?));
    }

    if baseline == BaselineMode::Lowest {
        let lowest = sweep
            .traces
            .iter()
            .min_by(|a, b| a.meta.power_w.unwrap_or(f64::INFINITY).total_cmp(&b.meta.power_w.unwrap_or(f64::INFINITY)))
            .ok_or_else(|| bad_input("sweep has no traces"))?;
        let (_, env) = normalize_baseline(lowest).with_context(|| format!("calibrating baseline of {id}"))?;
        sweep.traces = sweep.traces.iter().map(|t| apply_baseline(t, &env)).collect::<kerrfit::Result<_>>()?;
    }
    let fit = fit_global_power(&sweep, &fit_config(common)).with_context(|| format!("fitting {id}"))?;

    let name = stem(manifest_path);
    for (i, (trace, pp)) in sweep.traces.iter().zip(&fit.per_power).enumerate() {
        let p = kerrfit::KerrResonatorParams { gamma: pp.gamma, ..fit.params };
        let model = forward_trace(&p, &BaselineEnv::identity(), &trace.omega, pp.power_w, trace.meta.direction, BranchRule::Continuation)?;
        write_trace_plot(&common.out.join(format!("{name}_p{i}.trace.csv")), trace, Some(&model.s21))?;
    }
    let qi: Vec<(f64, f64)> = fit.per_power.iter().map(|p| (p.n_ph, p.q_internal)).collect();
    write_qi_plot(&common.out.join(format!("{name}.qi.csv")), &qi, None)?;

    let mut device = DeviceReport::from_global_fit(&fit);
    device.width_nm = manifest.width_nm;
    Ok(SweepOutcome { id, digests, device, converged: fit.fit.converged })
}

fn fit_sweep(common: &Common, manifests: &[PathBuf], baseline: BaselineMode) -> Result<Outcome> {
    let stems: Vec<String> = manifests.iter().map(|m| stem(m)).collect();
    for (i, s) in stems.iter().enumerate() {
        if stems[..i].contains(s) {
            return Err(bad_input(format!("two manifests share the name '{s}'; their outputs would overwrite each other")));
        }
    }
    let results: Vec<Result<SweepOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = manifests.iter().map(|m| s.spawn(move || fit_one_sweep(common, m, baseline))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("worker panicked")))).collect()
    });
    // one report per manifest, written in argument order
    let mut converged = true;
    for (r, name) in results.into_iter().zip(&stems) {
        let r = r?;
        let mut report = new_report(common);
        report.inputs.extend(r.digests);
        converged &= r.converged;
        let d = &r.device;
        println!(
            "{}: f0 = {:.6} GHz, kappa = {:.3} kHz, gamma = {:.3} kHz, K = {:.3} ± {:.3} Hz",
            r.id,
            d.f0_hz.unwrap_or(f64::NAN) / 1e9,
            d.kappa_hz.unwrap_or(f64::NAN) / 1e3,
            d.gamma_hz.unwrap_or(f64::NAN) / 1e3,
            d.kerr_hz.unwrap_or(f64::NAN),
            d.kerr_stderr_hz.unwrap_or(f64::NAN)
        );
        report.devices.insert(r.id, r.device);
        write_report(common, &format!("{name}.report"), &report)?;
    }
    Ok(Outcome::from_converged(converged))
}

fn meta_or(table: &Table, arg: Option<f64>, key: &str) -> Result<f64> {
    match arg {
        Some(v) => Ok(v),
        None => table.meta_f64(key)?.ok_or_else(|| bad_input(format!("missing --{} and no '{key}' metadata", key.replace('_', "-")))),
    }
}

fn fit_tls(common: &Common, file: &Path, t: Option<f64>, fr: Option<f64>, device_id: Option<String>) -> Result<Outcome> {
    let table = Table::read(file)?;
    let t = meta_or(&table, t, "temperature_k")?;
    let f_r = meta_or(&table, fr, "f_r_hz")?;
    let points = table.pairs("n_ph", "q_i")?;
    let res = fit_tls_power(&points, t, f_r, &fit_config(common))?;
    for w in &res.warnings {
        log::warn!("{w}");
    }
    let p = res.fixed_beta.params;
    let model: Vec<f64> = points.iter().map(|&(n, _)| qi_model(n, t, f_r, &p)).collect();
    write_qi_plot(&common.out.join(format!("{}.qi.csv", stem(file))), &points, Some(&model))?;

    let id = device_id.or_else(|| table.meta.get("device_id").cloned()).unwrap_or_else(|| stem(file));
    let mut report = new_report(common);
    record_input(&mut report, file)?;
    *report.device_mut(&id) = DeviceReport::from_tls_fit(&res);
    write_report(common, &format!("{}.report", stem(file)), &report)?;
    println!(
        "{id}: F*delta_TLS = {:.4e} ± {:.2e}, n_c = {:.2} ± {:.2}{}",
        p.f_delta_tls,
        res.fixed_beta.stderr("f_delta_tls"),
        p.n_c,
        res.fixed_beta.stderr("n_c"),
        if res.ill_conditioned { " (ill-conditioned)" } else { "" }
    );
    Ok(Outcome::from_converged(res.fixed_beta.fit.converged))
}

fn fit_temp(
    common: &Common,
    file: &Path,
    fr: Option<f64>,
    n_ph: Option<f64>,
    opts: TemperatureFitOptions,
    device_id: Option<String>,
) -> Result<Outcome> {
    let table = Table::read(file)?;
    let f_r = meta_or(&table, fr, "f_r_hz")?;
    let n_ph = match n_ph {
        Some(n) => n,
        None => table.meta_f64("n_ph")?.unwrap_or(50.0),
    };
    let qi = if table.has_column("q_i") { table.pairs("temperature_k", "q_i")? } else { Vec::new() };
    let df = if table.has_column("df_over_f") { table.pairs("temperature_k", "df_over_f")? } else { Vec::new() };
    let res = fit_temperature(&qi, &df, f_r, n_ph, &opts, &fit_config(common))?;
    for w in &res.warnings {
        log::warn!("{w}");
    }

    let p = res.params;
    let mut plot = Table::new(&["temperature_k", "model_q_i", "model_df_over_f"]);
    plot.meta.insert("f_r_hz".into(), kerrfit::io::fmt_f64(f_r));
    plot.meta.insert("n_ph".into(), kerrfit::io::fmt_f64(n_ph));
    let temps: Vec<f64> = table.column("temperature_k")?.into_iter().flatten().collect();
    if let (Some(lo), Some(hi)) = (temps.iter().copied().reduce(f64::min), temps.iter().copied().reduce(f64::max)) {
        for t in linspace(lo, hi, 200) {
            plot.rows.push(vec![Some(t), Some(loss_terms(n_ph, t, f_r, &p).q_i()), freq_shift_model(t, f_r, &p).ok()]);
        }
    }
    plot.write(&common.out.join(format!("{}.temperature.csv", stem(file))))?;

    let id = device_id.or_else(|| table.meta.get("device_id").cloned()).unwrap_or_else(|| stem(file));
    let mut report = new_report(common);
    record_input(&mut report, file)?;
    *report.device_mut(&id) = DeviceReport::from_temperature_fit(&res);
    write_report(common, &format!("{}.report", stem(file)), &report)?;
    println!(
        "{id}: T_C = {:.3} ± {:.3} K, F*delta_TLS = {:.4e}, Q_i max at {}, shift crossover at {}",
        res.tc(),
        res.stderr("tc"),
        p.f_delta_tls,
        res.qi_max_k.map_or("-".into(), |t| format!("{t:.3} K")),
        res.shift_crossover_k.map_or("-".into(), |t| format!("{t:.3} K")),
    );
    Ok(Outcome::from_converged(res.fit.converged))
}

fn estimate_lk(
    common: &Common,
    sim: &Path,
    f_measured: &[f64],
    recipe: Option<String>,
    film_args: Option<(f64, f64)>,
) -> Result<Outcome> {
    let points = read_sim_points(sim)?;
    let with_offset = fit_hyperbola(&points)?;
    let pure = fit_hyperbola_pure(&points)?;
    let mut est_offset = Vec::new();
    let mut est_pure = Vec::new();
    let mut rows = Vec::new();
    for &f in f_measured {
        let a = invert_frequency(&with_offset, f)?;
        let b = invert_frequency(&pure, f)?;
        est_offset.push(a);
        est_pure.push(b);
        rows.push(json!({ "f_measured_hz": f, "ls_offset_ph_per_sq": a * 1e12, "ls_pure_ph_per_sq": b * 1e12 }));
    }
    let (mean_o, std_o) = average_film_lk(&est_offset)?;
    let (mean_p, std_p) = average_film_lk(&est_pure)?;
    let hyperbola = |h: &kerrfit::lk::HyperbolaFit| {
        json!({
            "scale_hz_sqrt_h_per_sq": h.scale,
            "offset_ph_per_sq": h.offset * 1e12,
            "rms_hz": h.rms,
            "offset_clamped": h.offset_clamped,
        })
    };

    let film: Option<FilmProperties> = match (recipe, film_args) {
        (Some(r), _) => Some(film_by_recipe(&r).ok_or_else(|| bad_input(format!("unknown recipe '{r}'")))?.film),
        (None, Some((tc, rsq))) => Some(FilmProperties { tc, r_sq: rsq, thickness: kerrfit::fixtures::FILM_THICKNESS, lk0: 0.0, jc: 0.0 }),
        _ => None,
    };
    let comparison = film
        .map(|f| compare_bcs_vs_resonator(&f, mean_o))
        .transpose()?
        .map(|c| {
            json!({
                "bcs_ph_per_sq": c.bcs_h_per_sq * 1e12,
                "resonator_ph_per_sq": c.resonator_h_per_sq * 1e12,
                "relative_difference_dimless": c.relative_difference,
            })
        });

    let doc = json!({
        "schema_version": kerrfit::io::SCHEMA_VERSION,
        "tool": "kerrfit",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "inputs": { file_name(sim): file_digest(sim)? },
        "hyperbola_offset": hyperbola(&with_offset),
        "hyperbola_pure": hyperbola(&pure),
        "estimates": rows,
        "mean_offset_ph_per_sq": mean_o * 1e12,
        "std_offset_ph_per_sq": std_o * 1e12,
        "mean_pure_ph_per_sq": mean_p * 1e12,
        "std_pure_ph_per_sq": std_p * 1e12,
        "bcs_comparison": comparison,
    });
    write_file(&common.out.join("lk.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    println!("L_s = {:.2} ± {:.2} pH/□ (offset law), {:.2} ± {:.2} pH/□ (pure law)", mean_o * 1e12, std_o * 1e12, mean_p * 1e12, std_p * 1e12);
    Ok(Outcome::Done)
}

fn bcs(common: &Common, tc: f64, rsq: f64, t: f64) -> Result<Outcome> {
    if !(tc > 0.0) {
        return Err(bad_input(format!("--tc-k must be positive, got {tc}")));
    }
    let lk = lk_bcs(rsq, gap_energy(tc), t)?;
    let doc = json!({ "tc_k": tc, "rsq_ohm": rsq, "temperature_k": t, "lk_ph_per_sq": lk * 1e12 });
    write_file(&common.out.join("bcs.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    println!("{:.1} pH/□", lk * 1e12);
    Ok(Outcome::Done)
}

fn device_row(id: &str) -> Result<&'static DeviceRow> {
    device_by_id(id).ok_or_else(|| bad_input(format!("unknown device '{id}'")))
}

fn synth(common: &Common, a: &SynthArgs) -> Result<Outcome> {
    let row = device_row(&a.device)?;
    let f_r = row.f0_ghz * 1e9;
    match a.kind {
        SynthKind::Sweep => {
            let truth = row.params()?;
            let half_span = a.half_span_linewidths * (row.kappa_khz + row.gamma_khz) * 1e3;
            let mut plan = SweepPlan::centered(a.powers_dbm.clone(), f_r, half_span, a.points);
            plan.attenuation_db = a.attenuation_db;
            let noise = NoiseSpec { sigma: a.sigma, seed: common.seed };
            let ext = match a.trace_format {
                TraceExt::Csv => "csv",
                TraceExt::S2p => "s2p",
            };
            let env = BaselineEnv::identity();
            let sweeps = match a.df_age_hz {
                None => vec![(row.id.to_string(), generate_power_sweep(&truth, &env, &plan, &noise)?)],
                Some(df) => {
                    let (b, af) = generate_ageing_pair(&truth, &env, &plan, &noise, df, a.qi_scale)?;
                    vec![(format!("{}_before", row.id), b), (format!("{}_after", row.id), af)]
                }
            };
            for (name, mut sweep) in sweeps {
                sweep.device_id = Some(row.id.to_string());
                let path = write_power_sweep(&common.out, &name, &sweep, ext, Some(a.sigma), Some(row.width_nm))?;
                println!("{}", path.display());
            }
        }
        SynthKind::Qi => {
            let p = LossModelParams::new(1e-6, row.f_delta_tls, row.n_c, 0.2, a.tc_k);
            let t = 0.015;
            let scatter = (a.qi_scatter > 0.0).then_some(LogNormalScatter { sigma_ln: a.qi_scatter, seed: common.seed });
            let curve = generate_qi_curve(&p, t, f_r, &logspace(0.1, 1e5, 25), scatter)?;
            let mut table = Table::new(&["n_ph", "q_i"]);
            table.meta.insert("device_id".into(), row.id.into());
            table.meta.insert("f_r_hz".into(), kerrfit::io::fmt_f64(f_r));
            table.meta.insert("temperature_k".into(), kerrfit::io::fmt_f64(t));
            table.rows = curve.into_iter().map(|(n, q)| vec![Some(n), Some(q)]).collect();
            let path = common.out.join(format!("{}.qi-data.csv", row.id));
            table.write(&path)?;
            println!("{}", path.display());
        }
        SynthKind::Temperature => {
            let p = LossModelParams::new(1e-6, row.f_delta_tls, row.n_c, 0.2, a.tc_k).with_lk_shift(a.lk_shift_coeff);
            let n_ph = 50.0;
            let sweep = generate_temperature_sweep(&p, f_r, n_ph, &linspace(0.02, 0.95, 40))?.perturbed(a.qi_scatter, 0.0, common.seed)?;
            let mut table = Table::new(&["temperature_k", "q_i", "df_over_f"]);
            table.meta.insert("device_id".into(), row.id.into());
            table.meta.insert("f_r_hz".into(), kerrfit::io::fmt_f64(f_r));
            table.meta.insert("n_ph".into(), kerrfit::io::fmt_f64(n_ph));
            for i in 0..sweep.temperatures_k.len() {
                table.rows.push(vec![Some(sweep.temperatures_k[i]), Some(sweep.qi[i]), Some(sweep.df_over_f[i])]);
            }
            let path = common.out.join(format!("{}.temperature-data.csv", row.id));
            table.write(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(Outcome::Done)
}

fn ageing(common: &Common, before: &Path, after: &Path) -> Result<Outcome> {
    let table = age_diff(&Report::read(before)?, &Report::read(after)?);
    write_file(&common.out.join("ageing.json"), &table.to_json()?)?;
    if common.format == ReportFormat::Csv {
        write_file(&common.out.join("ageing.csv"), &table.to_csv())?;
    }
    for (id, r) in &table.rows {
        let se = r.df_age_stderr_hz.map_or(String::new(), |s| format!(" ± {:.3}", s / 1e6));
        println!("{id}: df_age = {:.4}{se} MHz", r.df_age_hz / 1e6);
    }
    for id in table.unmatched_before.iter().chain(&table.unmatched_after) {
        println!("{id}: unmatched");
    }
    Ok(Outcome::Done)
}

fn merge_reports(common: &Common, reports: &[PathBuf], ageing: Option<&Path>) -> Result<Outcome> {
    let mut merged = new_report(common);
    for path in reports {
        merged.merge(&Report::read(path)?)?;
    }
    if let Some(path) = ageing {
        merged.apply_ageing(&AgeingTable::read(path)?);
    }
    let path = write_report(common, "report", &merged)?;
    println!("{}", path.display());
    Ok(Outcome::Done)
}
