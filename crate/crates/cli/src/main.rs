//! `kerrfit` command-line interface.
//!
//! Exit codes: 0 success, 1 bad input, 2 fit did not converge or no
//! resonance was found, 3 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "kerrfit", version, about = "Fit and simulate nonlinear superconducting hanger resonators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory for every file written.
    #[arg(long, global = true, env = "KERRFIT_OUT_DIR", default_value = "kerrfit-out")]
    pub out: PathBuf,
    /// Seed for synthetic noise and randomized fit restarts.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report format. JSON is always written; `csv` adds the table mirror.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceExt {
    Csv,
    S2p,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Calibrate on the lowest-power trace and divide it out of all traces.
    Lowest,
    /// Traces are already normalised.
    None,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Power sweep of complex traces plus a manifest.
    Sweep,
    /// Q_i versus photon number table.
    Qi,
    /// Q_i and fractional shift versus temperature table.
    Temperature,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one trace with the Kerr-free hanger model.
    FitTrace {
        /// Trace file (.csv or .s2p).
        file: PathBuf,
        #[arg(long)]
        device_id: Option<String>,
    },
    /// Joint fit of the power sweeps listed in one or more manifests.
    FitSweep {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = BaselineMode::Lowest)]
        baseline: BaselineMode,
    },
    /// TLS model fit to a Q_i(n_ph) table (columns n_ph,q_i).
    FitTls {
        file: PathBuf,
        /// Defaults to the file's `temperature_k` metadata.
        #[arg(long)]
        temperature_k: Option<f64>,
        /// Defaults to the file's `f_r_hz` metadata.
        #[arg(long)]
        fr_hz: Option<f64>,
        #[arg(long)]
        device_id: Option<String>,
    },
    /// Joint fit of Q_i(T) and Δf(T)/f_r (columns temperature_k,q_i,df_over_f).
    FitTemp {
        file: PathBuf,
        #[arg(long)]
        fr_hz: Option<f64>,
        /// Photon number of the measurement; defaults to metadata `n_ph`, then 50.
        #[arg(long)]
        n_ph: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        n_c: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        /// Critical temperature used as scan centre, and held fixed when only shifts are given.
        #[arg(long, default_value_t = 7.0)]
        tc_guess_k: f64,
        #[arg(long)]
        device_id: Option<String>,
    },
    /// Sheet inductance from simulated points (columns ls_ph_per_sq,f0_hz) and measured frequencies.
    EstimateLk {
        sim: PathBuf,
        #[arg(long = "f-measured-hz", required = true, num_args = 1.., value_delimiter = ',')]
        f_measured_hz: Vec<f64>,
        /// Film recipe to compare against BCS, e.g. 80/3.
        #[arg(long)]
        recipe: Option<String>,
        #[arg(long, requires = "rsq_ohm")]
        tc_k: Option<f64>,
        #[arg(long, requires = "tc_k")]
        rsq_ohm: Option<f64>,
    },
    /// BCS kinetic inductance per square.
    Bcs {
        #[arg(long)]
        tc_k: f64,
        #[arg(long)]
        rsq_ohm: f64,
        #[arg(long, default_value_t = 0.0)]
        temperature_k: f64,
    },
    /// Generate synthetic data from a tabulated device.
    Synth(SynthArgs),
    /// Frequency change between two reports.
    AgeDiff { before: PathBuf, after: PathBuf },
    /// Merge reports (and optionally an ageing table) into one.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        ageing: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Device id from the built-in table, e.g. 803-500.
    #[arg(long)]
    pub device: String,
    #[arg(long, value_enum, default_value_t = SynthKind::Sweep)]
    pub kind: SynthKind,
    /// VNA powers, dBm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-80,-72,-64,-56,-48,-40,-32")]
    pub powers_dbm: Vec<f64>,
    #[arg(long, default_value_t = 68.0)]
    pub attenuation_db: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Half span of the grid in linewidths (κ + γ).
    #[arg(long, default_value_t = 6.0)]
    pub half_span_linewidths: f64,
    /// Complex noise per component.
    #[arg(long, default_value_t = 1e-3)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = TraceExt::Csv)]
    pub trace_format: TraceExt,
    /// Also write an aged copy shifted down by this much.
    #[arg(long)]
    pub df_age_hz: Option<f64>,
    /// Internal-loss factor of the aged copy.
    #[arg(long, default_value_t = 1.0)]
    pub qi_scale: f64,
    /// Relative log-normal scatter of Q_i tables.
    #[arg(long, default_value_t = 0.05)]
    pub qi_scatter: f64,
    #[arg(long, default_value_t = 7.4)]
    pub tc_k: f64,
    #[arg(long, default_value_t = 0.55)]
    pub lk_shift_coeff: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| commands::run(&cli.common, cli.command)) {
        Ok(Ok(commands::Outcome::Done)) => ExitCode::SUCCESS,
        Ok(Ok(commands::Outcome::NotConverged)) => {
            eprintln!("kerrfit: fit did not converge (results written)");
            ExitCode::from(2)
        }
        Ok(Err(e)) => {
            eprintln!("kerrfit: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(_) => {
            eprintln!("kerrfit: internal error");
            ExitCode::from(3)
        }
    }
}
