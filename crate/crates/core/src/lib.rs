//! Modelling, simulation and fitting of nonlinear superconducting resonators
//! in hanger (notch) configuration.
//!
//! * [`model`]: steady-state Kerr resonator response and photon-number cubic.
//! * [`physics`]: kinetic inductance, TLS and quasiparticle loss, frequency shift.
//! * [`fitting`]: Levenberg–Marquardt engine and the resonator/loss fits built on it.
//! * [`lk`]: sheet-inductance estimation from simulated resonance frequencies.
//! * [`synth`]: synthetic datasets with known ground truth.
//! * [`io`]: trace files, sweep manifests and reports.

pub mod error;
pub mod fitting;
pub mod fixtures;
pub mod io;
pub mod lk;
pub mod model;
pub mod physics;
pub mod synth;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
pub use fitting::{FitConfig, FitResult};
pub use model::{
    forward_trace, kerr_from_fit, multiplex_feedline, reduced_vars, s21_hanger, solve_photon_cubic,
    solve_photon_cubic_with, BaselineEnv, BranchRule, DriveCondition, KerrResonatorParams, PhotonSolution,
    ReducedDriveVars,
};
pub use physics::{FilmProperties, InductorGeometry, LossModelParams};
pub use trace::{ComplexTrace, PowerSweep, SweepDirection, TraceMeta};
