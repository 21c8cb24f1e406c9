//! Shared inputs for the criterion benchmarks.

use kerrfit::{KerrResonatorParams, SweepDirection};

/// Device 803-500 parameters used by every benchmark.
pub fn device_803_500() -> KerrResonatorParams {
    KerrResonatorParams::from_hz(5.95e9, 91.88e3, 95.96e3, -4.17, 0.0).expect("valid fixture")
}

/// Angular frequency grid of `points` spanning ±`half_span` linewidths.
pub fn sweep_grid(params: &KerrResonatorParams, points: usize, half_span: f64) -> Vec<f64> {
    let lw = params.linewidth();
    (0..points)
        .map(|i| params.omega0 + (2.0 * i as f64 / (points - 1) as f64 - 1.0) * half_span * lw)
        .collect()
}

pub const DIRECTION: SweepDirection = SweepDirection::Up;
