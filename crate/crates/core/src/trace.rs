//! Complex transmission traces and their metadata.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order in which the VNA stepped through the frequency points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

impl std::str::FromStr for SweepDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(SweepDirection::Up),
            "down" => Ok(SweepDirection::Down),
            other => Err(Error::InvalidParameter(format!("unknown sweep direction '{other}'"))),
        }
    }
}

impl std::fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        })
    }
}

/// Acquisition metadata carried alongside a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub device_id: Option<String>,
    /// Drive power at the VNA port.
    pub power_dbm: Option<f64>,
    pub attenuation_db: Option<f64>,
    /// Drive power at the device plane, W.
    pub power_w: Option<f64>,
    pub temperature_k: Option<f64>,
    pub direction: SweepDirection,
}

/// One frequency sweep of complex S21.
///
/// Frequencies are stored as angular frequencies (rad/s) and must be strictly
/// increasing regardless of the acquisition direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace {
    pub omega: Vec<f64>,
    pub s21: Vec<Complex64>,
    pub meta: TraceMeta,
}

impl ComplexTrace {
    pub fn new(omega: Vec<f64>, s21: Vec<Complex64>, meta: TraceMeta) -> Result<Self> {
        let trace = ComplexTrace { omega, s21, meta };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() != self.s21.len() {
            return Err(Error::Inconsistent(format!(
                "{} frequencies but {} S21 values",
                self.omega.len(),
                self.s21.len()
            )));
        }
        check_strictly_increasing(&self.omega)?;
        if let Some(i) = self.s21.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Inconsistent(format!("non-finite S21 value at point {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Frequencies in Hz.
    pub fn freqs_hz(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| crate::units::rad_to_hz(w)).collect()
    }

    /// Index of the smallest |S21|.
    pub fn argmin_abs(&self) -> Option<usize> {
        self.s21
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
    }
}

/// Traces of one device at several drive powers, optionally with the truth
/// they were generated from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerSweep {
    pub traces: Vec<ComplexTrace>,
    pub device_id: Option<String>,
    pub truth: Option<crate::model::KerrResonatorParams>,
    pub env: Option<crate::model::BaselineEnv>,
    pub seed: Option<u64>,
    pub plan: Option<crate::synth::SweepPlan>,
}

pub(crate) fn check_strictly_increasing(xs: &[f64]) -> Result<()> {
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Inconsistent(format!(
            "frequencies not strictly increasing at point {}",
            i + 1
        )));
    }
    Ok(())
}

/// Linearly spaced grid, inclusive of both ends.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// Logarithmically spaced grid, inclusive of both ends.
pub fn logspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), points).into_iter().map(f64::exp).collect()
}
