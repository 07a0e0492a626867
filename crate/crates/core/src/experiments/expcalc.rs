//! Laboratory-units calculator for dipolar-atom implementations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpcalcInput {
    /// Dipolar pair frequency in Hz.
    pub pair_frequency_hz: f64,
    /// Coherence time in seconds.
    pub coherence_time_s: f64,
    pub sites: usize,
    /// Conversion from `J_z` units to the reported sensitivity unit.
    pub unit_scale: f64,
}

impl ExpcalcInput {
    /// Dysprosium: 60 Hz pair frequency, 0.1 s coherence.
    pub fn dysprosium(sites: usize) -> Self {
        ExpcalcInput { pair_frequency_hz: 60.0, coherence_time_s: 0.1, sites, unit_scale: 1.0 }
    }

    /// Erbium: 29.4 Hz pair frequency, 0.1 s coherence.
    pub fn erbium(sites: usize) -> Self {
        ExpcalcInput { pair_frequency_hz: 29.4, ..Self::dysprosium(sites) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpcalcRecord {
    pub t2_ms: f64,
    /// Drive period; equal to `t2`.
    pub period_ms: f64,
    pub n_max: usize,
    /// Repetitions per second, `1/(n_max T)`.
    pub shots_per_s: f64,
    /// `unit_scale / sqrt(M n² L²(L+1)²/π²)`.
    pub sensitivity: f64,
    /// Coefficient `c` of `c/L²` with `L²(L+1)² ≈ L⁴`.
    pub sensitivity_coefficient: f64,
}

pub fn expcalc(input: &ExpcalcInput) -> Result<ExpcalcRecord> {
    let ExpcalcInput { pair_frequency_hz: f, coherence_time_s: t_coh, sites, unit_scale } = *input;
    if !(f > 0.0 && f.is_finite()) || !(t_coh > 0.0 && t_coh.is_finite()) || sites == 0 {
        return Err(Error::invalid("expcalc needs positive frequency, coherence time and L"));
    }
    if !(unit_scale > 0.0 && unit_scale.is_finite()) {
        return Err(Error::invalid("unit scale must be positive"));
    }
    let t2_ms = 1e3 / (2.0 * PI * f);
    let period_ms = t2_ms;
    let n_max = (t_coh * 1e3 / period_ms).floor() as usize;
    if n_max == 0 {
        return Err(Error::invalid("coherence time is shorter than one drive period"));
    }
    let n = n_max as f64;
    let shots_per_s = 1.0 / (n * period_ms * 1e-3);
    let l = sites as f64;
    let fisher_rate = shots_per_s * n * n * l * l * (l + 1.0) * (l + 1.0) / (PI * PI);
    let sensitivity = unit_scale / fisher_rate.sqrt();
    let sensitivity_coefficient = unit_scale * PI / (n * shots_per_s.sqrt());
    Ok(ExpcalcRecord { t2_ms, period_ms, n_max, shots_per_s, sensitivity, sensitivity_coefficient })
}

/// Unit scale that makes `sensitivity_coefficient` equal `target`.
pub fn calibrate_unit_scale(input: &ExpcalcInput, target: f64) -> Result<f64> {
    let raw = expcalc(&ExpcalcInput { unit_scale: 1.0, ..*input })?;
    Ok(target / raw.sensitivity_coefficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dysprosium_numbers() {
        let r = expcalc(&ExpcalcInput::dysprosium(7)).unwrap();
        assert!((r.t2_ms - 2.6526).abs() < 1e-4);
        assert_eq!(r.n_max, 37);
        let l: f64 = 7.0;
        let quartic = r.sensitivity_coefficient / (l * l);
        assert!(r.sensitivity < quartic);
    }

    #[test]
    fn calibration_hits_target() {
        let dy = ExpcalcInput::dysprosium(5);
        let scale = calibrate_unit_scale(&dy, 0.027).unwrap();
        let r = expcalc(&ExpcalcInput { unit_scale: scale, ..dy }).unwrap();
        assert!((r.sensitivity_coefficient - 0.027).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(expcalc(&ExpcalcInput { pair_frequency_hz: 0.0, ..ExpcalcInput::dysprosium(3) }).is_err());
        assert!(expcalc(&ExpcalcInput { coherence_time_s: -1.0, ..ExpcalcInput::dysprosium(3) }).is_err());
        assert!(expcalc(&ExpcalcInput::dysprosium(0)).is_err());
        assert!(expcalc(&ExpcalcInput { coherence_time_s: 1e-4, ..ExpcalcInput::dysprosium(3) }).is_err());
    }
}
