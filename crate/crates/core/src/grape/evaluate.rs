use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::propagate::{
    mean_fidelity, per_realization_fidelity, realizations, GateTarget, NoiseRealization, DEFAULT_MAX_SUBSTEP_NS,
};
use super::{PulsePiece, PulseWaveform};
use crate::error::{Error, Result};
use crate::model::SystemConstants;
use crate::noise::{sample_noise, sample_rng, NoiseModel, NoiseSample};

/// Summary of a pulse evaluation, serialized as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mean_infidelity: f64,
    pub per_sample: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<f64>,
}

impl EvaluationReport {
    /// From per-sample infidelities, clamped into `[0, 1]` against roundoff.
    pub fn from_infidelities(per_sample: Vec<f64>) -> Self {
        let per_sample: Vec<f64> = per_sample.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let mean = per_sample.iter().sum::<f64>() / per_sample.len().max(1) as f64;
        Self {
            mean_infidelity: mean,
            per_sample,
            purity_final: None,
            leakage: None,
        }
    }
}

/// Mean infidelity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean_infidelity: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    fn from_values(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean_infidelity: mean,
            std_error: (var / n).sqrt(),
            samples: v.len(),
        }
    }
}

/// Sample-averaged CNOT fidelity with noise at `sys.omega_c`.
pub fn evaluate_sampled_fidelity(pulse: &PulseWaveform, samples: &[NoiseSample], sys: &SystemConstants) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("at least one noise sample is required".into()));
    }
    let noise = realizations(samples, sys.omega_c);
    Ok(mean_fidelity(pulse, &noise, sys, GateTarget::Cnot, DEFAULT_MAX_SUBSTEP_NS))
}

/// Monte Carlo CNOT infidelity under the Gaussian part of `model` (carbons are
/// ignored; pass a classicized model to include them).
pub fn monte_carlo_infidelity(
    pulse: &PulseWaveform,
    model: &NoiseModel,
    n_samples: usize,
    seed: u64,
    sys: &SystemConstants,
) -> Result<MonteCarloEstimate> {
    let samples = sample_noise(model, seed, n_samples)?;
    let noise = realizations(&samples, model.omega_c);
    let f = per_realization_fidelity(pulse, &noise, sys, GateTarget::Cnot, DEFAULT_MAX_SUBSTEP_NS);
    let infid: Vec<f64> = f.iter().map(|v| 1.0 - v).collect();
    Ok(MonteCarloEstimate::from_values(&infid))
}

/// Mean infidelity under `η(t) = X′cos ωt + Y′sin ωt` with `X′, Y′ ~ N(0, σ²)`
/// for each `ω` in `omegas` (kHz). The same draws are reused at every `ω`.
pub fn scan_noise_frequency(
    pulse: &PulseWaveform,
    omegas: &[f64],
    sigma: f64,
    n_samples: usize,
    seed: u64,
    sys: &SystemConstants,
) -> Result<Vec<(f64, f64)>> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("n_samples must be at least 100, got {n_samples}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    let model = NoiseModel::new(0.0, sigma, sigma, 0.0, Vec::new())?;
    let samples = sample_noise(&model, seed, n_samples)?;
    Ok(omegas
        .iter()
        .map(|&omega| {
            let noise = realizations(&samples, omega);
            (omega, 1.0 - mean_fidelity(pulse, &noise, sys, GateTarget::Cnot, DEFAULT_MAX_SUBSTEP_NS))
        })
        .collect())
}

/// Mean noise-free infidelity when every amplitude is scaled by a common
/// `1 + g` per shot, `g ~ N(0, rel_sigma²)`.
pub fn amplitude_instability_error(
    pulse: &PulseWaveform,
    rel_sigma: f64,
    n_samples: usize,
    seed: u64,
    sys: &SystemConstants,
) -> Result<f64> {
    if !(rel_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("rel_sigma must be non-negative, got {rel_sigma}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let normal = Normal::new(0.0, rel_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise: Vec<NoiseRealization> = (0..n_samples as u64)
        .map(|i| NoiseRealization {
            gain_error: normal.sample(&mut sample_rng(seed, i)),
            ..NoiseRealization::NONE
        })
        .collect();
    Ok(1.0 - mean_fidelity(pulse, &noise, sys, GateTarget::Cnot, DEFAULT_MAX_SUBSTEP_NS))
}

/// First-order low-pass response `τ ẏ = x − y` of the envelope, starting from
/// rest and re-sampled at 1 ns. The output is truncated at the pulse end.
pub fn apply_distortion(pulse: &PulseWaveform, time_constant: f64) -> Result<PulseWaveform> {
    apply_distortion_with_resolution(pulse, time_constant, 1.0)
}

/// As [`apply_distortion`] with sub-pieces no longer than `resolution_ns`;
/// each sub-piece carries the exact average of the response over its span.
pub fn apply_distortion_with_resolution(
    pulse: &PulseWaveform,
    time_constant: f64,
    resolution_ns: f64,
) -> Result<PulseWaveform> {
    if !(time_constant >= 0.0) || !time_constant.is_finite() {
        return Err(Error::InvalidArgument(format!("time constant must be non-negative, got {time_constant}")));
    }
    if !(resolution_ns > 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    if time_constant == 0.0 {
        return Ok(pulse.clone());
    }
    let tau = time_constant;
    let mut y = (0.0, 0.0);
    let mut out = Vec::new();
    for p in pulse.pieces() {
        let n = (p.duration / resolution_ns - 1e-9).ceil().max(1.0) as usize;
        let h = p.duration / n as f64;
        let decay = (-h / tau).exp();
        // Mean of e^{−t/τ} over [0, h].
        let mean_decay = tau / h * (-(-h / tau).exp_m1());
        let x = (p.omega_r, p.omega_i);
        for _ in 0..n {
            out.push(PulsePiece {
                duration: h,
                omega_r: x.0 + (y.0 - x.0) * mean_decay,
                omega_i: x.1 + (y.1 - x.1) * mean_decay,
            });
            y = (x.0 + (y.0 - x.0) * decay, x.1 + (y.1 - x.1) * decay);
        }
    }
    PulseWaveform::new(out, format!("{} (distorted, tau {time_constant} ns)", pulse.label))
}
