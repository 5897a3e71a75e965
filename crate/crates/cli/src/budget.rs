//! Residual-error budget of a pulse. Each entry is the infidelity one error
//! source adds on top of the pulse's own noise-free infidelity, clamped at
//! zero; entries compose as `1 − total = Π(1 − eᵢ)`.

use serde::{Deserialize, Serialize};
use spingate::grape::{
    amplitude_instability_error, apply_distortion, evaluate_full_model, evaluate_quantum_bath,
    evaluate_sampled_fidelity, monte_carlo_infidelity, NuclearBranch, PulseWaveform,
};
use spingate::noise::{NoiseModel, NoiseSample};
use spingate::relax::t1_gate_error;

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub source: String,
    pub error: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub entries: Vec<BudgetEntry>,
    pub total: f64,
    pub composition: String,
}

impl ErrorBudget {
    pub fn new(entries: Vec<BudgetEntry>) -> Self {
        let total = combine(entries.iter().map(|e| e.error));
        Self {
            entries,
            total,
            composition: "1 - prod(1 - error)".into(),
        }
    }
}

/// `1 − Π(1 − eᵢ)`.
pub fn combine(errors: impl IntoIterator<Item = f64>) -> f64 {
    1.0 - errors.into_iter().map(|e| 1.0 - e).product::<f64>()
}

fn entry(source: &str, error: f64, method: impl Into<String>) -> BudgetEntry {
    BudgetEntry {
        source: source.into(),
        error: error.max(0.0),
        method: method.into(),
    }
}

pub fn noise_free_infidelity(pulse: &PulseWaveform, cfg: &RunConfig) -> CliResult<f64> {
    Ok(1.0 - evaluate_sampled_fidelity(pulse, &[NoiseSample::ZERO], &cfg.system)?)
}

/// The classical part of the noise model: the Gaussian background without
/// the explicit carbons.
pub fn classical_background(cfg: &RunConfig) -> NoiseModel {
    NoiseModel {
        carbons: Vec::new(),
        ..cfg.noise.clone()
    }
}

/// Assembles the budget of `pulse` under `cfg`.
pub fn error_budget(pulse: &PulseWaveform, cfg: &RunConfig) -> CliResult<ErrorBudget> {
    let sys = &cfg.system;
    let b = &cfg.budget;
    let e0 = noise_free_infidelity(pulse, cfg)?;
    let mut entries = vec![entry(
        "control",
        e0,
        "noise-free infidelity of the pulse in the four-level model",
    )];

    // Bath: explicit carbons propagated quantum mechanically in both nuclear
    // branches, combined with the classical background.
    let quantum = if cfg.noise.carbons.is_empty() {
        0.0
    } else {
        let mut f = 0.0;
        for branch in [NuclearBranch::Not, NuclearBranch::Identity] {
            f += evaluate_quantum_bath(pulse, &cfg.noise.carbons, sys, branch)?.fidelity;
        }
        1.0 - f / 2.0 - e0
    };
    let background = classical_background(cfg);
    let classical = if background.sigma_static == 0.0 && background.sigma_x == 0.0 {
        0.0
    } else {
        monte_carlo_infidelity(pulse, &background, b.bath_samples, cfg.seed, sys)?.mean_infidelity - e0
    };
    entries.push(entry(
        "bath",
        combine([quantum.max(0.0), classical.max(0.0)]),
        format!(
            "{} explicit carbons (exact joint evolution, both nuclear branches) combined with \
             Monte Carlo over the classical background ({} samples)",
            cfg.noise.carbons.len(),
            b.bath_samples
        ),
    ));

    entries.push(entry(
        "relaxation",
        t1_gate_error(&cfg.relax, pulse.total_duration()),
        "linear T1 error of the three-level rate matrix over the pulse duration",
    ));

    let amplitude = if b.amplitude_rel_sigma == 0.0 {
        0.0
    } else {
        amplitude_instability_error(pulse, b.amplitude_rel_sigma, b.amplitude_samples, cfg.seed, sys)? - e0
    };
    entries.push(entry(
        "amplitude",
        amplitude,
        format!(
            "shot-to-shot drive amplitude scaling, rel_sigma {} ({} samples)",
            b.amplitude_rel_sigma, b.amplitude_samples
        ),
    ));

    let (rwa, rwa_method) = if b.full_model {
        let full = evaluate_full_model(pulse, sys, &cfg.full_model)?;
        (
            full.approximation_error,
            format!(
                "nine-level lab-frame model minus the four-level RWA model (leakage {:.3e})",
                full.leakage
            ),
        )
    } else {
        (0.0, "not evaluated (budget.full_model = false)".to_string())
    };
    entries.push(entry("rwa_leakage", rwa, rwa_method));

    let distortion = if b.distortion_tau_ns == 0.0 {
        0.0
    } else {
        noise_free_infidelity(&apply_distortion(pulse, b.distortion_tau_ns)?, cfg)? - e0
    };
    entries.push(entry(
        "distortion",
        distortion,
        format!("first-order low-pass with time constant {} ns", b.distortion_tau_ns),
    ));

    entries.push(entry(
        "nuclear_decoherence",
        b.nuclear_decoherence,
        "configured constant (budget.nuclear_decoherence), not simulated",
    ));

    Ok(ErrorBudget::new(entries))
}
