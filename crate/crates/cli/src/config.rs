//! Run configuration: one JSON document with a section per module. Every
//! field has a default, so `{}` is a complete configuration; unknown keys are
//! rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spingate::bench::{clifford_table, DEFAULT_LENGTHS, DEFAULT_RANDOMIZATIONS};
use spingate::grape::{FullModelOptions, GrapeConfig};
use spingate::model::SystemConstants;
use spingate::noise::NoiseModel;
use spingate::relax::RateMatrix;

use crate::error::{CliError, CliResult};

/// Randomized-benchmarking simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbSettings {
    pub lengths: Vec<usize>,
    pub randomizations: usize,
    /// Injected depolarizing decay per Clifford.
    pub p_clifford: f64,
    /// Binomial shots per sequence; `null` gives exact survivals.
    pub shots: Option<u64>,
    /// Clifford-table index of the interleaved gate; `null` runs reference RB only.
    pub interleaved: Option<usize>,
    /// Depolarizing decay of the interleaved gate.
    pub interleaved_p: f64,
}

impl Default for RbSettings {
    fn default() -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            randomizations: DEFAULT_RANDOMIZATIONS,
            p_clifford: 0.9987,
            shots: None,
            interleaved: None,
            interleaved_p: 0.9984,
        }
    }
}

impl RbSettings {
    fn validate(&self) -> Result<(), String> {
        if self.lengths.is_empty() {
            return Err("lengths must not be empty".into());
        }
        if self.randomizations == 0 {
            return Err("randomizations must be positive".into());
        }
        for (name, p) in [("p_clifford", self.p_clifford), ("interleaved_p", self.interleaved_p)] {
            if !(-1.0 / 3.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [-1/3, 1], got {p}"));
            }
        }
        if self.shots == Some(0) {
            return Err("shots must be positive when set".into());
        }
        if let Some(k) = self.interleaved {
            if k >= clifford_table().len() {
                return Err(format!("interleaved must be a Clifford index below 24, got {k}"));
            }
        }
        Ok(())
    }
}

/// Error-budget settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSettings {
    /// Monte Carlo samples for the classical part of the bath entry.
    pub bath_samples: usize,
    /// Relative standard deviation of the shot-to-shot drive amplitude.
    pub amplitude_rel_sigma: f64,
    pub amplitude_samples: usize,
    /// Time constant of the first-order low-pass on the control line, ns.
    pub distortion_tau_ns: f64,
    /// Nuclear-spin decoherence during the gate, taken as given.
    pub nuclear_decoherence: f64,
    /// Evaluate the nine-level model for the RWA/leakage entry.
    pub full_model: bool,
}

impl Default for BudgetSettings {
    fn default() -> Self {
        Self {
            bath_samples: 10_000,
            amplitude_rel_sigma: 0.018,
            amplitude_samples: 2000,
            distortion_tau_ns: 1.0,
            nuclear_decoherence: 7e-6,
            full_model: true,
        }
    }
}

impl BudgetSettings {
    fn validate(&self) -> Result<(), String> {
        if self.bath_samples == 0 || self.amplitude_samples == 0 {
            return Err("sample counts must be positive".into());
        }
        if !(self.amplitude_rel_sigma >= 0.0) || !self.amplitude_rel_sigma.is_finite() {
            return Err(format!(
                "amplitude_rel_sigma must be finite and non-negative, got {}",
                self.amplitude_rel_sigma
            ));
        }
        if !(self.distortion_tau_ns >= 0.0) || !self.distortion_tau_ns.is_finite() {
            return Err(format!(
                "distortion_tau_ns must be finite and non-negative, got {}",
                self.distortion_tau_ns
            ));
        }
        if !(0.0..1.0).contains(&self.nuclear_decoherence) {
            return Err(format!(
                "nuclear_decoherence must lie in [0, 1), got {}",
                self.nuclear_decoherence
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConstants,
    pub noise: NoiseModel,
    pub grape: GrapeConfig,
    pub full_model: FullModelOptions,
    pub rb: RbSettings,
    /// Longitudinal relaxation rates, s⁻¹.
    pub relax: RateMatrix,
    pub budget: BudgetSettings,
    /// Run seed; also drives `grape.seed` once resolved.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConstants::default(),
            noise: NoiseModel::default(),
            grape: GrapeConfig::default(),
            full_model: FullModelOptions::default(),
            rb: RbSettings::default(),
            relax: RateMatrix::default(),
            budget: BudgetSettings::default(),
            seed: 1,
            output_dir: None,
        }
    }
}

fn section<E: std::fmt::Display>(name: &str, r: Result<(), E>) -> CliResult<()> {
    r.map_err(|e| CliError::Config(format!("{name}: {e}")))
}

impl RunConfig {
    /// Parses JSON text. Errors carry the offending key path plus line and
    /// column.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        section("system", self.system.validate())?;
        section("noise", self.noise.validate())?;
        if self.noise.omega_c != self.system.omega_c {
            return Err(CliError::Config(format!(
                "noise.omega_c ({}) must equal system.omega_c ({})",
                self.noise.omega_c, self.system.omega_c
            )));
        }
        section("grape", self.grape.validate(&self.system))?;
        section("rb", self.rb.validate())?;
        section("relax", self.relax.validate())?;
        section("budget", self.budget.validate())?;
        if !(self.full_model.step_ns > 0.0) {
            return Err(CliError::Config(format!(
                "full_model: step_ns must be positive, got {}",
                self.full_model.step_ns
            )));
        }
        Ok(())
    }

    /// Applies the seed override and copies the run seed into `grape.seed`.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Self {
        if let Some(s) = seed_override {
            self.seed = s;
        }
        self.grape.seed = self.seed;
        self
    }

    /// Pretty JSON with a trailing newline; the form echoed to disk.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of [`Self::to_json`], lowercase hex.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
