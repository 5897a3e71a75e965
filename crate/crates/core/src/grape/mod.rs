//! Shaped pulses: representation, the noise-sampled GRAPE objective and its
//! exact gradient, the optimizer, and evaluation instruments.

mod bath;
mod evaluate;
mod filter;
mod full;
mod optimize;
mod propagate;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bath::{evaluate_quantum_bath, BathEvaluation, NuclearBranch};
pub use evaluate::{
    amplitude_instability_error, apply_distortion, apply_distortion_with_resolution, evaluate_sampled_fidelity,
    monte_carlo_infidelity, scan_noise_frequency, EvaluationReport, MonteCarloEstimate,
};
pub use filter::{filter_function_first_order, first_order_infidelity, noise_susceptibility};
pub use full::{evaluate_full_model, FullModelEvaluation, FullModelOptions};
pub use optimize::{grape_optimize, grape_optimize_multistart, Ascent, GrapeConfig, GrapeResult};
pub use propagate::{
    fidelity_gradient, gate_fidelity, propagator, GateTarget, NoiseRealization, DEFAULT_MAX_SUBSTEP_NS,
};

/// One constant-amplitude segment of a shaped pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePiece {
    /// ns.
    pub duration: f64,
    /// In-phase amplitude, kHz.
    pub omega_r: f64,
    /// Quadrature amplitude, kHz.
    pub omega_i: f64,
}

/// Piecewise-constant complex drive envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseWaveform {
    pieces: Vec<PulsePiece>,
    pub label: String,
}

impl PulseWaveform {
    pub fn new(pieces: Vec<PulsePiece>, label: impl Into<String>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument("a pulse needs at least one piece".into()));
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.duration > 0.0) || !p.duration.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "piece {k} has non-positive duration {}",
                    p.duration
                )));
            }
            if !p.omega_r.is_finite() || !p.omega_i.is_finite() {
                return Err(Error::InvalidArgument(format!("piece {k} has a non-finite amplitude")));
            }
        }
        Ok(Self {
            pieces,
            label: label.into(),
        })
    }

    /// Equal-length pieces from amplitude pairs.
    pub fn uniform(piece_ns: f64, amplitudes: &[(f64, f64)], label: impl Into<String>) -> Result<Self> {
        Self::new(
            amplitudes
                .iter()
                .map(|&(omega_r, omega_i)| PulsePiece {
                    duration: piece_ns,
                    omega_r,
                    omega_i,
                })
                .collect(),
            label,
        )
    }

    /// All-zero envelope.
    pub fn zero(pieces: usize, piece_ns: f64) -> Result<Self> {
        Self::uniform(piece_ns, &vec![(0.0, 0.0); pieces], "zero")
    }

    pub fn pieces(&self) -> &[PulsePiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// ns.
    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    pub fn amplitudes(&self) -> Vec<(f64, f64)> {
        self.pieces.iter().map(|p| (p.omega_r, p.omega_i)).collect()
    }

    /// Same timing with new amplitudes.
    pub fn with_amplitudes(&self, amplitudes: &[(f64, f64)]) -> Result<Self> {
        if amplitudes.len() != self.pieces.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pieces.len(),
                found: amplitudes.len(),
            });
        }
        let pieces = self
            .pieces
            .iter()
            .zip(amplitudes)
            .map(|(p, &(omega_r, omega_i))| PulsePiece {
                duration: p.duration,
                omega_r,
                omega_i,
            })
            .collect();
        Self::new(pieces, self.label.clone())
    }

    /// Every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| PulsePiece {
                    duration: p.duration,
                    omega_r: p.omega_r * factor,
                    omega_i: p.omega_i * factor,
                })
                .collect(),
            label: self.label.clone(),
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.omega_r.hypot(p.omega_i))
            .fold(0.0, f64::max)
    }

    /// Writes `index,duration_ns,omega_r_khz,omega_i_khz` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["index", "duration_ns", "omega_r_khz", "omega_i_khz"])?;
        for (k, p) in self.pieces.iter().enumerate() {
            w.write_record([
                k.to_string(),
                format!("{:?}", p.duration),
                format!("{:?}", p.omega_r),
                format!("{:?}", p.omega_i),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            index: usize,
            duration_ns: f64,
            omega_r_khz: f64,
            omega_i_khz: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["index", "duration_ns", "omega_r_khz", "omega_i_khz"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "pulse CSV header must be {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut pieces = Vec::new();
        for (k, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.index != k {
                return Err(Error::Parse(format!("pulse CSV row {k} has index {}", row.index)));
            }
            pieces.push(PulsePiece {
                duration: row.duration_ns,
                omega_r: row.omega_r_khz,
                omega_i: row.omega_i_khz,
            });
        }
        Self::new(pieces, label)
    }
}

/// Single rectangular pulse realizing the gate without shaping.
///
/// The duration `√3/(2A)` and amplitude `1/(2t)` make the `m_I = 0` block a π
/// rotation while the block detuned by `A` completes one full cycle. The
/// rotation is about `−x`: with the frame shift both blocks then carry the
/// same global sign, which the `+x` rotation would not.
pub fn primitive_pulse(a_par_eff: f64) -> Result<PulseWaveform> {
    if !(a_par_eff > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "effective coupling must be positive, got {a_par_eff}"
        )));
    }
    let t_us = 3f64.sqrt() / (2.0 * a_par_eff * 1e-3);
    let omega = 1.0 / (2.0 * t_us) * 1e3;
    PulseWaveform::new(
        vec![PulsePiece {
            duration: t_us * 1e3,
            omega_r: -omega,
            omega_i: 0.0,
        }],
        "primitive",
    )
}
