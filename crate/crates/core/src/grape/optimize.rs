use rand::Rng;
use serde::{Deserialize, Serialize};

use super::propagate::{
    mean_fidelity, mean_fidelity_and_gradient, realizations, GateTarget, NoiseRealization, DEFAULT_MAX_SUBSTEP_NS,
};
use super::PulseWaveform;
use crate::error::{Error, Result};
use crate::model::{omega_sh_khz, SystemConstants};
use crate::noise::{optimization_grid, sample_rng, DEFAULT_STATIC_POINTS, DEFAULT_TV_POINTS};

/// Optimizer settings. Amplitudes in kHz, durations in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeConfig {
    pub pieces: usize,
    pub piece_ns: f64,
    pub static_points: Vec<f64>,
    pub tv_points: Vec<f64>,
    /// Relative drive-amplitude errors crossed with the noise grid; the
    /// default `[0]` is the plain dephasing grid.
    pub gain_points: Vec<f64>,
    /// Cap on `|Ω_r + iΩ_i|` per piece.
    pub max_amplitude: f64,
    /// Initial step as a fraction of `max_amplitude`.
    pub step_init: f64,
    pub max_iters: usize,
    /// Stop once the grid-averaged infidelity is at or below this.
    pub target_infidelity: f64,
    pub seed: u64,
    /// Half-width of the uniform initial amplitudes.
    pub init_amplitude: f64,
    pub target: GateTarget,
    pub ascent: Ascent,
}

/// Search direction of the ascent loop. Both use the same monotone
/// backtracking step and projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ascent {
    /// Normalized gradient.
    Steepest,
    /// Polak-Ribière conjugate gradient, restarted whenever the direction
    /// stops ascending.
    #[default]
    ConjugateGradient,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            pieces: 30,
            piece_ns: 50.0,
            static_points: DEFAULT_STATIC_POINTS.to_vec(),
            tv_points: DEFAULT_TV_POINTS.to_vec(),
            gain_points: vec![0.0],
            max_amplitude: 10_000.0,
            step_init: 0.01,
            max_iters: 2000,
            target_infidelity: 1e-4,
            seed: 1,
            init_amplitude: 1000.0,
            target: GateTarget::Cnot,
            ascent: Ascent::default(),
        }
    }
}

impl GrapeConfig {
    /// Checks ranges and, for the CNOT target, that the duration fits the
    /// system's gate time.
    pub fn validate(&self, sys: &SystemConstants) -> Result<()> {
        if self.pieces == 0 {
            return Err(Error::InvalidArgument("pieces must be positive".into()));
        }
        if !(self.piece_ns > 0.0) {
            return Err(Error::InvalidArgument("piece_ns must be positive".into()));
        }
        if !(self.max_amplitude > 0.0) {
            return Err(Error::InvalidArgument("max_amplitude must be positive".into()));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::InvalidArgument("step_init must be positive".into()));
        }
        if !(self.init_amplitude >= 0.0) {
            return Err(Error::InvalidArgument("init_amplitude must be non-negative".into()));
        }
        if self.static_points.is_empty() || self.tv_points.is_empty() || self.gain_points.is_empty() {
            return Err(Error::InvalidArgument("grid axes must be nonempty".into()));
        }
        if self.gain_points.iter().any(|g| !(*g > -1.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument("gain points must be finite and above -1".into()));
        }
        if self.target == GateTarget::Cnot {
            let t = self.pieces as f64 * self.piece_ns;
            if (omega_sh_khz(t) - sys.omega_sh()).abs() > 1e-9 * sys.omega_sh().abs() {
                return Err(Error::InvalidArgument(format!(
                    "pulse duration {t} ns disagrees with the system gate time {} ns",
                    sys.t_gate
                )));
            }
        }
        Ok(())
    }
}

impl GrapeConfig {
    /// Noise grid (x slowest) crossed with the gain axis (fastest).
    pub fn realizations(&self, sys: &SystemConstants) -> Result<Vec<NoiseRealization>> {
        let grid = optimization_grid(&self.static_points, &self.tv_points)?;
        Ok(realizations(&grid, sys.omega_c)
            .into_iter()
            .flat_map(|r| {
                self.gain_points.iter().map(move |&g| NoiseRealization {
                    gain_error: g,
                    ..r
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrapeResult {
    pub pulse: PulseWaveform,
    /// Grid-averaged fidelity after each accepted iteration, starting with the
    /// initial guess.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GrapeResult {
    pub fn final_infidelity(&self) -> f64 {
        1.0 - self.trace.last().copied().unwrap_or(0.0)
    }
}

fn project(amps: &mut [(f64, f64)], cap: f64) {
    for a in amps {
        let r = a.0.hypot(a.1);
        if r > cap {
            a.0 *= cap / r;
            a.1 *= cap / r;
        }
    }
}

/// Drops the outward radial part of the direction on pieces at the cap,
/// where projection would cancel it anyway.
fn tangential(dir: &mut [(f64, f64)], amps: &[(f64, f64)], cap: f64) {
    for (d, a) in dir.iter_mut().zip(amps) {
        let r = a.0.hypot(a.1);
        if r >= cap * (1.0 - 1e-9) {
            let (ux, uy) = (a.0 / r, a.1 / r);
            let radial = d.0 * ux + d.1 * uy;
            if radial > 0.0 {
                d.0 -= radial * ux;
                d.1 -= radial * uy;
            }
        }
    }
}

/// Fidelity, amplitudes and pulse of one trial step.
type Trial = (f64, Vec<(f64, f64)>, PulseWaveform);

/// Gradient ascent with a backtracking step and projection onto the amplitude
/// disc. A step is accepted only if it raises the objective, so the trace is
/// non-decreasing. Failure to reach the target is reported through
/// `converged`, not as an error.
pub fn grape_optimize(cfg: &GrapeConfig, sys: &SystemConstants) -> Result<GrapeResult> {
    cfg.validate(sys)?;
    let noise = cfg.realizations(sys)?;
    let mut rng = sample_rng(cfg.seed, u64::MAX);
    let amps: Vec<(f64, f64)> = (0..cfg.pieces)
        .map(|_| {
            let w = cfg.init_amplitude;
            if w > 0.0 {
                (rng.random_range(-w..=w), rng.random_range(-w..=w))
            } else {
                (0.0, 0.0)
            }
        })
        .collect();
    let mut amps = amps;
    project(&mut amps, cfg.max_amplitude);
    let mut pulse = PulseWaveform::uniform(cfg.piece_ns, &amps, "grape")?;

    let objective = |p: &PulseWaveform| mean_fidelity(p, &noise, sys, cfg.target, DEFAULT_MAX_SUBSTEP_NS);
    let (mut f, mut grad) = mean_fidelity_and_gradient(&pulse, &noise, sys, cfg.target, DEFAULT_MAX_SUBSTEP_NS);
    let mut trace = vec![f];
    let mut eta = cfg.step_init;
    let mut iterations = 0;
    let min_eta = 1e-14;

    let dot = |a: &[(f64, f64)], b: &[(f64, f64)]| a.iter().zip(b).map(|(x, y)| x.0 * y.0 + x.1 * y.1).sum::<f64>();
    let mut dir = grad.clone();
    while iterations < cfg.max_iters && 1.0 - f > cfg.target_infidelity {
        if dot(&dir, &grad) <= 0.0 {
            dir = grad.clone();
        }
        tangential(&mut dir, &amps, cfg.max_amplitude);
        if dot(&dir, &grad) <= 0.0 {
            dir = grad.clone();
            tangential(&mut dir, &amps, cfg.max_amplitude);
        }
        let norm = dot(&dir, &dir).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        // Step length s in kHz along the unit direction; the slope at s = 0 is
        // (g·d)/|d|, used for a quadratic refinement of each trial.
        let slope = dot(&grad, &dir) / norm;
        let try_step = |s: f64| -> Result<Trial> {
            let mut trial: Vec<(f64, f64)> = amps
                .iter()
                .zip(&dir)
                .map(|(a, d)| (a.0 + s / norm * d.0, a.1 + s / norm * d.1))
                .collect();
            project(&mut trial, cfg.max_amplitude);
            let candidate = pulse.with_amplitudes(&trial)?;
            Ok((objective(&candidate), trial, candidate))
        };
        let quadratic = |s: f64, f_s: f64| {
            let curv = f_s - f - slope * s;
            (curv < 0.0).then(|| -slope * s * s / (2.0 * curv))
        };
        let mut accepted = false;
        while eta >= min_eta {
            let s_trial = eta * cfg.max_amplitude;
            let (f_trial, trial, candidate) = try_step(s_trial)?;
            let mut best = (f_trial, trial, candidate, s_trial);
            if let Some(s_q) = quadratic(s_trial, f_trial) {
                let s_q = s_q.clamp(0.1 * s_trial, 4.0 * s_trial);
                let (f_q, t_q, c_q) = try_step(s_q)?;
                if f_q > best.0 {
                    best = (f_q, t_q, c_q, s_q);
                }
            }
            if best.0 > f {
                amps = best.1;
                pulse = best.2;
                accepted = true;
                eta = (best.3 / cfg.max_amplitude * 2.0).min(1.0);
                break;
            }
            eta *= 0.25;
        }
        if !accepted {
            if dir != grad {
                // Retry along the plain gradient before giving up.
                dir = grad.clone();
                eta = cfg.step_init;
                continue;
            }
            break;
        }
        iterations += 1;
        let (f_new, g_new) = mean_fidelity_and_gradient(&pulse, &noise, sys, cfg.target, DEFAULT_MAX_SUBSTEP_NS);
        dir = match cfg.ascent {
            Ascent::Steepest => g_new.clone(),
            Ascent::ConjugateGradient => {
                let diff: Vec<(f64, f64)> = g_new.iter().zip(&grad).map(|(a, b)| (a.0 - b.0, a.1 - b.1)).collect();
                let beta = (dot(&g_new, &diff) / dot(&grad, &grad)).max(0.0);
                g_new.iter().zip(&dir).map(|(g, d)| (g.0 + beta * d.0, g.1 + beta * d.1)).collect()
            }
        };
        f = f_new;
        grad = g_new;
        trace.push(f);
    }
    Ok(GrapeResult {
        converged: 1.0 - f <= cfg.target_infidelity,
        pulse,
        trace,
        iterations,
    })
}

/// Runs `starts` seeds derived from `cfg.seed` and keeps the best result.
pub fn grape_optimize_multistart(cfg: &GrapeConfig, sys: &SystemConstants, starts: usize) -> Result<GrapeResult> {
    if starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let mut best: Option<GrapeResult> = None;
    for k in 0..starts as u64 {
        let run = GrapeConfig {
            seed: cfg.seed.wrapping_add(k),
            ..cfg.clone()
        };
        let r = grape_optimize(&run, sys)?;
        if best.as_ref().is_none_or(|b| r.final_infidelity() < b.final_infidelity()) {
            best = Some(r);
        }
    }
    Ok(best.expect("starts > 0"))
}
