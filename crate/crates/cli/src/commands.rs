//! Subcommand bodies. Each reads its inputs, writes its artifacts through
//! [`Run`] and leaves the manifest to the caller.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;
use spingate::bench::{
    clifford_table, compile_rb_experiment, fit_survival_points, irb_gate_fidelity, sequence_survivals,
    summarize_survivals, write_rb_csv, GateChannels, KrausChannel, RbDecayFit, SurvivalPoint,
};
use spingate::ddspec::{dd_coherence_oracle_joint, fit_carbon_dip, multi_spin_coherence, DDSequence};
use spingate::grape::{
    evaluate_full_model, evaluate_quantum_bath, evaluate_sampled_fidelity, filter_function_first_order,
    first_order_infidelity, grape_optimize_multistart, monte_carlo_infidelity, noise_susceptibility,
    scan_noise_frequency, NuclearBranch, PulseWaveform,
};
use spingate::relax::{fit_rate_matrix, t1_gate_error, Level, PopulationCurve};

use crate::budget::{classical_background, error_budget, noise_free_infidelity};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_text, Run};

pub fn read_pulse(path: &Path) -> CliResult<PulseWaveform> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    PulseWaveform::read_csv(file, label).map_err(|e| CliError::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| CliError::io(path, e))
}

pub fn optimize(run: &mut Run, cfg: &RunConfig, out: &Option<PathBuf>, starts: usize) -> CliResult<()> {
    if starts == 0 {
        return Err(CliError::Usage("--starts must be positive".into()));
    }
    let result = grape_optimize_multistart(&cfg.grape, &cfg.system, starts)?;
    let mut bytes = Vec::new();
    result.pulse.write_csv(&mut bytes)?;
    run.write(&run.path_or(out, "pulse.csv"), &bytes)?;
    let trace = json!({
        "objective": "grid-averaged gate fidelity",
        "grid_size": cfg.grape.realizations(&cfg.system)?.len(),
        "starts": starts,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_infidelity": result.final_infidelity(),
        "trace": result.trace,
    });
    run.write_json(&run.path("objective_trace.json"), &trace)
}

pub fn evaluate(run: &mut Run, cfg: &RunConfig, pulse_path: &Path, samples: usize, out: &Option<PathBuf>) -> CliResult<()> {
    let pulse = read_pulse(pulse_path)?;
    let sys = &cfg.system;
    let grid: Vec<_> = spingate::noise::optimization_grid(&cfg.grape.static_points, &cfg.grape.tv_points)?;
    let grid_infidelity = 1.0 - evaluate_sampled_fidelity(&pulse, &grid, sys)?;
    let background = monte_carlo_infidelity(&pulse, &classical_background(cfg), samples, cfg.seed, sys)?;
    let classicized = monte_carlo_infidelity(&pulse, &cfg.noise.classicized(), samples, cfg.seed, sys)?;
    let mut bath = Vec::new();
    if !cfg.noise.carbons.is_empty() {
        for branch in [NuclearBranch::Not, NuclearBranch::Identity] {
            let b = evaluate_quantum_bath(&pulse, &cfg.noise.carbons, sys, branch)?;
            bath.push(json!({
                "branch": branch,
                "fidelity": b.fidelity,
                "final_purity": b.final_purity(),
                "purity_trace": b.purity_trace,
            }));
        }
    }
    let full = if cfg.budget.full_model {
        Some(evaluate_full_model(&pulse, sys, &cfg.full_model)?)
    } else {
        None
    };
    let report = json!({
        "pulse": {
            "pieces": pulse.len(),
            "duration_ns": pulse.total_duration(),
            "max_amplitude_khz": pulse.max_amplitude(),
        },
        "noise_free_infidelity": noise_free_infidelity(&pulse, cfg)?,
        "grid_infidelity": grid_infidelity,
        "classical_background": background,
        "classicized": classicized,
        "quantum_bath": bath,
        "full_model": full,
    });
    run.write_json(&run.path_or(out, "evaluation.json"), &report)
}

pub struct ScanArgs<'a> {
    pub pulse: &'a Path,
    pub sigma_khz: f64,
    pub n: usize,
    pub omegas: &'a [f64],
}

pub fn scan(run: &mut Run, cfg: &RunConfig, a: ScanArgs<'_>, out: &Option<PathBuf>) -> CliResult<()> {
    let pulse = read_pulse(a.pulse)?;
    let rows = scan_noise_frequency(&pulse, a.omegas, a.sigma_khz, a.n, cfg.seed, &cfg.system)?;
    let text = csv_text(&["omega_khz", "infidelity"], rows.into_iter().map(|(w, e)| vec![w, e]));
    run.write(&run.path_or(out, "scan.csv"), text.as_bytes())
}

pub fn filter(
    run: &mut Run,
    cfg: &RunConfig,
    pulse_path: &Path,
    omegas: &[f64],
    sigma_khz: f64,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    if !(sigma_khz >= 0.0) {
        return Err(CliError::Usage(format!("--sigma-khz must be non-negative, got {sigma_khz}")));
    }
    let pulse = read_pulse(pulse_path)?;
    let sys = &cfg.system;
    let rows = omegas.iter().map(|&w| {
        vec![
            w,
            noise_susceptibility(&pulse, w, sys),
            filter_function_first_order(&pulse, w, sys),
            first_order_infidelity(&pulse, w, sigma_khz, sys),
        ]
    });
    let text = csv_text(
        &["omega_khz", "susceptibility_ns2", "filter_first_order", "first_order_infidelity"],
        rows,
    );
    run.write(&run.path_or(out, "filter.csv"), text.as_bytes())
}

pub fn dd_sim(
    run: &mut Run,
    cfg: &RunConfig,
    n_pulses: usize,
    taus: &[f64],
    oracle: bool,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let spins = &cfg.noise.carbons;
    let omega_c = cfg.system.omega_c;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let seq = DDSequence::new(n_pulses, tau)?;
        let mut row = vec![tau, multi_spin_coherence(spins, &seq, omega_c)];
        if oracle {
            row.push(dd_coherence_oracle_joint(spins, &seq, omega_c));
        }
        rows.push(row);
    }
    let header: &[&str] = if oracle {
        &["tau_us", "coherence", "coherence_oracle"]
    } else {
        &["tau_us", "coherence"]
    };
    run.write(&run.path_or(out, "dd.csv"), csv_text(header, rows).as_bytes())
}

#[derive(Deserialize)]
struct CoherenceRow {
    tau_us: f64,
    coherence: f64,
}

pub fn dd_fit(
    run: &mut Run,
    cfg: &RunConfig,
    data: &Path,
    n_pulses: usize,
    orders: &[usize],
    guess: (f64, f64),
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let rows: Vec<CoherenceRow> = read_rows(data)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.tau_us, r.coherence)).collect();
    let fit = fit_carbon_dip(&points, n_pulses, orders, cfg.system.omega_c, guess)?;
    let (se_zz, se_perp) = fit.std_errors();
    let report = json!({
        "a_zz_khz": fit.a_zz,
        "a_perp_khz": fit.a_perp,
        "std_errors_khz": [se_zz, se_perp],
        "covariance_khz2": fit.covariance,
        "residual_rms": fit.residual_rms,
        "n_pulses": n_pulses,
        "points": points.len(),
    });
    run.write_json(&run.path_or(out, "dd_fit.json"), &report)
}

fn fit_json(fit: &RbDecayFit, points: &[SurvivalPoint]) -> serde_json::Value {
    json!({
        "fit": fit,
        "fidelity": fit.fidelity(),
        "fidelity_stderr": fit.fidelity_stderr(),
        "lengths": points.iter().map(|p| p.m).collect::<Vec<_>>(),
    })
}

pub fn rb(run: &mut Run, cfg: &RunConfig, out: &Option<PathBuf>) -> CliResult<()> {
    let s = &cfg.rb;
    let mut channels = GateChannels::clifford_depolarizing(s.p_clifford)?;
    if let Some(k) = s.interleaved {
        channels = channels.with_interleaved(KrausChannel::depolarized(&clifford_table()[k].matrix, s.interleaved_p)?);
    }
    let simulate = |interleaved: Option<usize>, shot_seed: u64| -> CliResult<Vec<SurvivalPoint>> {
        let seqs = compile_rb_experiment(&s.lengths, s.randomizations, interleaved, cfg.seed)?;
        let surv = sequence_survivals(&seqs, &channels, s.shots, shot_seed)?;
        Ok(summarize_survivals(&seqs, &surv))
    };
    let csv_bytes = |points: &[SurvivalPoint]| -> CliResult<Vec<u8>> {
        let mut bytes = Vec::new();
        write_rb_csv(points, &mut bytes)?;
        Ok(bytes)
    };

    let reference = simulate(None, cfg.seed)?;
    run.write(&run.path_or(out, "rb.csv"), &csv_bytes(&reference)?)?;
    let ref_fit = fit_survival_points(&reference)?;
    let mut report = json!({
        "injected": {"p_clifford": s.p_clifford, "fidelity": 1.0 - (1.0 - s.p_clifford) / 2.0},
        "reference": fit_json(&ref_fit, &reference),
    });
    if let Some(k) = s.interleaved {
        // Separate shot-noise streams so the two curves are independent.
        let interleaved = simulate(Some(k), cfg.seed.wrapping_add(1))?;
        run.write(&run.path("rb_interleaved.csv"), &csv_bytes(&interleaved)?)?;
        let int_fit = fit_survival_points(&interleaved)?;
        report["interleaved"] = fit_json(&int_fit, &interleaved);
        report["irb"] = json!({
            "clifford_index": k,
            "injected_p": s.interleaved_p,
            "injected_fidelity": 1.0 - (1.0 - s.interleaved_p) / 2.0,
            "estimate": irb_gate_fidelity(&ref_fit, &int_fit)?,
        });
    }
    run.write_json(&run.path("rb_fit.json"), &report)
}

#[derive(Deserialize)]
struct PopulationRow {
    initial: String,
    readout: String,
    t_ms: f64,
    population: f64,
}

/// Groups rows into curves keyed by `(initial, readout)`, points in file order.
fn population_curves(rows: Vec<PopulationRow>) -> CliResult<Vec<PopulationCurve>> {
    let mut curves: BTreeMap<(usize, usize), PopulationCurve> = BTreeMap::new();
    for r in rows {
        let (initial, readout) = (Level::parse(&r.initial)?, Level::parse(&r.readout)?);
        curves
            .entry((initial.index(), readout.index()))
            .or_insert_with(|| PopulationCurve {
                initial,
                readout,
                points: Vec::new(),
            })
            .points
            .push((r.t_ms, r.population));
    }
    Ok(curves.into_values().collect())
}

pub fn t1_fit(
    run: &mut Run,
    cfg: &RunConfig,
    data: &Path,
    nuisance: bool,
    t_gate_ns: Option<f64>,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let curves = population_curves(read_rows(data)?)?;
    let fit = fit_rate_matrix(&curves, nuisance)?;
    let t_gate = t_gate_ns.unwrap_or(cfg.system.t_gate);
    let report = json!({
        "rates_per_s": fit.rates,
        "std_errors_per_s": fit.std_errors,
        "covariance_per_s2": fit.covariance,
        "clamped": fit.clamped,
        "nuisance": fit.nuisance,
        "residual_rms": fit.residual_rms,
        "t_gate_ns": t_gate,
        "t1_gate_error": t1_gate_error(&fit.rates, t_gate),
    });
    run.write_json(&run.path_or(out, "t1_fit.json"), &report)
}

pub fn budget(run: &mut Run, cfg: &RunConfig, pulse_path: &Path, out: &Option<PathBuf>) -> CliResult<()> {
    let pulse = read_pulse(pulse_path)?;
    let b = error_budget(&pulse, cfg)?;
    run.write_json(&run.path_or(out, "budget.json"), &b)
}
