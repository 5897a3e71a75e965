//! `spingate`: configuration-driven front end to the gate-design library.
//!
//! Exit codes: 0 success, 1 domain or file error, 2 usage or configuration
//! error. Errors go to stderr as one JSON object.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod budget;
mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{parse_range, Run};

/// Environment variable naming the output directory when neither
/// `--out-dir` nor `output_dir` in the config is given.
const OUT_DIR_ENV: &str = "SPINGATE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "spingate-out";

#[derive(Debug, Parser)]
#[command(
    name = "spingate",
    version,
    about = "Shaped-pulse CNOT design and evaluation for an electron-nuclear spin pair",
    after_help = "Frequencies are kHz, pulse times ns, DD intervals μs.\n\
                  Ranges use start:stop:step (stop included when it falls on the grid), \
                  e.g. --omegas 0:1200:5.\n\
                  Output directory: --out-dir, else output_dir from the config, else $SPINGATE_OUT_DIR, \
                  else ./spingate-out."
)]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for outputs, the resolved config and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Parsed `start:stop:step` grid.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn range(s: &str) -> Result<Grid, String> {
    parse_range(s).map(Grid)
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimizes a pulse on the configured noise grid.
    Optimize {
        /// Pulse CSV path (default <out-dir>/pulse.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Independent starts; the best result is kept.
        #[arg(long, default_value_t = 1)]
        starts: usize,
    },
    /// Evaluates a pulse: grid, classical Monte Carlo, quantum bath, nine-level model.
    Evaluate {
        #[arg(long)]
        pulse: PathBuf,
        /// Monte Carlo samples.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infidelity under quadrature noise of fixed strength versus its frequency.
    Scan {
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long, default_value_t = 70.0)]
        sigma_khz: f64,
        /// Noise samples (at least 100).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Noise frequencies, kHz, as start:stop:step.
        #[arg(long, value_parser = range, default_value = "0:1200:5")]
        omegas: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order filter function of a pulse.
    Filter {
        #[arg(long)]
        pulse: PathBuf,
        /// Frequencies, kHz, as start:stop:step.
        #[arg(long, value_parser = range, default_value = "0:1200:5")]
        omegas: Grid,
        /// Noise strength for the first-order infidelity column.
        #[arg(long, default_value_t = 5.0)]
        sigma_khz: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dynamical-decoupling coherence of the configured carbons.
    DdSim {
        #[arg(long, default_value_t = 16)]
        n_pulses: usize,
        /// Pulse intervals, μs, as start:stop:step.
        #[arg(long, value_parser = range, default_value = "1:30:0.01")]
        taus: Grid,
        /// Adds the brute-force joint-evolution column.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits one carbon's couplings to DD data (CSV tau_us,coherence).
    DdFit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 16)]
        n_pulses: usize,
        /// Resonance orders seeding the fit, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 20.0)]
        guess_azz_khz: f64,
        #[arg(long, default_value_t = 20.0)]
        guess_aperp_khz: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated (interleaved) randomized benchmarking with the configured noise.
    Rb {
        /// Survival CSV path (default <out-dir>/rb.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits the relaxation rates to population curves (CSV initial,readout,t_ms,population).
    T1Fit {
        #[arg(long)]
        data: PathBuf,
        /// Fits a per-curve amplitude and baseline as well.
        #[arg(long)]
        nuisance: bool,
        /// Gate time for the T1 error (default system.t_gate).
        #[arg(long)]
        t_gate_ns: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual-error budget of a pulse.
    Budget {
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Optimize { .. } => "optimize",
            Command::Evaluate { .. } => "evaluate",
            Command::Scan { .. } => "scan",
            Command::Filter { .. } => "filter",
            Command::DdSim { .. } => "dd-sim",
            Command::DdFit { .. } => "dd-fit",
            Command::Rb { .. } => "rb",
            Command::T1Fit { .. } => "t1-fit",
            Command::Budget { .. } => "budget",
        }
    }
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn execute(cli: Cli) -> CliResult<PathBuf> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed);
    let mut run = Run::start(output_dir(&cli, &cfg), cli.command.name(), &cfg)?;
    let r = &mut run;
    match &cli.command {
        Command::Optimize { out, starts } => commands::optimize(r, &cfg, out, *starts)?,
        Command::Evaluate { pulse, samples, out } => commands::evaluate(r, &cfg, pulse, *samples, out)?,
        Command::Scan {
            pulse,
            sigma_khz,
            n,
            omegas,
            out,
        } => commands::scan(
            r,
            &cfg,
            commands::ScanArgs {
                pulse,
                sigma_khz: *sigma_khz,
                n: *n,
                omegas: &omegas.0,
            },
            out,
        )?,
        Command::Filter {
            pulse,
            omegas,
            sigma_khz,
            out,
        } => commands::filter(r, &cfg, pulse, &omegas.0, *sigma_khz, out)?,
        Command::DdSim {
            n_pulses,
            taus,
            oracle,
            out,
        } => commands::dd_sim(r, &cfg, *n_pulses, &taus.0, *oracle, out)?,
        Command::DdFit {
            data,
            n_pulses,
            orders,
            guess_azz_khz,
            guess_aperp_khz,
            out,
        } => commands::dd_fit(r, &cfg, data, *n_pulses, orders, (*guess_azz_khz, *guess_aperp_khz), out)?,
        Command::Rb { out } => commands::rb(r, &cfg, out)?,
        Command::T1Fit {
            data,
            nuisance,
            t_gate_ns,
            out,
        } => commands::t1_fit(r, &cfg, data, *nuisance, *t_gate_ns, out)?,
        Command::Budget { pulse, out } => commands::budget(r, &cfg, pulse, out)?,
    }
    run.finish(&cfg)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    let command = cli.command.name();
    match execute(cli) {
        Ok(manifest) => {
            println!("{}", json!({"command": command, "manifest": manifest}));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ranges_parse_through_clap() {
        let cli = Cli::try_parse_from(["spingate", "scan", "--pulse", "p.csv", "--omegas", "0:10:5"]).unwrap();
        match cli.command {
            Command::Scan { omegas, .. } => assert_eq!(omegas, Grid(vec![0.0, 5.0, 10.0])),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["spingate", "scan", "--pulse", "p", "--omegas", "0:10"]).is_err());
    }
}
