//! Thin command-line front end: run an experiment, validate a scenario
//! file, or replay one recorded trial. All logic lives in the library; see
//! the crate examples for programmatic use.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ueris::harness::{replay, run_and_save, summarize, Arm, ExperimentSpec};
use ueris::phaseopt::PhaseMethod;
use ueris::scenario::ScenarioConfig;
use ueris::Error;

#[derive(Parser)]
#[command(
    name = "ueris",
    version,
    about = "Simulator for MIMO links assisted by handset-mounted phase-shifting surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, summary.csv, plotdata.csv
    /// and experiment.json into the output directory.
    Run {
        /// Scenario file (TOML); omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named experiment preset; `paper-fig5` compares five partitions of
        /// twelve surface elements at a calibrated 25 dB SNR.
        #[arg(long, value_parser = ["paper-fig5"])]
        preset: Option<String>,
        /// Phase search: "es" (exhaustive) or "bp" (branch-and-prune).
        #[arg(long, default_value = "bp")]
        method: PhaseMethod,
        /// Trials per arm.
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Optimize on the true channels, skipping recruitment and pilot
        /// estimation. (Presets already run this way.)
        #[arg(long)]
        ideal_csi: bool,
        /// Record wall-clock times per trial. Off by default so identical
        /// runs produce byte-identical files.
        #[arg(long)]
        timing: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a scenario file and report every violated rule.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute a recorded trial and verify it reproduces bit for bit.
    Replay {
        /// Trial to recompute, as "<arm>:<trial>".
        #[arg(long)]
        trial_id: String,
        /// Directory holding experiment.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> ueris::Result<ExitCode> {
    match command {
        Command::Run {
            config,
            preset,
            method,
            trials,
            seed,
            ideal_csi,
            timing,
            out,
        } => {
            let base = match &config {
                Some(path) => ScenarioConfig::from_toml_file(path)?,
                None => ScenarioConfig::default(),
            };
            let mut spec = match preset.as_deref() {
                Some("paper-fig5") => {
                    let mut s = ExperimentSpec::partition_comparison(method);
                    if config.is_some() {
                        s.base = base;
                    }
                    s
                }
                Some(other) => {
                    return Err(Error::InvalidParameter(format!("unknown preset '{other}'")))
                }
                None => ExperimentSpec {
                    arms: vec![Arm::new(
                        "custom",
                        base.n_cooperating_ues,
                        base.ris_elements_per_ue,
                        base.ue_ris_mode,
                    )],
                    base,
                    n_trials: 10,
                    method,
                    ideal_csi: false,
                    snr_db: None,
                    timing: false,
                },
            };
            if let Some(t) = trials {
                spec.n_trials = t;
            }
            if let Some(s) = seed {
                spec.base.rng_seed = s;
            }
            spec.ideal_csi |= ideal_csi;
            spec.timing |= timing;

            let results = run_and_save(&spec, &out)?;
            for s in summarize(&results) {
                println!(
                    "{}: {} ok / {} failed, median delta {:.6e}, median empirical mse {:.6e}",
                    s.arm, s.completed, s.failed, s.delta_median, s.mse_median
                );
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => match ScenarioConfig::from_toml_file(&config) {
            Ok(cfg) => match cfg.validate() {
                Ok(()) => {
                    println!("ok");
                    Ok(ExitCode::SUCCESS)
                }
                Err(Error::InvalidConfig(violations)) => {
                    for v in &violations {
                        println!("violation: {v}");
                    }
                    Ok(ExitCode::FAILURE)
                }
                Err(e) => Err(e),
            },
            Err(e) => {
                println!("unreadable: {e}");
                Ok(ExitCode::FAILURE)
            }
        },
        Command::Replay { trial_id, out } => {
            let report = replay(&out, &trial_id)?;
            println!(
                "stored   delta {:.17e} mse {:.17e}",
                report.stored.delta_analytic, report.stored.mse_empirical
            );
            println!(
                "replayed delta {:.17e} mse {:.17e}",
                report.recomputed.delta_analytic, report.recomputed.mse_empirical
            );
            if report.matches {
                println!("bitwise match");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("MISMATCH");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
