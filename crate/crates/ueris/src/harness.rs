//! Experiment runner: sweeps surface-partition layouts ("arms") over seeded
//! trials, writes tabular results, and can replay any recorded trial to
//! bitwise-identical numbers.
//!
//! A trial's seed depends only on the trial index, so all arms of one trial
//! share the same direct-link realization and handset placement prefix; arm
//! comparisons are paired. Wall-clock capture is off by default, which keeps
//! every output file byte-stable for identical specs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ao::run_ao;
use crate::channel::{
    assemble_effective_channel, generate_channels, ChannelSet, RisConfiguration,
};
use crate::linalg::frob_sq;
use crate::mse::{objective, simulate_link};
use crate::phaseopt::PhaseMethod;
use crate::protocol::{estimated_channel_set, ue_select};
use crate::scenario::{sample_geometry, ScenarioConfig};
use crate::seeding::child_seed;
use crate::transceiver::{design_transceiver, svd_decompose};
use crate::{Error, Result};

/// One layout under comparison: how many handsets cooperate and how many
/// phase elements each carries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    /// Zero disables surface assistance entirely (direct link only).
    pub n_cooperating_ues: usize,
    pub elements_per_ue: usize,
    /// Cleared for a conventional wall-mounted surface, which lifts the
    /// four-element cap on a single mount.
    pub ue_ris_mode: bool,
}

impl Arm {
    pub fn new(name: &str, n_ues: usize, elements: usize, ue_ris_mode: bool) -> Self {
        Arm {
            name: name.into(),
            n_cooperating_ues: n_ues,
            elements_per_ue: elements,
            ue_ris_mode,
        }
    }
}

/// Complete description of an experiment; everything a replay needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Shared link parameters; each arm overrides the partition fields.
    pub base: ScenarioConfig,
    pub arms: Vec<Arm>,
    pub n_trials: usize,
    pub method: PhaseMethod,
    /// Feed the optimizer the true channels instead of running recruitment
    /// and pilot estimation.
    pub ideal_csi: bool,
    /// When set, the noise floor is recalibrated per trial so the untuned
    /// link's per-receive-antenna SNR equals this target (dB).
    pub snr_db: Option<f64>,
    /// Record wall-clock durations. Off by default: timed outputs cannot be
    /// byte-stable across runs.
    pub timing: bool,
}

impl ExperimentSpec {
    /// Five-way comparison of partitions of twelve phase elements at the
    /// reference link size, 25 dB calibrated SNR, 100 paired trials: no
    /// surface, one wall-mounted 12-element surface, and three handset
    /// fleets (3x4, 6x2, 12x1). This is the `paper-fig5` preset of the
    /// command-line tool.
    pub fn partition_comparison(method: PhaseMethod) -> Self {
        ExperimentSpec {
            base: ScenarioConfig::default(),
            arms: vec![
                Arm::new("no-ris", 0, 1, true),
                Arm::new("mono-1x12", 1, 12, false),
                Arm::new("dist-3x4", 3, 4, true),
                Arm::new("dist-6x2", 6, 2, true),
                Arm::new("dist-12x1", 12, 1, true),
            ],
            n_trials: 100,
            method,
            ideal_csi: true,
            snr_db: Some(25.0),
            timing: false,
        }
    }

    /// The scenario an arm actually runs.
    pub fn arm_config(&self, arm: &Arm) -> ScenarioConfig {
        ScenarioConfig {
            n_cooperating_ues: arm.n_cooperating_ues,
            ris_elements_per_ue: arm.elements_per_ue,
            ue_ris_mode: arm.ue_ris_mode,
            ..self.base.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::InvalidParameter("experiment needs at least one arm".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("experiment needs at least one trial".into()));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.name.is_empty() || arm.name.contains([':', ',', '\n']) {
                return Err(Error::InvalidParameter(format!(
                    "arm name {:?} is empty or contains ':', ',' or newline",
                    arm.name
                )));
            }
            if self.arms[..i].iter().any(|a| a.name == arm.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate arm name {:?}",
                    arm.name
                )));
            }
            self.arm_config(arm).validate()?;
        }
        Ok(())
    }
}

/// Derived per-purpose seeds for one trial, recorded so any stage can be
/// reproduced in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSeeds {
    pub geometry: u64,
    pub channel: u64,
    pub protocol: u64,
    pub monte_carlo: u64,
}

impl SubSeeds {
    fn for_trial(trial_seed: u64) -> Self {
        SubSeeds {
            geometry: child_seed(trial_seed, "geometry", 0),
            channel: child_seed(trial_seed, "channel", 0),
            protocol: child_seed(trial_seed, "protocol", 0),
            monte_carlo: child_seed(trial_seed, "monte-carlo", 0),
        }
    }
}

/// One completed trial of one arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub arm: String,
    pub trial: usize,
    pub seed: u64,
    pub sub_seeds: SubSeeds,
    /// Operating noise floor (calibrated when the experiment fixes an SNR).
    pub noise_power: f64,
    /// Stream-error objective of the final design, on the true channels.
    pub delta_analytic: f64,
    /// Monte-Carlo symbol-error average on the true channels.
    pub mse_empirical: f64,
    /// Optimization rounds after the bootstrap.
    pub iterations: usize,
    /// Complete phase candidates evaluated across the whole run.
    pub nodes_expanded: u64,
    /// Seconds; 0.0 unless timing was requested.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedTrial {
    pub arm: String,
    pub trial: usize,
    pub error: String,
}

/// Everything `run_experiment` produced; serialized as `experiment.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<FailedTrial>,
}

/// Noise floor at which the untuned link (all phase indices zero, hybrid
/// design for that channel) has per-receive-antenna SNR `snr_db`:
/// `sigma^2 = p * ||H0 F0||_F^2 / (N_r * 10^(snr_db/10))`.
pub fn calibrated_noise_power(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    snr_db: f64,
) -> Result<f64> {
    let ris = RisConfiguration::zeros(
        channels.n_ues(),
        channels.elements_per_ue(),
        config.phase_set()?,
    );
    let h0 = assemble_effective_channel(channels, &ris)?;
    let svd = svd_decompose(&h0)?;
    let (tx, _, _) = design_transceiver(&svd, config)?;
    let signal = config.symbol_power * frob_sq(&(&h0 * tx.precoder()));
    let sigma = signal / (channels.n_rx() as f64 * 10f64.powf(snr_db / 10.0));
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::NonFinite(format!("calibrated noise power {sigma}")));
    }
    Ok(sigma)
}

/// Run one arm's trial end to end. Pure function of `(spec, arm, trial)`
/// except for `wall_time` when timing is on.
///
/// With recruitment enabled, estimation noise is drawn at the configured
/// noise floor; SNR calibration then sets the floor the optimizer and the
/// payload simulation use. The optimizer sees estimated channels, while both
/// reported error figures are evaluated on the true ones.
pub fn run_trial(spec: &ExperimentSpec, arm: &Arm, trial: usize) -> Result<TrialRecord> {
    let started = Instant::now();
    let mut cfg = spec.arm_config(arm);
    cfg.validate()?;
    let seed = child_seed(spec.base.rng_seed, "trial", trial as u64);
    let sub = SubSeeds::for_trial(seed);

    // realize the whole candidate population (equal to the cooperating set
    // under ideal CSI)
    let gen_cfg = if spec.ideal_csi {
        cfg.clone()
    } else {
        ScenarioConfig {
            n_cooperating_ues: cfg.candidate_ue_count(),
            ..cfg.clone()
        }
    };
    let geometry = sample_geometry(&gen_cfg, sub.geometry)?;
    let candidates = generate_channels(&gen_cfg, &geometry, sub.channel)?;

    let (opt_channels, true_channels) = if spec.ideal_csi {
        (candidates.clone(), candidates)
    } else {
        let outcome = ue_select(&candidates, &cfg, sub.protocol)?;
        let (estimated, ids) = estimated_channel_set(&candidates, &outcome, &geometry)?;
        let truth = ChannelSet::new(
            candidates.h_direct.clone(),
            ids.iter().map(|&u| candidates.g[u].clone()).collect(),
            ids.iter().map(|&u| candidates.q[u].clone()).collect(),
        )?;
        (estimated, truth)
    };

    if let Some(snr_db) = spec.snr_db {
        cfg.noise_power = calibrated_noise_power(&true_channels, &cfg, snr_db)?;
    }

    let trace = run_ao(&opt_channels, &cfg, spec.method)?;
    let transceiver = trace.final_transceiver();
    let delta = objective(&true_channels, &trace.final_ris, transceiver, &cfg)?;
    let stats = simulate_link(
        &true_channels,
        &trace.final_ris,
        transceiver,
        &cfg,
        sub.monte_carlo,
    )?;

    Ok(TrialRecord {
        arm: arm.name.clone(),
        trial,
        seed,
        sub_seeds: sub,
        noise_power: cfg.noise_power,
        delta_analytic: delta,
        mse_empirical: stats.empirical_mse,
        iterations: trace.iterations_used,
        nodes_expanded: trace.total_nodes_expanded,
        wall_time: if spec.timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Run every arm over every trial, sequentially and in declaration order.
/// Individual trial failures are captured, not fatal, unless more than 10%
/// of all trials fail.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for arm in &spec.arms {
        for trial in 0..spec.n_trials {
            match run_trial(spec, arm, trial) {
                Ok(r) => records.push(r),
                Err(e) => failures.push(FailedTrial {
                    arm: arm.name.clone(),
                    trial,
                    error: e.to_string(),
                }),
            }
        }
    }
    let total = spec.arms.len() * spec.n_trials;
    if failures.len() * 10 > total {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    Ok(ExperimentResults {
        spec: spec.clone(),
        records,
        failures,
    })
}

/// Value at fractional rank `q * (len - 1)` of an ascending slice, with
/// linear interpolation between neighbors.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-arm aggregate over the completed trials.
#[derive(Debug, Clone, Serialize)]
pub struct ArmSummary {
    pub arm: String,
    pub n_cooperating_ues: usize,
    pub elements_per_ue: usize,
    pub completed: usize,
    pub failed: usize,
    pub delta_q1: f64,
    pub delta_median: f64,
    pub delta_q3: f64,
    pub mse_q1: f64,
    pub mse_median: f64,
    pub mse_q3: f64,
    pub iterations_median: f64,
    pub nodes_total: u64,
}

pub fn summarize(results: &ExperimentResults) -> Vec<ArmSummary> {
    results
        .spec
        .arms
        .iter()
        .map(|arm| {
            let rows: Vec<&TrialRecord> = results
                .records
                .iter()
                .filter(|r| r.arm == arm.name)
                .collect();
            let failed = results
                .failures
                .iter()
                .filter(|f| f.arm == arm.name)
                .count();
            let sorted = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> {
                let mut v: Vec<f64> = rows.iter().map(|r| f(r)).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                v
            };
            let deltas = sorted(&|r| r.delta_analytic);
            let mses = sorted(&|r| r.mse_empirical);
            let iters = sorted(&|r| r.iterations as f64);
            ArmSummary {
                arm: arm.name.clone(),
                n_cooperating_ues: arm.n_cooperating_ues,
                elements_per_ue: arm.elements_per_ue,
                completed: rows.len(),
                failed,
                delta_q1: quantile(&deltas, 0.25),
                delta_median: quantile(&deltas, 0.5),
                delta_q3: quantile(&deltas, 0.75),
                mse_q1: quantile(&mses, 0.25),
                mse_median: quantile(&mses, 0.5),
                mse_q3: quantile(&mses, 0.75),
                iterations_median: quantile(&iters, 0.5),
                nodes_total: rows.iter().map(|r| r.nodes_expanded).sum(),
            }
        })
        .collect()
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Write `results.csv`, `summary.csv`, `plotdata.csv` and `experiment.json`
/// into `dir`. Failed trials appear only in the summary's `failed` column
/// and in the manifest. Identical results produce byte-identical files.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut table = String::from(
        "arm,trial,seed,delta_analytic,mse_empirical,iterations,nodes_expanded,wall_time\n",
    );
    for r in &results.records {
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3}\n",
            r.arm,
            r.trial,
            r.seed,
            r.delta_analytic,
            r.mse_empirical,
            r.iterations,
            r.nodes_expanded,
            r.wall_time
        ));
    }
    fs::write(dir.join("results.csv"), table)?;

    let summaries = summarize(results);
    let mut summary = String::from(
        "arm,n_ues,elements,completed,failed,delta_q1,delta_median,delta_q3,\
         mse_q1,mse_median,mse_q3,iterations_median,nodes_total\n",
    );
    let mut plot = String::from(
        "arm,n_ues,elements,delta_median,delta_iqr,delta_median_db,\
         mse_median,mse_iqr,mse_median_db\n",
    );
    for s in &summaries {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.arm,
            s.n_cooperating_ues,
            s.elements_per_ue,
            s.completed,
            s.failed,
            s.delta_q1,
            s.delta_median,
            s.delta_q3,
            s.mse_q1,
            s.mse_median,
            s.mse_q3,
            s.iterations_median,
            s.nodes_total
        ));
        plot.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.arm,
            s.n_cooperating_ues,
            s.elements_per_ue,
            s.delta_median,
            s.delta_q3 - s.delta_q1,
            db(s.delta_median),
            s.mse_median,
            s.mse_q3 - s.mse_q1,
            db(s.mse_median)
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("plotdata.csv"), plot)?;

    let manifest = serde_json::to_string_pretty(results)
        .map_err(|e| Error::BadContainer(format!("experiment manifest: {e}")))?;
    fs::write(dir.join("experiment.json"), manifest + "\n")?;
    Ok(())
}

/// `run_experiment` plus `write_outputs`.
pub fn run_and_save(spec: &ExperimentSpec, dir: &Path) -> Result<ExperimentResults> {
    let results = run_experiment(spec)?;
    write_outputs(&results, dir)?;
    Ok(results)
}

/// Outcome of replaying one recorded trial.
#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub stored: TrialRecord,
    pub recomputed: TrialRecord,
    /// All numeric outputs reproduced bit for bit (wall time excluded).
    pub matches: bool,
}

/// Recompute the trial `"arm:trial"` from the manifest in `dir` and compare
/// against the recorded row.
pub fn replay(dir: &Path, trial_id: &str) -> Result<ReplayReport> {
    let manifest = fs::read_to_string(dir.join("experiment.json"))?;
    let results: ExperimentResults = serde_json::from_str(&manifest)
        .map_err(|e| Error::BadContainer(format!("experiment manifest: {e}")))?;
    let (arm_name, trial) = trial_id
        .rsplit_once(':')
        .and_then(|(a, t)| t.parse::<usize>().ok().map(|t| (a.to_string(), t)))
        .ok_or_else(|| Error::UnknownTrial(trial_id.into()))?;
    let arm = results
        .spec
        .arms
        .iter()
        .find(|a| a.name == arm_name)
        .ok_or_else(|| Error::UnknownTrial(trial_id.into()))?;
    let stored = results
        .records
        .iter()
        .find(|r| r.arm == arm_name && r.trial == trial)
        .ok_or_else(|| Error::UnknownTrial(trial_id.into()))?
        .clone();
    let recomputed = run_trial(&results.spec, arm, trial)?;
    let matches = stored.seed == recomputed.seed
        && stored.sub_seeds == recomputed.sub_seeds
        && stored.noise_power.to_bits() == recomputed.noise_power.to_bits()
        && stored.delta_analytic.to_bits() == recomputed.delta_analytic.to_bits()
        && stored.mse_empirical.to_bits() == recomputed.mse_empirical.to_bits()
        && stored.iterations == recomputed.iterations
        && stored.nodes_expanded == recomputed.nodes_expanded;
    Ok(ReplayReport {
        stored,
        recomputed,
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            base: ScenarioConfig {
                n_tx_antennas: 4,
                n_rx_antennas: 4,
                n_tx_rf_chains: 2,
                n_rx_rf_chains: 2,
                n_streams: 2,
                phase_cardinality: 2,
                n_symbols: 100,
                rng_seed: 7,
                ..Default::default()
            },
            arms: vec![
                Arm::new("direct", 0, 1, true),
                Arm::new("pair", 2, 1, true),
            ],
            n_trials: 3,
            method: PhaseMethod::BranchPrune,
            ideal_csi: true,
            snr_db: Some(20.0),
            timing: false,
        }
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[5.0], 0.5), 5.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn trials_pair_across_arms() {
        let spec = tiny_spec();
        let a = run_trial(&spec, &spec.arms[0], 1).unwrap();
        let b = run_trial(&spec, &spec.arms[1], 1).unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.sub_seeds, b.sub_seeds);
        assert!(a.delta_analytic.is_finite() && b.delta_analytic.is_finite());
    }

    #[test]
    fn snr_calibration_hits_target() {
        let spec = tiny_spec();
        let cfg = spec.arm_config(&spec.arms[1]);
        let geom = sample_geometry(&cfg, 3).unwrap();
        let ch = generate_channels(&cfg, &geom, 3).unwrap();
        let sigma = calibrated_noise_power(&ch, &cfg, 20.0).unwrap();
        let ris = RisConfiguration::zeros(ch.n_ues(), ch.elements_per_ue(), cfg.phase_set().unwrap());
        let h0 = assemble_effective_channel(&ch, &ris).unwrap();
        let svd = svd_decompose(&h0).unwrap();
        let (tx, _, _) = design_transceiver(&svd, &cfg).unwrap();
        let snr = cfg.symbol_power * frob_sq(&(&h0 * tx.precoder())) / (ch.n_rx() as f64 * sigma);
        assert!((10.0 * snr.log10() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn outputs_are_complete_and_byte_stable() {
        let spec = tiny_spec();
        let dir = tempfile::tempdir().unwrap();
        let first = run_and_save(&spec, dir.path()).unwrap();
        assert_eq!(first.records.len(), 6);
        assert!(first.failures.is_empty());

        let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
        let snap: Vec<Vec<u8>> = ["results.csv", "summary.csv", "plotdata.csv", "experiment.json"]
            .iter()
            .map(|&n| read(n))
            .collect();
        let table = String::from_utf8(snap[0].clone()).unwrap();
        assert_eq!(table.lines().count(), 1 + 6);
        assert!(table.starts_with("arm,trial,seed,"));
        assert!(table.contains(",0.000\n"), "wall time should be zeroed");

        run_and_save(&spec, dir.path()).unwrap();
        for (&n, old) in ["results.csv", "summary.csv", "plotdata.csv", "experiment.json"]
            .iter()
            .zip(snap)
        {
            assert_eq!(read(n), old, "{n} changed between identical runs");
        }
    }

    #[test]
    fn replay_reproduces_bitwise() {
        let spec = tiny_spec();
        let dir = tempfile::tempdir().unwrap();
        run_and_save(&spec, dir.path()).unwrap();
        for id in ["pair:0", "pair:2", "direct:1"] {
            let report = replay(dir.path(), id).unwrap();
            assert!(report.matches, "{id} did not reproduce");
        }
        for id in ["pair:9", "ghost:0", "pair", "pair:x"] {
            match replay(dir.path(), id) {
                Err(Error::UnknownTrial(_)) => {}
                other => panic!("{id}: expected unknown-trial error, got {other:?}"),
            }
        }
    }

    #[test]
    fn pervasive_failures_abort() {
        let spec = ExperimentSpec {
            base: ScenarioConfig {
                search_budget: 1, // every search refuses, so every trial fails
                ..tiny_spec().base
            },
            ..tiny_spec()
        };
        match run_experiment(&spec) {
            Err(Error::TooManyFailures { failed, total }) => {
                assert_eq!(total, 6);
                assert!(failed > 0);
            }
            other => panic!("expected failure cascade, got {other:?}"),
        }
    }

    #[test]
    fn estimated_csi_path_runs() {
        let spec = ExperimentSpec {
            ideal_csi: false,
            base: ScenarioConfig {
                n_candidate_ues: Some(4),
                noise_power: 1e-11,
                ..tiny_spec().base
            },
            ..tiny_spec()
        };
        let r = run_trial(&spec, &spec.arms[1], 0).unwrap();
        assert!(r.delta_analytic.is_finite());
        assert!(r.mse_empirical.is_finite());
    }
}
