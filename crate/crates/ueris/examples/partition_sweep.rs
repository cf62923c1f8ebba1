//! The headline experiment, scaled down to run in about a minute: partition
//! a fixed budget of twelve phase elements across different numbers of
//! handsets and compare the optimized stream error per layout. One wall
//! surface concentrates all twelve elements at a single spot; fleets of
//! handsets spread them out, which conditions the channel much better.
//!
//! The command-line tool runs the full 100-trial version of this experiment
//! with `ueris run --preset paper-fig5`.

use ueris::harness::{run_and_save, summarize, ExperimentSpec};
use ueris::phaseopt::PhaseMethod;

fn main() -> ueris::Result<()> {
    let mut spec = ExperimentSpec::partition_comparison(PhaseMethod::BranchPrune);
    spec.n_trials = 3; // the preset default is 100
    println!(
        "arms: {}",
        spec.arms
            .iter()
            .map(|a| format!("{} ({}x{})", a.name, a.n_cooperating_ues, a.elements_per_ue))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "{} trials per arm, calibrated receive SNR {} dB\n",
        spec.n_trials,
        spec.snr_db.unwrap()
    );

    let dir = std::env::temp_dir().join("ueris-partition-sweep");
    let results = run_and_save(&spec, &dir)?;

    println!("arm          handsets  elems   median objective   spread (IQR)");
    for s in summarize(&results) {
        println!(
            "{:<12} {:>8} {:>6}   {:.12}   {:.3e}",
            s.arm,
            s.n_cooperating_ues,
            s.elements_per_ue,
            s.delta_median,
            s.delta_q3 - s.delta_q1
        );
    }
    println!("\nfull tables written to {}", dir.display());
    println!("replay any row, e.g.: ueris replay --trial-id dist-12x1:0 --out {}", dir.display());
    Ok(())
}
