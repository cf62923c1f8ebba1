//! Alternating optimization of surface phases and the hybrid transceiver.
//!
//! One round trips between two conditional problems: with the transceiver
//! fixed, the phase search picks the best discrete configuration (warm
//! started from the previous one, so this half-step can only improve), then
//! the transceiver is redesigned from the SVD of the retuned channel and the
//! objective re-measured. The loop starts from a bootstrap phase solve that
//! maximizes assembled channel energy — before the first transceiver exists
//! the stream error is undefined — and stops once one full round improves
//! the objective by less than a configured fraction of the starting value.

use crate::channel::{assemble_effective_channel, ChannelSet, RisConfiguration};
use crate::mse;
use crate::phaseopt::{
    branch_prune_search_warm, exhaustive_search, initial_phase_search, PhaseMethod,
};
use crate::scenario::ScenarioConfig;
use crate::transceiver::{design_transceiver, svd_decompose, HybridTransceiver};
use crate::{Error, Result};

/// One completed round of the loop (or the bootstrap round, `iteration` 0).
#[derive(Debug, Clone)]
pub struct AoIterationRecord {
    pub iteration: usize,
    /// Objective after this round's transceiver redesign.
    pub delta: f64,
    /// Improvement over the previous round; infinity for the bootstrap.
    pub err: f64,
    /// Objective right after this round's phase solve, before the redesign
    /// (for round 0 this equals `delta`).
    pub phase_objective: f64,
    /// Phase configuration after this round.
    pub phase_indices: Vec<Vec<u16>>,
    /// Complete candidates evaluated by this round's phase solve.
    pub nodes_expanded: u64,
    /// Index into `AoTrace::transceivers` for this round's design.
    pub transceiver_index: usize,
}

/// Full account of one alternating-optimization run.
#[derive(Debug, Clone)]
pub struct AoTrace {
    pub iterations: Vec<AoIterationRecord>,
    pub transceivers: Vec<HybridTransceiver>,
    pub final_ris: RisConfiguration,
    /// Objective after the bootstrap round.
    pub delta0: f64,
    /// Final objective.
    pub delta_final: f64,
    /// Absolute stopping threshold: `ao_tolerance * delta0`.
    pub eps_threshold: f64,
    pub converged: bool,
    /// Loop rounds executed after the bootstrap.
    pub iterations_used: usize,
    /// Candidates evaluated across every phase solve including bootstrap.
    pub total_nodes_expanded: u64,
}

impl AoTrace {
    pub fn final_transceiver(&self) -> &HybridTransceiver {
        self.transceivers
            .last()
            .expect("trace always holds at least the bootstrap design")
    }
}

/// Run the full loop. Pure function of its inputs: equal arguments produce
/// bitwise-identical traces.
pub fn run_ao(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    method: PhaseMethod,
) -> Result<AoTrace> {
    config.validate()?;

    // bootstrap: tune phases for channel energy, then design the first
    // transceiver against that channel
    let boot = initial_phase_search(channels, config, method)?;
    let mut ris = boot.ris;
    let mut total_nodes = boot.nodes_expanded;

    let h0 = assemble_effective_channel(channels, &ris)?;
    let svd0 = svd_decompose(&h0)?;
    let (tx0, _, _) = design_transceiver(&svd0, config)?;
    let delta0 = mse::objective(channels, &ris, &tx0, config)?;

    let mut transceivers = vec![tx0];
    let mut iterations = vec![AoIterationRecord {
        iteration: 0,
        delta: delta0,
        err: f64::INFINITY,
        phase_objective: delta0,
        phase_indices: ris.phase_indices().to_vec(),
        nodes_expanded: boot.nodes_expanded,
        transceiver_index: 0,
    }];
    let eps_threshold = config.ao_tolerance * delta0;

    let partial_trace = |iterations: &[AoIterationRecord],
                         transceivers: &[HybridTransceiver],
                         ris: &RisConfiguration,
                         used: usize|
     -> AoTrace {
        AoTrace {
            iterations: iterations.to_vec(),
            transceivers: transceivers.to_vec(),
            final_ris: ris.clone(),
            delta0,
            delta_final: iterations.last().map_or(delta0, |r| r.delta),
            eps_threshold,
            converged: false,
            iterations_used: used,
            total_nodes_expanded: iterations.iter().map(|r| r.nodes_expanded).sum(),
        }
    };

    let mut prev_delta = delta0;
    let mut converged = false;
    let mut used = 0;
    for k in 1..=config.ao_max_iterations {
        let solve = match method {
            PhaseMethod::Exhaustive => exhaustive_search(channels, transceivers.last().unwrap(), config)?,
            PhaseMethod::BranchPrune => branch_prune_search_warm(
                channels,
                transceivers.last().unwrap(),
                config,
                Some(&ris),
            )?,
        };
        ris = solve.ris;
        total_nodes += solve.nodes_expanded;

        let h = assemble_effective_channel(channels, &ris)?;
        let svd = svd_decompose(&h)?;
        let (tx, _, _) = design_transceiver(&svd, config)?;
        let delta = mse::objective(channels, &ris, &tx, config)?;
        transceivers.push(tx);
        used = k;

        if !delta.is_finite() || !solve.objective.is_finite() {
            return Err(Error::NonFiniteObjective {
                iteration: k,
                trace: Box::new(partial_trace(&iterations, &transceivers, &ris, used)),
            });
        }

        let err = prev_delta - delta;
        iterations.push(AoIterationRecord {
            iteration: k,
            delta,
            err,
            phase_objective: solve.objective,
            phase_indices: ris.phase_indices().to_vec(),
            nodes_expanded: solve.nodes_expanded,
            transceiver_index: k,
        });
        prev_delta = delta;
        if err <= eps_threshold {
            converged = true;
            break;
        }
    }

    let delta_final = prev_delta;
    Ok(AoTrace {
        iterations,
        transceivers,
        final_ris: ris,
        delta0,
        delta_final,
        eps_threshold,
        converged,
        iterations_used: used,
        total_nodes_expanded: total_nodes,
    })
}
