//! Control-plane procedures: recruiting cooperating handsets, estimating
//! their reflected channel segments from pilots, and the far-field check
//! that justifies treating the two segments independently.
//!
//! Recruitment runs in two rounds. A broadcast poll collects volunteers and a
//! coarse transmitter-side estimate `G_hat` per volunteer; the strongest
//! `min(acceptors, 2 * N_d)` (breaking ties toward low mobility, then low id)
//! proceed to per-handset pilot estimation of the receiver-side segment, and
//! the `N_d` with the strongest `Q_hat` are selected. Every exchanged message
//! is logged in order, which pins the wire protocol in tests.

use crate::channel::ChannelSet;
use crate::linalg::{complex_gaussian, frob, CMat};
use crate::scenario::{Geometry, ScenarioConfig, FAR_FIELD_MIN_RATIO};
use crate::seeding::stream;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Endpoint of a control message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Tx,
    Rx,
    Ue(usize),
    Broadcast,
}

/// Control-plane message types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    RequestToParticipate,
    Accept,
    StartChannelEstimation,
    Ack,
    SendPilot,
    ChannelEstimationComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlMessage {
    pub kind: MessageKind,
    pub from: Party,
    pub to: Party,
}

/// State of one candidate handset as the procedures progress.
#[derive(Debug, Clone)]
pub struct UeRecord {
    pub ue_id: usize,
    pub accepted: bool,
    /// Lower is steadier; used to break channel-quality ties.
    pub mobility: f64,
    /// `||G_hat||_F` once the coarse estimate exists.
    pub cqi: Option<f64>,
    pub g_hat: Option<CMat>,
    pub q_hat: Option<CMat>,
}

/// Candidate handsets for one trial: who accepts, and how mobile each is.
pub fn build_population(config: &ScenarioConfig, seed: u64) -> Vec<UeRecord> {
    (0..config.candidate_ue_count())
        .map(|i| {
            let accepted =
                stream(seed, "accept", i as u64).gen::<f64>() < config.accept_probability;
            let mobility = stream(seed, "mobility", i as u64).gen::<f64>();
            UeRecord {
                ue_id: i,
                accepted,
                mobility,
                cqi: None,
                g_hat: None,
                q_hat: None,
            }
        })
        .collect()
}

/// Pilot block used for channel estimation: `sqrt(energy)` times the unitary
/// DFT, so `S * S^H = energy * I` and least squares has a closed form.
#[derive(Debug, Clone)]
pub struct Pilot {
    pub s: CMat,
    pub energy: f64,
}

impl Pilot {
    pub fn new(m: usize, energy: f64) -> Result<Self> {
        if m == 0 || !(energy > 0.0) {
            return Err(Error::InvalidParameter(
                "pilot needs at least one element and positive energy".into(),
            ));
        }
        let root = energy.sqrt() / (m as f64).sqrt();
        let s = CMat::from_fn(m, m, |i, j| {
            Complex64::from_polar(root, -2.0 * std::f64::consts::PI * (i * j) as f64 / m as f64)
        });
        Ok(Pilot { s, energy })
    }

    /// Least-squares estimate from `Y = Q S + noise`: `Q_hat = Y S^H / E`.
    /// Exact when noiseless; per-entry error variance `sigma_n^2 / E`.
    pub fn least_squares(&self, y: &CMat) -> CMat {
        (y * self.s.adjoint()).scale(1.0 / self.energy)
    }
}

/// Estimates produced by one estimation round.
#[derive(Debug, Clone)]
pub struct EstimationOutcome {
    /// `(ue_id, Q_hat)` in the order estimation ran.
    pub estimates: Vec<(usize, CMat)>,
    /// Handsets that never acknowledged and were skipped.
    pub skipped: Vec<usize>,
    pub log: Vec<ControlMessage>,
}

/// Run per-handset pilot estimation of the receiver-side segments, strictly
/// sequentially; each completed handset exchanges exactly four messages.
pub fn chan_est(
    ue_ids: &[usize],
    channels: &ChannelSet,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<EstimationOutcome> {
    let m = channels.elements_per_ue();
    let pilot = Pilot::new(m, config.pilot_energy)?;
    let mut out = EstimationOutcome {
        estimates: Vec::new(),
        skipped: Vec::new(),
        log: Vec::new(),
    };
    for &ue in ue_ids {
        if ue >= channels.n_ues() {
            return Err(Error::InvalidParameter(format!(
                "handset index {ue} out of range for estimation"
            )));
        }
        out.log.push(ControlMessage {
            kind: MessageKind::StartChannelEstimation,
            from: Party::Tx,
            to: Party::Ue(ue),
        });
        let timed_out =
            stream(seed, "ack-timeout", ue as u64).gen::<f64>() < config.ack_timeout_probability;
        if timed_out {
            out.skipped.push(ue);
            continue;
        }
        out.log.push(ControlMessage {
            kind: MessageKind::Ack,
            from: Party::Ue(ue),
            to: Party::Tx,
        });
        out.log.push(ControlMessage {
            kind: MessageKind::SendPilot,
            from: Party::Tx,
            to: Party::Ue(ue),
        });
        let mut rng = stream(seed, "estimation-noise", ue as u64);
        let noise = complex_gaussian(&mut rng, channels.n_rx(), m, config.noise_power);
        let y = &channels.q[ue] * &pilot.s + noise;
        out.estimates.push((ue, pilot.least_squares(&y)));
        out.log.push(ControlMessage {
            kind: MessageKind::ChannelEstimationComplete,
            from: Party::Rx,
            to: Party::Tx,
        });
    }
    Ok(out)
}

/// Result of the recruitment procedure.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// Selected handset ids, strongest receiver-side segment first.
    pub selected: Vec<usize>,
    /// The shortlist that entered pilot estimation, in rank order.
    pub shortlist: Vec<usize>,
    pub records: Vec<UeRecord>,
    pub log: Vec<ControlMessage>,
}

/// Recruit `n_cooperating_ues` handsets out of the candidate population.
///
/// `channels` must hold one channel pair per candidate (the population the
/// broadcast can reach), not just the finally selected ones.
pub fn ue_select(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<SelectionOutcome> {
    let n_candidates = config.candidate_ue_count();
    if channels.n_ues() != n_candidates {
        return Err(Error::DimensionMismatch {
            context: "ue_select",
            expected: format!("{n_candidates} candidate channel pairs"),
            found: format!("{}", channels.n_ues()),
        });
    }
    let needed = config.n_cooperating_ues;
    let mut records = build_population(config, seed);
    let mut log = vec![ControlMessage {
        kind: MessageKind::RequestToParticipate,
        from: Party::Tx,
        to: Party::Broadcast,
    }];

    // volunteers respond and are coarsely sounded on the transmit side
    let mut acceptors = Vec::new();
    for rec in records.iter_mut() {
        if !rec.accepted {
            continue;
        }
        log.push(ControlMessage {
            kind: MessageKind::Accept,
            from: Party::Ue(rec.ue_id),
            to: Party::Tx,
        });
        let mut rng = stream(seed, "sounding-noise", rec.ue_id as u64);
        let err_var = config.noise_power / config.pilot_energy;
        let noise = complex_gaussian(
            &mut rng,
            channels.elements_per_ue(),
            channels.n_tx(),
            err_var,
        );
        let g_hat = &channels.g[rec.ue_id] + noise;
        rec.cqi = Some(frob(&g_hat));
        rec.g_hat = Some(g_hat);
        acceptors.push(rec.ue_id);
    }

    // rank: strongest coarse estimate, then steadiest, then lowest id
    acceptors.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        rb.cqi
            .unwrap()
            .partial_cmp(&ra.cqi.unwrap())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                ra.mobility
                    .partial_cmp(&rb.mobility)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.cmp(&b))
    });
    let shortlist: Vec<usize> = acceptors
        .iter()
        .copied()
        .take((2 * needed).min(acceptors.len()))
        .collect();

    let est = chan_est(&shortlist, channels, config, seed)?;
    log.extend(est.log.iter().copied());
    for (ue, q_hat) in &est.estimates {
        records[*ue].q_hat = Some(q_hat.clone());
    }

    if est.estimates.len() < needed {
        return Err(Error::SelectionShortfall {
            needed,
            achieved: est.estimates.len(),
        });
    }

    // final rank on the estimated receiver-side strength
    let mut ranked: Vec<usize> = est.estimates.iter().map(|(ue, _)| *ue).collect();
    ranked.sort_by(|&a, &b| {
        let fa = frob(records[a].q_hat.as_ref().unwrap());
        let fb = frob(records[b].q_hat.as_ref().unwrap());
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked.truncate(needed);

    Ok(SelectionOutcome {
        selected: ranked,
        shortlist,
        records,
        log,
    })
}

/// Adopted two-segment model of one handset's reflection after verifying the
/// far-field factorization is justified.
#[derive(Debug, Clone)]
pub struct FarFieldAdoption {
    pub g: CMat,
    pub q: CMat,
    /// Smallest segment-to-offset ratio that was checked.
    pub ratio: f64,
}

/// Accept estimated segments as the handset's channel model, provided both
/// flight segments are at least 100x the antenna-to-patch offset.
pub fn farfield_identify(
    geometry: &Geometry,
    ue: usize,
    g_hat: &CMat,
    q_hat: &CMat,
) -> Result<FarFieldAdoption> {
    if ue >= geometry.ue_positions.len() {
        return Err(Error::InvalidParameter(format!(
            "handset index {ue} out of range for geometry"
        )));
    }
    let ratio =
        geometry.tx_ue_distance(ue).min(geometry.ue_rx_distance(ue)) / geometry.patch_offset_m;
    if ratio < FAR_FIELD_MIN_RATIO {
        return Err(Error::FarFieldViolated {
            ratio,
            minimum: FAR_FIELD_MIN_RATIO,
        });
    }
    Ok(FarFieldAdoption {
        g: g_hat.clone(),
        q: q_hat.clone(),
        ratio,
    })
}

/// Channel set the optimizer will run on after recruitment: the true direct
/// link plus the adopted estimated segments of the selected handsets (in
/// selection order), each passed through the far-field gate.
pub fn estimated_channel_set(
    channels: &ChannelSet,
    outcome: &SelectionOutcome,
    geometry: &Geometry,
) -> Result<(ChannelSet, Vec<usize>)> {
    let mut g = Vec::with_capacity(outcome.selected.len());
    let mut q = Vec::with_capacity(outcome.selected.len());
    for &ue in &outcome.selected {
        let rec = &outcome.records[ue];
        let adoption = farfield_identify(
            geometry,
            ue,
            rec.g_hat.as_ref().ok_or_else(|| {
                Error::InvalidParameter(format!("handset {ue} has no transmit-side estimate"))
            })?,
            rec.q_hat.as_ref().ok_or_else(|| {
                Error::InvalidParameter(format!("handset {ue} has no receiver-side estimate"))
            })?,
        )?;
        g.push(adoption.g);
        q.push(adoption.q);
    }
    Ok((
        ChannelSet::new(channels.h_direct.clone(), g, q)?,
        outcome.selected.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;
    use crate::linalg::frob_sq;
    use crate::scenario::sample_geometry;

    fn cfg(candidates: usize, needed: usize, m: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_tx_antennas: 4,
            n_rx_antennas: 4,
            n_tx_rf_chains: 2,
            n_rx_rf_chains: 2,
            n_streams: 2,
            n_cooperating_ues: needed,
            n_candidate_ues: Some(candidates),
            ris_elements_per_ue: m,
            noise_power: 1e-12,
            ..Default::default()
        }
    }

    /// Candidate-population channels (the broadcast reach).
    fn candidate_channels(config: &ScenarioConfig, seed: u64) -> (ChannelSet, Geometry) {
        let expanded = ScenarioConfig {
            n_cooperating_ues: config.candidate_ue_count(),
            ..config.clone()
        };
        let geom = sample_geometry(&expanded, seed).unwrap();
        let ch = generate_channels(&expanded, &geom, seed).unwrap();
        (ch, geom)
    }

    #[test]
    fn pilot_is_scaled_unitary() {
        let p = Pilot::new(4, 2.5).unwrap();
        let gram = &p.s * p.s.adjoint();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 2.5 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::from(want)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_least_squares_is_exact() {
        let c = ScenarioConfig {
            noise_power: 1e-300,
            ..cfg(3, 2, 2)
        };
        let (ch, _) = candidate_channels(&c, 5);
        let est = chan_est(&[0, 1, 2], &ch, &c, 5).unwrap();
        for (ue, q_hat) in &est.estimates {
            let err = frob(&(q_hat - &ch.q[*ue]));
            assert!(err <= 1e-10 * frob(&ch.q[*ue]).max(1e-30), "ue {ue}: {err}");
        }
    }

    #[test]
    fn message_sequence_is_exact() {
        let c = cfg(3, 2, 2);
        let (ch, _) = candidate_channels(&c, 1);
        let est = chan_est(&[2, 0], &ch, &c, 1).unwrap();
        use MessageKind::*;
        use Party::*;
        let want = [
            (StartChannelEstimation, Tx, Ue(2)),
            (Ack, Ue(2), Tx),
            (SendPilot, Tx, Ue(2)),
            (ChannelEstimationComplete, Rx, Tx),
            (StartChannelEstimation, Tx, Ue(0)),
            (Ack, Ue(0), Tx),
            (SendPilot, Tx, Ue(0)),
            (ChannelEstimationComplete, Rx, Tx),
        ];
        assert_eq!(est.log.len(), want.len());
        for (got, (kind, from, to)) in est.log.iter().zip(want) {
            assert_eq!((got.kind, got.from, got.to), (kind, from, to));
        }
    }

    #[test]
    fn estimation_error_scales_inversely_with_pilot_energy() {
        let base = ScenarioConfig {
            noise_power: 1e-9,
            ..cfg(1, 1, 4)
        };
        let mut errs = [Vec::new(), Vec::new()];
        for (slot, energy) in [(0usize, 1.0), (1, 10.0)] {
            let c = ScenarioConfig {
                pilot_energy: energy,
                ..base.clone()
            };
            for seed in 0..40u64 {
                let (ch, _) = candidate_channels(&c, seed);
                let est = chan_est(&[0], &ch, &c, seed + 1000).unwrap();
                errs[slot].push(frob_sq(&(&est.estimates[0].1 - &ch.q[0])));
            }
        }
        let median = |v: &mut Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let (m1, m10) = (median(&mut errs[0]), median(&mut errs[1]));
        let ratio = m1 / m10;
        assert!(
            (5.0..20.0).contains(&ratio),
            "10 dB more pilot energy changed error by {ratio:.2}x"
        );
    }

    #[test]
    fn selection_matches_independent_ranking() {
        for seed in 0..10u64 {
            let c = ScenarioConfig {
                accept_probability: 0.8,
                rng_seed: seed,
                ..cfg(8, 2, 2)
            };
            let (ch, _) = candidate_channels(&c, seed);
            let out = ue_select(&ch, &c, seed).unwrap();

            // oracle: re-rank from the outcome's own records by the stated keys
            let mut acceptors: Vec<usize> = out
                .records
                .iter()
                .filter(|r| r.accepted)
                .map(|r| r.ue_id)
                .collect();
            acceptors.sort_by(|&a, &b| {
                let (ra, rb) = (&out.records[a], &out.records[b]);
                rb.cqi
                    .unwrap()
                    .partial_cmp(&ra.cqi.unwrap())
                    .unwrap()
                    .then(ra.mobility.partial_cmp(&rb.mobility).unwrap())
                    .then(a.cmp(&b))
            });
            acceptors.truncate(2 * c.n_cooperating_ues);
            assert_eq!(out.shortlist, acceptors, "seed {seed} shortlist");

            let mut by_q: Vec<usize> = out.shortlist.clone();
            by_q.sort_by(|&a, &b| {
                let fa = frob(out.records[a].q_hat.as_ref().unwrap());
                let fb = frob(out.records[b].q_hat.as_ref().unwrap());
                fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
            });
            by_q.truncate(c.n_cooperating_ues);
            assert_eq!(out.selected, by_q, "seed {seed} selection");
        }
    }

    #[test]
    fn selection_log_shape() {
        let c = cfg(5, 2, 2);
        let (ch, _) = candidate_channels(&c, 3);
        let out = ue_select(&ch, &c, 3).unwrap();
        assert_eq!(out.log[0].kind, MessageKind::RequestToParticipate);
        assert_eq!(out.log[0].to, Party::Broadcast);
        let accepts = out.log.iter().filter(|m| m.kind == MessageKind::Accept).count();
        assert_eq!(accepts, 5); // default accept probability is 1
        // four estimation messages per shortlisted handset
        assert_eq!(out.log.len(), 1 + accepts + 4 * out.shortlist.len());
        assert_eq!(out.selected.len(), 2);
    }

    #[test]
    fn selection_is_deterministic() {
        let c = ScenarioConfig {
            accept_probability: 0.7,
            ..cfg(6, 2, 2)
        };
        let (ch, _) = candidate_channels(&c, 9);
        let a = ue_select(&ch, &c, 9).unwrap();
        let b = ue_select(&ch, &c, 9).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn shortfall_is_reported_with_counts() {
        let c = ScenarioConfig {
            accept_probability: 0.0,
            ..cfg(4, 2, 2)
        };
        let (ch, _) = candidate_channels(&c, 2);
        match ue_select(&ch, &c, 2) {
            Err(Error::SelectionShortfall { needed, achieved }) => {
                assert_eq!((needed, achieved), (2, 0));
            }
            other => panic!("expected shortfall, got {:?}", other.map(|o| o.selected)),
        }
    }

    #[test]
    fn ack_timeouts_skip_handsets() {
        let c = ScenarioConfig {
            ack_timeout_probability: 1.0,
            ..cfg(3, 1, 2)
        };
        let (ch, _) = candidate_channels(&c, 4);
        let est = chan_est(&[0, 1, 2], &ch, &c, 4).unwrap();
        assert_eq!(est.skipped, vec![0, 1, 2]);
        assert!(est.estimates.is_empty());
        // only the poll messages went out
        assert!(est
            .log
            .iter()
            .all(|m| m.kind == MessageKind::StartChannelEstimation));
    }

    #[test]
    fn far_field_gate() {
        let c = cfg(2, 1, 2);
        let (ch, geom) = candidate_channels(&c, 6);
        let out = ue_select(&ch, &c, 6).unwrap();
        let (est_set, ids) = estimated_channel_set(&ch, &out, &geom).unwrap();
        assert_eq!(est_set.n_ues(), 1);
        assert_eq!(ids, out.selected);

        // a handset 1 m from the transmitter fails the 100x offset rule
        let close = Geometry {
            tx_position: [0.0; 3],
            rx_position: [60.0, 0.0, 0.0],
            ue_positions: vec![[1.0, 0.0, 0.0]],
            patch_offset_m: 0.05,
        };
        let g_hat = ch.g[0].clone();
        let q_hat = ch.q[0].clone();
        match farfield_identify(&close, 0, &g_hat, &q_hat) {
            Err(Error::FarFieldViolated { ratio, minimum }) => {
                assert!(ratio < minimum);
            }
            other => panic!("expected far-field violation, got {other:?}"),
        }
    }
}
