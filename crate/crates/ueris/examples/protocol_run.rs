//! Walk through the control-plane side: poll candidate handsets, shortlist
//! the volunteers by coarse channel quality, estimate each shortlisted
//! handset's receiver-side segment from pilots, and adopt the estimates
//! after the far-field check. Prints the full message log.

use ueris::channel::generate_channels;
use ueris::linalg::frob;
use ueris::protocol::{estimated_channel_set, ue_select, Party};
use ueris::scenario::{sample_geometry, ScenarioConfig};

fn party(p: Party) -> String {
    match p {
        Party::Tx => "TX".into(),
        Party::Rx => "RX".into(),
        Party::Ue(i) => format!("UE{i}"),
        Party::Broadcast => "ALL".into(),
    }
}

fn main() -> ueris::Result<()> {
    let config = ScenarioConfig {
        n_cooperating_ues: 3,
        n_candidate_ues: Some(8),
        ris_elements_per_ue: 2,
        accept_probability: 0.75,
        noise_power: 1e-11,
        ..Default::default()
    };
    // channels for everyone the broadcast can reach
    let population = ScenarioConfig {
        n_cooperating_ues: config.candidate_ue_count(),
        ..config.clone()
    };
    let geometry = sample_geometry(&population, 17)?;
    let channels = generate_channels(&population, &geometry, 17)?;

    let outcome = ue_select(&channels, &config, 17)?;
    println!("message log ({} messages):", outcome.log.len());
    for m in &outcome.log {
        println!("  {:>4} -> {:<4} {:?}", party(m.from), party(m.to), m.kind);
    }

    println!("\ncandidates:");
    for r in &outcome.records {
        let role = if outcome.selected.contains(&r.ue_id) {
            "selected"
        } else if outcome.shortlist.contains(&r.ue_id) {
            "shortlisted"
        } else if r.accepted {
            "volunteered"
        } else {
            "declined"
        };
        let cqi = r
            .cqi
            .map(|c| format!("{c:.3e}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "  UE{} mobility {:.2} cqi {cqi:>10} {role}",
            r.ue_id, r.mobility
        );
    }

    let (estimated, ids) = estimated_channel_set(&channels, &outcome, &geometry)?;
    println!("\nadopted estimates for handsets {ids:?}:");
    for (slot, &ue) in ids.iter().enumerate() {
        let err = frob(&(&estimated.q[slot] - &channels.q[ue])) / frob(&channels.q[ue]);
        println!("  UE{ue}: relative estimation error {err:.3e}");
    }
    Ok(())
}
