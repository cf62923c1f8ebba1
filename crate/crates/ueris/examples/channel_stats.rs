//! Draw one channel realization at the reference link size and check the
//! numbers that matter: per-link gain calibration against free-space flight
//! loss, far-field ratios of the handset placements, and the singular-value
//! profile of the assembled effective channel.

use ueris::channel::{
    assemble_effective_channel, friis_gain, generate_channels, RisConfiguration,
};
use ueris::linalg::frob_sq;
use ueris::scenario::{sample_geometry, ScenarioConfig};
use ueris::transceiver::svd_decompose;

fn main() -> ueris::Result<()> {
    let config = ScenarioConfig {
        n_cooperating_ues: 4,
        ris_elements_per_ue: 2,
        ..Default::default()
    };
    config.validate()?;
    let lambda = config.wavelength_m();
    println!(
        "link: {}x{} antennas, {} handsets x {} elements, {:.1} GHz (lambda {:.2} mm)",
        config.n_tx_antennas,
        config.n_rx_antennas,
        config.n_cooperating_ues,
        config.ris_elements_per_ue,
        config.carrier_frequency_hz / 1e9,
        lambda * 1e3
    );

    let geometry = sample_geometry(&config, config.rng_seed)?;
    let channels = generate_channels(&config, &geometry, config.rng_seed)?;

    // direct link: average per-entry power should equal the flight loss
    let d = geometry.tx_rx_distance();
    let expect = friis_gain(lambda, d);
    let got = frob_sq(&channels.h_direct)
        / (config.n_rx_antennas * config.n_tx_antennas) as f64;
    println!("\ndirect link ({d:.1} m):");
    println!("  per-entry power {got:.3e}, free-space value {expect:.3e}");

    // reflected paths: per-handset energy is calibrated to the total flight
    // distance, split evenly over its elements
    println!("\nreflected paths:");
    for i in 0..channels.n_ues() {
        let d1 = geometry.tx_ue_distance(i);
        let d2 = geometry.ue_rx_distance(i);
        let ratio = d1.min(d2) / geometry.patch_offset_m;
        let path_sum: f64 = (0..channels.elements_per_ue())
            .map(|m| {
                let q = channels.q[i].column(m);
                let g = channels.g[i].row(m);
                q.iter().map(|z| z.norm_sqr()).sum::<f64>()
                    * g.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        let expect = (config.n_rx_antennas * config.n_tx_antennas) as f64
            * friis_gain(lambda, d1 + d2);
        println!(
            "  handset {i}: {d1:5.1} m + {d2:5.1} m, far-field ratio {ratio:7.0}, \
             path energy {path_sum:.3e} (calibrated to {expect:.3e})"
        );
    }

    // effective channel at the all-zero phase setting
    let ris = RisConfiguration::zeros(
        channels.n_ues(),
        channels.elements_per_ue(),
        config.phase_set()?,
    );
    let h = assemble_effective_channel(&channels, &ris)?;
    let svd = svd_decompose(&h)?;
    let top: Vec<String> = svd.sigma[..config.n_streams]
        .iter()
        .map(|s| format!("{s:.3e}"))
        .collect();
    println!("\neffective channel, untuned phases:");
    println!("  top-{} singular values: {}", config.n_streams, top.join(" "));
    println!(
        "  conditioning over the used streams: {:.2}",
        svd.sigma[0] / svd.sigma[config.n_streams - 1]
    );
    Ok(())
}
