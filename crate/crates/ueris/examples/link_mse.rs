//! Compare the closed-form stream-error objective against a symbol-level
//! Monte-Carlo simulation of the same link. The two agree within sampling
//! error, and the sampling error shrinks like 1/sqrt(symbols).

use ueris::channel::{assemble_effective_channel, generate_channels, RisConfiguration};
use ueris::mse::{mse_matrix, simulate_link};
use ueris::scenario::{sample_geometry, ScenarioConfig};
use ueris::transceiver::{design_transceiver, svd_decompose};

fn main() -> ueris::Result<()> {
    let config = ScenarioConfig {
        n_tx_antennas: 8,
        n_rx_antennas: 8,
        n_tx_rf_chains: 4,
        n_rx_rf_chains: 4,
        n_streams: 4,
        n_cooperating_ues: 3,
        ris_elements_per_ue: 2,
        noise_power: 1e-9,
        ..Default::default()
    };
    let geometry = sample_geometry(&config, 7)?;
    let channels = generate_channels(&config, &geometry, 7)?;

    // design for the untuned channel; phase optimization is a separate story
    let ris = RisConfiguration::zeros(
        channels.n_ues(),
        channels.elements_per_ue(),
        config.phase_set()?,
    );
    let h = assemble_effective_channel(&channels, &ris)?;
    let transceiver = design_transceiver(&svd_decompose(&h)?, &config)?.0;

    let report = mse_matrix(&channels, &ris, &transceiver, &config)?;
    println!("analytic stream-error objective: {:.9}", report.delta);
    println!(
        "error matrix trace check: {:.9}",
        report.mse_matrix.diagonal().iter().map(|z| z.re).sum::<f64>()
    );

    println!("\nsymbols   empirical        |analytic - empirical|   std err");
    for symbols in [1_000usize, 10_000, 100_000] {
        let cfg = ScenarioConfig {
            n_symbols: symbols,
            ..config.clone()
        };
        let stats = simulate_link(&channels, &ris, &transceiver, &cfg, 1234)?;
        println!(
            "{symbols:7}   {:.9}   {:.3e}               {:.3e}",
            stats.empirical_mse,
            (stats.empirical_mse - report.delta).abs(),
            stats.std_err
        );
    }
    Ok(())
}
