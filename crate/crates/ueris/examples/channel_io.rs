//! Round-trip a channel set through the binary container format and verify
//! the reload is bit-for-bit identical, so experiments can be rerun later or
//! cross-checked by other tools.

use ueris::channel::{generate_channels, ChannelSet};
use ueris::scenario::{sample_geometry, ScenarioConfig};

fn main() -> ueris::Result<()> {
    let config = ScenarioConfig {
        n_cooperating_ues: 3,
        ris_elements_per_ue: 4,
        ..Default::default()
    };
    let geometry = sample_geometry(&config, 42)?;
    let channels = generate_channels(&config, &geometry, 42)?;

    let path = std::env::temp_dir().join("ueris-channel-io-demo.bin");
    channels.save(&path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!(
        "saved {} ({} handsets x {} elements, {}x{} direct link) -> {} bytes",
        path.display(),
        channels.n_ues(),
        channels.elements_per_ue(),
        channels.n_rx(),
        channels.n_tx(),
        bytes
    );

    let reloaded = ChannelSet::load(&path)?;
    // PartialEq on the matrices is exact equality, which is the point:
    // the container stores every entry losslessly
    assert_eq!(channels, reloaded);
    println!("reload is bit-for-bit identical");

    // corrupt one byte and show the reader notices the truncation instead
    let mut raw = std::fs::read(&path)?;
    raw.truncate(raw.len() - 1);
    match ChannelSet::read_container(&mut raw.as_slice()) {
        Err(e) => println!("truncated copy rejected: {e}"),
        Ok(_) => println!("truncated copy unexpectedly accepted"),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
