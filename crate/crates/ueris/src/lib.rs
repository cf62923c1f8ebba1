//! Link-level simulation and configuration search for MIMO links assisted by
//! reconfigurable surfaces mounted on cooperating user handsets.
//!
//! The library models a point-to-point spatially multiplexed link in which a
//! set of handsets, each carrying a small strip of phase-shifting elements,
//! reflects extra signal energy from the transmitter to the receiver. Every
//! element takes one of `K` discrete phase values, so tuning the surfaces is a
//! combinatorial search; the transceiver itself uses a hybrid analog/digital
//! beamforming architecture designed from the singular vectors of the tuned
//! channel. The two are optimized alternately until the sum mean squared error
//! over the spatial streams stops improving.
//!
//! The fastest way in is the `examples/` directory; each file is a runnable
//! walk-through of one capability:
//!
//! ```text
//! examples/
//!   channel_stats.rs    draw channels, check gain calibration and ranks
//!   channel_io.rs       round-trip a channel set through the binary container
//!   link_mse.rs         analytic MSE vs. a symbol-level simulation
//!   phase_search.rs     exhaustive vs. branch-and-prune phase tuning
//!   ao_trace.rs         the full alternating-optimization loop, iteration log
//!   protocol_run.rs     handset recruitment and pilot-based estimation
//!   partition_sweep.rs  multi-arm experiment: one big surface vs. many small
//! ```
//!
//! Run one with `cargo run --release --example phase_search`.
//!
//! A thin `ueris` binary wraps the experiment harness for batch use
//! (`ueris run`, `ueris validate`, `ueris replay`).

pub mod ao;
pub mod channel;
pub mod harness;
pub mod linalg;
pub mod mse;
pub mod phaseopt;
pub mod protocol;
pub mod scenario;
pub mod seeding;
pub mod transceiver;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
