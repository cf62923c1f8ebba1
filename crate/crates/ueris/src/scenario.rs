//! Scenario description: link dimensions, powers, surface parameters,
//! node placement, and the discrete phase alphabet.

use crate::seeding::stream;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum distance-to-offset ratio for the far-field factorization of a
/// reflected path into two independent segments.
pub const FAR_FIELD_MIN_RATIO: f64 = 100.0;

/// Full description of one simulated link.
///
/// All fields have defaults matching the reference urban micro setup
/// (12x16 antennas, 8 streams through 8 RF chains per side, 28 GHz, 60 m),
/// so a config file only needs to list what it overrides. Unknown keys in a
/// file are rejected rather than ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Transmit antennas `N_t`.
    pub n_tx_antennas: usize,
    /// Receive antennas `N_r`.
    pub n_rx_antennas: usize,
    /// Transmit-side RF chains `N_rt`.
    pub n_tx_rf_chains: usize,
    /// Receive-side RF chains `N_rs`.
    pub n_rx_rf_chains: usize,
    /// Spatial streams `N`.
    pub n_streams: usize,
    /// Cooperating handsets carrying surface strips `N_d`.
    pub n_cooperating_ues: usize,
    /// Phase-shifting elements per handset `M`.
    pub ris_elements_per_ue: usize,
    /// Size of the discrete phase alphabet `K`.
    pub phase_cardinality: usize,
    /// Per-stream symbol power `p`.
    pub symbol_power: f64,
    /// Receiver noise power per antenna.
    pub noise_power: f64,
    /// Carrier frequency in Hz.
    pub carrier_frequency_hz: f64,
    /// Transmitter-to-receiver distance in meters.
    pub tx_rx_distance_m: f64,
    /// Surface element spacing as a multiple of half the wavelength.
    pub element_spacing_multiplier: f64,
    /// Relative convergence coefficient for alternating optimization; the
    /// loop stops once the per-iteration improvement drops below this
    /// fraction of the starting objective.
    pub ao_tolerance: f64,
    /// Allowed relative optimality gap for the pruned phase search.
    pub near_optimality_gap: f64,
    /// Master seed; all randomness in a run derives from it.
    pub rng_seed: u64,
    /// Symbols per Monte-Carlo link simulation.
    pub n_symbols: usize,
    /// QAM constellation size (square, power-of-two side).
    pub constellation_order: usize,
    /// When true, surfaces are handset-mounted strips and `M` is capped at 4;
    /// clear it to model one conventional wall-mounted surface.
    pub ue_ris_mode: bool,
    /// Iteration cap for alternating optimization.
    pub ao_max_iterations: usize,
    /// Refusal threshold for exhaustive enumeration (complete candidates).
    pub search_budget: u64,
    /// Distance from a handset's antenna reference point to its surface
    /// patch, meters (`d'` in the far-field ratio).
    pub ris_patch_offset_m: f64,
    /// Handsets reachable by the recruitment broadcast; defaults to
    /// `n_cooperating_ues` when absent.
    pub n_candidate_ues: Option<usize>,
    /// Probability that a polled handset agrees to cooperate.
    pub accept_probability: f64,
    /// Probability that a handset never acknowledges the estimation start.
    pub ack_timeout_probability: f64,
    /// Total pilot energy per handset during channel estimation.
    pub pilot_energy: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_tx_antennas: 12,
            n_rx_antennas: 16,
            n_tx_rf_chains: 8,
            n_rx_rf_chains: 8,
            n_streams: 8,
            n_cooperating_ues: 12,
            ris_elements_per_ue: 1,
            phase_cardinality: 3,
            symbol_power: 1.0,
            noise_power: 1e-10,
            carrier_frequency_hz: 28e9,
            tx_rx_distance_m: 60.0,
            element_spacing_multiplier: 1.0,
            ao_tolerance: 1e-4,
            near_optimality_gap: 0.01,
            rng_seed: 1,
            n_symbols: 200,
            constellation_order: 64,
            ue_ris_mode: true,
            ao_max_iterations: 50,
            search_budget: 10_000_000,
            ris_patch_offset_m: 0.05,
            n_candidate_ues: None,
            accept_probability: 1.0,
            ack_timeout_probability: 0.0,
            pilot_energy: 1.0,
        }
    }
}

/// One violated configuration rule.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigViolation {
    #[error("streams exceed TX RF chains ({n} > {rf})")]
    StreamsExceedTxRf { n: usize, rf: usize },
    #[error("streams exceed RX RF chains ({n} > {rf})")]
    StreamsExceedRxRf { n: usize, rf: usize },
    #[error("TX RF chains exceed TX antennas ({rf} > {ant})")]
    TxRfExceedAntennas { rf: usize, ant: usize },
    #[error("RX RF chains exceed RX antennas ({rf} > {ant})")]
    RxRfExceedAntennas { rf: usize, ant: usize },
    #[error("handset-mounted surface limited to 4 elements, got {m}")]
    UeSurfaceTooLarge { m: usize },
    #[error("{field} must be at least 1")]
    ZeroCount { field: &'static str },
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error("{field} must be non-negative")]
    Negative { field: &'static str },
    #[error("constellation order {order} is not a square QAM size with power-of-two side")]
    BadConstellation { order: usize },
    #[error("{field} must lie in [0, 1], got {p}")]
    BadProbability { field: &'static str, p: f64 },
    #[error("n_candidate_ues {nd} is below n_cooperating_ues {needed}")]
    TooFewCandidates { nd: usize, needed: usize },
}

impl ScenarioConfig {
    /// Check every rule and return the full list of violations on failure.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (field, value) in [
            ("n_tx_antennas", self.n_tx_antennas),
            ("n_rx_antennas", self.n_rx_antennas),
            ("n_tx_rf_chains", self.n_tx_rf_chains),
            ("n_rx_rf_chains", self.n_rx_rf_chains),
            ("n_streams", self.n_streams),
            ("phase_cardinality", self.phase_cardinality),
            ("n_symbols", self.n_symbols),
        ] {
            if value == 0 {
                v.push(ConfigViolation::ZeroCount { field });
            }
        }
        if self.n_streams > self.n_tx_rf_chains {
            v.push(ConfigViolation::StreamsExceedTxRf {
                n: self.n_streams,
                rf: self.n_tx_rf_chains,
            });
        }
        if self.n_streams > self.n_rx_rf_chains {
            v.push(ConfigViolation::StreamsExceedRxRf {
                n: self.n_streams,
                rf: self.n_rx_rf_chains,
            });
        }
        if self.n_tx_rf_chains > self.n_tx_antennas {
            v.push(ConfigViolation::TxRfExceedAntennas {
                rf: self.n_tx_rf_chains,
                ant: self.n_tx_antennas,
            });
        }
        if self.n_rx_rf_chains > self.n_rx_antennas {
            v.push(ConfigViolation::RxRfExceedAntennas {
                rf: self.n_rx_rf_chains,
                ant: self.n_rx_antennas,
            });
        }
        if self.ue_ris_mode && self.ris_elements_per_ue > 4 {
            v.push(ConfigViolation::UeSurfaceTooLarge {
                m: self.ris_elements_per_ue,
            });
        }
        for (field, value) in [
            ("symbol_power", self.symbol_power),
            ("noise_power", self.noise_power),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("tx_rx_distance_m", self.tx_rx_distance_m),
            ("element_spacing_multiplier", self.element_spacing_multiplier),
            ("ao_tolerance", self.ao_tolerance),
            ("ris_patch_offset_m", self.ris_patch_offset_m),
            ("pilot_energy", self.pilot_energy),
        ] {
            if !(value > 0.0) {
                v.push(ConfigViolation::NonPositive { field });
            }
        }
        if !(self.near_optimality_gap >= 0.0) {
            v.push(ConfigViolation::Negative {
                field: "near_optimality_gap",
            });
        }
        if !valid_qam_order(self.constellation_order) {
            v.push(ConfigViolation::BadConstellation {
                order: self.constellation_order,
            });
        }
        for (field, p) in [
            ("accept_probability", self.accept_probability),
            ("ack_timeout_probability", self.ack_timeout_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(ConfigViolation::BadProbability { field, p });
            }
        }
        if let Some(nd) = self.n_candidate_ues {
            if nd < self.n_cooperating_ues {
                v.push(ConfigViolation::TooFewCandidates {
                    nd,
                    needed: self.n_cooperating_ues,
                });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Parse a TOML config file; unknown keys are errors.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parse TOML text; unknown keys are errors. The result is validated.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigFile(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Number of handsets the recruitment broadcast can reach.
    pub fn candidate_ue_count(&self) -> usize {
        self.n_candidate_ues.unwrap_or(self.n_cooperating_ues)
    }

    /// The discrete phase alphabet for this scenario.
    pub fn phase_set(&self) -> Result<PhaseSet> {
        PhaseSet::new(self.phase_cardinality)
    }
}

fn valid_qam_order(order: usize) -> bool {
    let side = (order as f64).sqrt().round() as usize;
    side * side == order && side.is_power_of_two() && side >= 2
}

/// The alphabet of admissible element phases: `2*pi*m/K` for `m = 0..K`.
///
/// Reproducible from `K` alone, so two processes agree on the meaning of a
/// phase index without exchanging the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    angles: Vec<f64>,
}

impl PhaseSet {
    pub fn new(cardinality: usize) -> Result<Self> {
        if cardinality == 0 {
            return Err(Error::InvalidParameter(
                "phase cardinality must be at least 1".into(),
            ));
        }
        let k = cardinality as f64;
        Ok(PhaseSet {
            angles: (0..cardinality)
                .map(|m| 2.0 * std::f64::consts::PI * m as f64 / k)
                .collect(),
        })
    }

    pub fn cardinality(&self) -> usize {
        self.angles.len()
    }

    /// Phase angle for index `m` (radians in `[0, 2*pi)`).
    pub fn angle(&self, m: usize) -> f64 {
        self.angles[m]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Unit phasor `exp(j*angle(m))`.
    pub fn phasor(&self, m: usize) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.angles[m])
    }
}

/// Placement of all nodes for one trial. Distances in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Geometry {
    pub tx_position: [f64; 3],
    pub rx_position: [f64; 3],
    pub ue_positions: Vec<[f64; 3]>,
    /// Antenna-to-patch offset `d'` on each handset.
    pub patch_offset_m: f64,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

impl Geometry {
    pub fn tx_rx_distance(&self) -> f64 {
        dist(self.tx_position, self.rx_position)
    }

    pub fn tx_ue_distance(&self, ue: usize) -> f64 {
        dist(self.tx_position, self.ue_positions[ue])
    }

    pub fn ue_rx_distance(&self, ue: usize) -> f64 {
        dist(self.ue_positions[ue], self.rx_position)
    }

    /// Smallest segment-to-offset ratio over all handsets and both segments.
    pub fn far_field_ratio(&self) -> f64 {
        (0..self.ue_positions.len())
            .map(|i| self.tx_ue_distance(i).min(self.ue_rx_distance(i)) / self.patch_offset_m)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sample node placement: transmitter at the origin, receiver on the x-axis
/// at the configured distance, and each handset uniform over a disc of radius
/// `0.4 * distance` centered at the midpoint.
///
/// Draws too close to either endpoint (under 0.5 m) or too close for the
/// far-field factorization (segment below `100 * d'`) are rejected and
/// redrawn. Each handset consumes its own randomness stream, so handset `i`
/// lands at the same spot regardless of how many others exist.
pub fn sample_geometry(config: &ScenarioConfig, seed: u64) -> Result<Geometry> {
    let d = config.tx_rx_distance_m;
    let tx = [0.0, 0.0, 0.0];
    let rx = [d, 0.0, 0.0];
    let radius = 0.4 * d;
    let min_clearance = 0.5_f64.max(FAR_FIELD_MIN_RATIO * config.ris_patch_offset_m);
    // a disc reaching closer to an endpoint than the clearance would loop forever
    if 0.5 * d - radius >= 0.0 && 0.5 * d + radius <= min_clearance {
        return Err(Error::InvalidParameter(format!(
            "placement disc (radius {radius:.2} m at {:.2} m) cannot clear {min_clearance:.2} m",
            0.5 * d
        )));
    }
    let mut ue_positions = Vec::with_capacity(config.n_cooperating_ues);
    for i in 0..config.n_cooperating_ues {
        let mut rng = stream(seed, "ue-position", i as u64);
        let mut tries = 0;
        let p = loop {
            let r = radius * rng.gen::<f64>().sqrt();
            let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let p = [0.5 * d + r * th.cos(), r * th.sin(), 0.0];
            if dist(p, tx) >= min_clearance && dist(p, rx) >= min_clearance {
                break p;
            }
            tries += 1;
            if tries > 1_000_000 {
                return Err(Error::InvalidParameter(
                    "geometry sampling failed to find a clear placement".into(),
                ));
            }
        };
        ue_positions.push(p);
    }
    Ok(Geometry {
        tx_position: tx,
        rx_position: rx,
        ue_positions,
        patch_offset_m: config.ris_patch_offset_m,
    })
}
