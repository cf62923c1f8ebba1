//! The stream-error objective: analytic mean squared error of the combined
//! link, and a symbol-level Monte-Carlo check of the same quantity.
//!
//! With end-to-end response `Keff = W H F` and combiner `W`, the error
//! covariance of the `N` spatial streams under unit-variance symbols of
//! power `p` and noise power `sigma_n^2` is
//! `M = p (Keff - I)(Keff - I)^H + sigma_n^2 W W^H`, and the scalar
//! objective is its trace — equivalently
//! `p ||Keff - I||_F^2 + sigma_n^2 ||W||_F^2`. Everything that tunes phases
//! or transceivers in this crate minimizes that trace.

use crate::channel::{assemble_effective_channel, ChannelSet, RisConfiguration};
use crate::linalg::{frob_sq, CMat};
use crate::scenario::ScenarioConfig;
use crate::seeding::stream;
use crate::transceiver::HybridTransceiver;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Error covariance and its trace for one configuration.
#[derive(Debug, Clone)]
pub struct MseReport {
    /// `N x N` stream-error covariance.
    pub mse_matrix: CMat,
    /// Its trace: the scalar objective.
    pub delta: f64,
    /// End-to-end response `W H F` the covariance was built from.
    pub keff: CMat,
    /// Combined receive filter `W`.
    pub w_combined: CMat,
}

/// Build the error covariance from already-computed parts.
///
/// Exposed separately so fixtures can exercise degenerate cases (exact
/// identity response, zero combiner) that no physical design produces.
pub fn mse_from_parts(keff: &CMat, w: &CMat, config: &ScenarioConfig) -> MseReport {
    let n = keff.nrows();
    let p = config.symbol_power;
    let s2 = config.noise_power;
    let mut dev = keff.clone();
    for i in 0..n {
        dev[(i, i)] -= Complex64::from(1.0);
    }
    let mse_matrix = (&dev * dev.adjoint()).scale(p) + (w * w.adjoint()).scale(s2);
    let delta = p * frob_sq(&dev) + s2 * frob_sq(w);
    MseReport {
        mse_matrix,
        delta,
        keff: keff.clone(),
        w_combined: w.clone(),
    }
}

/// Analytic stream MSE of a tuned link.
pub fn mse_matrix(
    channels: &ChannelSet,
    ris: &RisConfiguration,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
) -> Result<MseReport> {
    let h = assemble_effective_channel(channels, ris)?;
    let w = transceiver.combiner();
    let keff = &w * h * transceiver.precoder();
    let report = mse_from_parts(&keff, &w, config);
    if !report.delta.is_finite() {
        return Err(Error::NonFinite("stream MSE".into()));
    }
    Ok(report)
}

/// Scalar objective only.
pub fn objective(
    channels: &ChannelSet,
    ris: &RisConfiguration,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
) -> Result<f64> {
    Ok(mse_matrix(channels, ris, transceiver, config)?.delta)
}

/// Unit-average-energy square QAM constellation.
pub fn qam_constellation(order: usize) -> Result<Vec<Complex64>> {
    let side = (order as f64).sqrt().round() as usize;
    if side * side != order || !side.is_power_of_two() || side < 2 {
        return Err(Error::InvalidParameter(format!(
            "constellation order {order} is not a square QAM size with power-of-two side"
        )));
    }
    let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
    let mut points = Vec::with_capacity(order);
    for a in 0..side {
        for b in 0..side {
            points.push(Complex64::new(
                scale * (2.0 * a as f64 - side as f64 + 1.0),
                scale * (2.0 * b as f64 - side as f64 + 1.0),
            ));
        }
    }
    Ok(points)
}

/// Outcome of a symbol-level simulation.
#[derive(Debug, Clone, Copy)]
pub struct LinkStats {
    /// Average of `|| y_s - x_s ||^2` over the simulated symbols.
    pub empirical_mse: f64,
    /// Standard error of that average.
    pub std_err: f64,
    pub n_symbols: usize,
}

/// Simulate `config.n_symbols` random QAM vectors through the tuned link and
/// measure the empirical stream MSE. Symbol and noise draws come from
/// separate streams of `seed`, so the same seed replays bit for bit.
pub fn simulate_link(
    channels: &ChannelSet,
    ris: &RisConfiguration,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<LinkStats> {
    let h = assemble_effective_channel(channels, ris)?;
    let w = transceiver.combiner();
    let keff = &w * h * transceiver.precoder();
    simulate_from_parts(&keff, &w, config, seed, Complex64::from(1.0))
}

/// Core simulation on explicit parts; `rotation` multiplies every transmit
/// vector (a common phase reference shared by both ends).
pub(crate) fn simulate_from_parts(
    keff: &CMat,
    w: &CMat,
    config: &ScenarioConfig,
    seed: u64,
    rotation: Complex64,
) -> Result<LinkStats> {
    let n = keff.nrows();
    let n_r = w.ncols();
    let points = qam_constellation(config.constellation_order)?;
    let amp = config.symbol_power.sqrt();
    let noise_sd = (config.noise_power / 2.0).sqrt();
    let normal = Normal::new(0.0, noise_sd).map_err(|_| {
        Error::InvalidParameter("noise power must be finite and positive".into())
    })?;
    let mut rng_sym = stream(seed, "symbols", 0);
    let mut rng_noise = stream(seed, "noise", 0);

    let s = config.n_symbols;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut x = vec![Complex64::default(); n];
    let mut y = vec![Complex64::default(); n];
    for _ in 0..s {
        for xi in x.iter_mut() {
            *xi = points[rng_sym.gen_range(0..points.len())] * amp * rotation;
        }
        // y = Keff x + W n
        for i in 0..n {
            let mut acc = Complex64::default();
            for j in 0..n {
                acc += keff[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        for jn in 0..n_r {
            let nz = Complex64::new(normal.sample(&mut rng_noise), normal.sample(&mut rng_noise));
            for i in 0..n {
                y[i] += w[(i, jn)] * nz;
            }
        }
        let err: f64 = (0..n).map(|i| (y[i] - x[i]).norm_sqr()).sum();
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / s as f64;
    let var = (sum_sq / s as f64 - mean * mean).max(0.0);
    if !mean.is_finite() {
        return Err(Error::NonFinite("empirical MSE".into()));
    }
    Ok(LinkStats {
        empirical_mse: mean,
        std_err: (var / s as f64).sqrt(),
        n_symbols: s,
    })
}
