//! Channel generation, surface phase configurations, and assembly of the
//! effective end-to-end channel.
//!
//! Every link (direct, transmitter-to-handset, handset-to-receiver) follows a
//! ray-based model: a dominant line-of-sight ray 10 dB above a small group of
//! scattered rays, plus a faint isotropic residual (1% of the diffuse power)
//! that keeps the matrices full rank. Average gains follow free-space path
//! loss; a reflected path through a handset carries the loss of its total
//! flight length split evenly across the handset's elements, so a surface's
//! total captured power is independent of how it is partitioned.

use crate::linalg::CMat;
use crate::scenario::{Geometry, PhaseSet, ScenarioConfig};
use crate::seeding::stream;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::{Read, Write};
use std::path::Path;

/// Ratio of line-of-sight to scattered power (10 dB).
const RICIAN_K: f64 = 10.0;
/// Fraction of scattered power assigned to the isotropic full-rank residual.
const DIFFUSE_FRACTION: f64 = 0.01;
/// Scattered rays in the direct link.
const DIRECT_RAYS: usize = 3;
/// Scattered rays in each reflected segment.
const SEGMENT_RAYS: usize = 2;

/// Free-space power gain over `distance` at wavelength `lambda` (both meters).
pub fn friis_gain(lambda: f64, distance: f64) -> f64 {
    let x = lambda / (4.0 * std::f64::consts::PI * distance);
    x * x
}

/// All matrices describing one trial's propagation environment:
/// the direct link `h_direct` (`N_r x N_t`), and per handset the incident
/// segment `g[i]` (`M x N_t`) and departing segment `q[i]` (`N_r x M`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_direct: CMat,
    pub g: Vec<CMat>,
    pub q: Vec<CMat>,
}

impl ChannelSet {
    /// Checked construction: segment dimensions must agree with the direct
    /// link and with each other.
    pub fn new(h_direct: CMat, g: Vec<CMat>, q: Vec<CMat>) -> Result<Self> {
        let (n_r, n_t) = h_direct.shape();
        if g.len() != q.len() {
            return Err(Error::DimensionMismatch {
                context: "channel set",
                expected: format!("{} departing segments", g.len()),
                found: format!("{}", q.len()),
            });
        }
        let m = g.first().map_or(0, |x| x.nrows());
        for (i, (gi, qi)) in g.iter().zip(&q).enumerate() {
            if gi.shape() != (m, n_t) || qi.shape() != (n_r, m) {
                return Err(Error::DimensionMismatch {
                    context: "channel set",
                    expected: format!("g[{i}]: {m}x{n_t}, q[{i}]: {n_r}x{m}"),
                    found: format!(
                        "g[{i}]: {}x{}, q[{i}]: {}x{}",
                        gi.nrows(),
                        gi.ncols(),
                        qi.nrows(),
                        qi.ncols()
                    ),
                });
            }
        }
        Ok(ChannelSet { h_direct, g, q })
    }

    pub fn n_ues(&self) -> usize {
        self.g.len()
    }

    /// Elements per handset (0 when no handsets cooperate).
    pub fn elements_per_ue(&self) -> usize {
        self.g.first().map_or(0, |x| x.nrows())
    }

    pub fn n_rx(&self) -> usize {
        self.h_direct.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_direct.ncols()
    }

    /// Serialize to the binary container (see `write_container`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_container(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_container(&mut f)
    }

    /// Binary layout: magic `URCS`, version, four u32 dimensions
    /// (`n_r, n_t, n_d, m`), then every matrix row-major as little-endian
    /// f64 (re, im) pairs: the direct link, all `g[i]`, all `q[i]`.
    /// Entries survive a round trip bit for bit.
    pub fn write_container<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"URCS")?;
        w.write_all(&1u32.to_le_bytes())?;
        for dim in [
            self.n_rx() as u32,
            self.n_tx() as u32,
            self.n_ues() as u32,
            self.elements_per_ue() as u32,
        ] {
            w.write_all(&dim.to_le_bytes())?;
        }
        let mut dump = |m: &CMat| -> std::io::Result<()> {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].re.to_le_bytes())?;
                    w.write_all(&m[(i, j)].im.to_le_bytes())?;
                }
            }
            Ok(())
        };
        dump(&self.h_direct)?;
        for gi in &self.g {
            dump(gi)?;
        }
        for qi in &self.q {
            dump(qi)?;
        }
        Ok(())
    }

    pub fn read_container<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::BadContainer("truncated header".into()))?;
        if &magic != b"URCS" {
            return Err(Error::BadContainer("bad magic".into()));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)
                .map_err(|_| Error::BadContainer("truncated header".into()))?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next_u32(r)?;
        if version != 1 {
            return Err(Error::BadContainer(format!("unknown version {version}")));
        }
        let n_r = next_u32(r)? as usize;
        let n_t = next_u32(r)? as usize;
        let n_d = next_u32(r)? as usize;
        let m = next_u32(r)? as usize;
        let load = |rows: usize, cols: usize, r: &mut R| -> Result<CMat> {
            let mut buf = vec![0u8; rows * cols * 16];
            r.read_exact(&mut buf)
                .map_err(|_| Error::BadContainer("truncated payload".into()))?;
            let mut out = CMat::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let off = (i * cols + j) * 16;
                    let re = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
                    let im = f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap());
                    out[(i, j)] = Complex64::new(re, im);
                }
            }
            Ok(out)
        };
        let h_direct = load(n_r, n_t, r)?;
        let mut g = Vec::with_capacity(n_d);
        for _ in 0..n_d {
            g.push(load(m, n_t, r)?);
        }
        let mut q = Vec::with_capacity(n_d);
        for _ in 0..n_d {
            q.push(load(n_r, m, r)?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::BadContainer("trailing bytes".into()));
        }
        ChannelSet::new(h_direct, g, q)
    }
}

/// Half-wavelength-referenced uniform linear array response: entry `i` is
/// `exp(j * pi * spacing_mult * i * sin(theta)) / sqrt(n)`.
fn steering(n: usize, theta: f64, spacing_mult: f64) -> Vec<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|i| {
            Complex64::from_polar(
                scale,
                std::f64::consts::PI * spacing_mult * i as f64 * theta.sin(),
            )
        })
        .collect()
}

/// Draw one link matrix with unit per-entry average power, then scale so the
/// per-entry average power equals `gain`.
fn draw_link(
    rng: &mut ChaCha8Rng,
    nrows: usize,
    ncols: usize,
    row_spacing: f64,
    col_spacing: f64,
    n_rays: usize,
    gain: f64,
) -> CMat {
    let half_pi = 0.5 * std::f64::consts::PI;
    let normal = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
    let ray = |rng: &mut ChaCha8Rng, amp: Complex64| -> CMat {
        let theta_r = rng.gen_range(-half_pi..half_pi);
        let theta_c = rng.gen_range(-half_pi..half_pi);
        let ar = steering(nrows, theta_r, row_spacing);
        let ac = steering(ncols, theta_c, col_spacing);
        CMat::from_fn(nrows, ncols, |i, j| amp * ar[i] * ac[j].conj())
    };

    // dominant ray with a uniform global phase; per-entry modulus is constant
    let psi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let los = ray(
        rng,
        Complex64::from_polar(((nrows * ncols) as f64).sqrt(), psi),
    );

    let ray_scale = ((nrows * ncols) as f64 / n_rays as f64).sqrt();
    let mut scattered = CMat::zeros(nrows, ncols);
    for _ in 0..n_rays {
        let alpha = Complex64::new(normal.sample(rng), normal.sample(rng));
        scattered += ray(rng, alpha * ray_scale);
    }
    let diffuse = crate::linalg::complex_gaussian(rng, nrows, ncols, 1.0);

    let k = RICIAN_K;
    let los_w = (k / (k + 1.0)).sqrt();
    let nlos_w = (1.0 / (k + 1.0)).sqrt();
    let mixed = los * Complex64::from(los_w)
        + (scattered * Complex64::from((1.0 - DIFFUSE_FRACTION).sqrt())
            + diffuse * Complex64::from(DIFFUSE_FRACTION.sqrt()))
            * Complex64::from(nlos_w);
    mixed * Complex64::from(gain.sqrt())
}

/// Draw every link for one trial.
///
/// The direct link's average squared Frobenius norm is
/// `N_r * N_t * friis(lambda, d_tx_rx)`. Each reflected path (handset `i`,
/// element `m`) is normalized so the whole two-segment cascade, summed over a
/// handset's elements, matches free-space loss over the total flight length:
/// per-entry powers of `g[i]` and `q[i]` are both
/// `sqrt(friis(lambda, d1+d2) / M)`.
///
/// Each link draws from its own stream addressed by `(seed, label, handset)`,
/// so the direct link is identical across scenarios that differ only in the
/// surface layout — the property that makes paired arm comparisons work.
pub fn generate_channels(
    config: &ScenarioConfig,
    geometry: &Geometry,
    seed: u64,
) -> Result<ChannelSet> {
    if geometry.ue_positions.len() != config.n_cooperating_ues {
        return Err(Error::DimensionMismatch {
            context: "generate_channels",
            expected: format!("{} handset positions", config.n_cooperating_ues),
            found: format!("{}", geometry.ue_positions.len()),
        });
    }
    let lambda = config.wavelength_m();
    let (n_r, n_t, m) = (
        config.n_rx_antennas,
        config.n_tx_antennas,
        config.ris_elements_per_ue,
    );
    let ris_spacing = config.element_spacing_multiplier;

    let mut rng = stream(seed, "direct-link", 0);
    let h_direct = draw_link(
        &mut rng,
        n_r,
        n_t,
        1.0,
        1.0,
        DIRECT_RAYS,
        friis_gain(lambda, geometry.tx_rx_distance()),
    );

    let mut g = Vec::with_capacity(config.n_cooperating_ues);
    let mut q = Vec::with_capacity(config.n_cooperating_ues);
    for i in 0..config.n_cooperating_ues {
        let total = geometry.tx_ue_distance(i) + geometry.ue_rx_distance(i);
        let per_entry = (friis_gain(lambda, total) / m as f64).sqrt();
        let mut rng_g = stream(seed, "incident-segment", i as u64);
        g.push(draw_link(
            &mut rng_g,
            m,
            n_t,
            ris_spacing,
            1.0,
            SEGMENT_RAYS,
            per_entry,
        ));
        let mut rng_q = stream(seed, "departing-segment", i as u64);
        q.push(draw_link(
            &mut rng_q,
            n_r,
            m,
            1.0,
            ris_spacing,
            SEGMENT_RAYS,
            per_entry,
        ));
    }
    ChannelSet::new(h_direct, g, q)
}

/// One phase index per element per handset, together with the alphabet that
/// gives the indices meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration {
    phase_indices: Vec<Vec<u16>>,
    phase_set: PhaseSet,
}

impl RisConfiguration {
    /// Checked construction: every index must name an alphabet entry.
    pub fn new(phase_indices: Vec<Vec<u16>>, phase_set: PhaseSet) -> Result<Self> {
        let k = phase_set.cardinality() as u16;
        for (i, ue) in phase_indices.iter().enumerate() {
            if let Some(&bad) = ue.iter().find(|&&x| x >= k) {
                return Err(Error::InvalidParameter(format!(
                    "phase index {bad} on handset {i} outside alphabet of size {k}"
                )));
            }
        }
        Ok(RisConfiguration {
            phase_indices,
            phase_set,
        })
    }

    /// The all-zero (reference phase) configuration.
    pub fn zeros(n_ues: usize, elements: usize, phase_set: PhaseSet) -> Self {
        RisConfiguration {
            phase_indices: vec![vec![0; elements]; n_ues],
            phase_set,
        }
    }

    pub fn phase_indices(&self) -> &[Vec<u16>] {
        &self.phase_indices
    }

    pub fn phase_set(&self) -> &PhaseSet {
        &self.phase_set
    }

    pub fn n_ues(&self) -> usize {
        self.phase_indices.len()
    }

    /// Unit phasor applied by element `m` of handset `ue`.
    pub fn phasor(&self, ue: usize, m: usize) -> Complex64 {
        self.phase_set.phasor(self.phase_indices[ue][m] as usize)
    }

    /// The diagonal reflection matrix of handset `ue`.
    pub fn phase_matrix(&self, ue: usize) -> Result<CMat> {
        let indices = self
            .phase_indices
            .get(ue)
            .ok_or_else(|| Error::InvalidParameter(format!("handset index {ue} out of range")))?;
        let n = indices.len();
        let mut out = CMat::zeros(n, n);
        for (m, &idx) in indices.iter().enumerate() {
            out[(m, m)] = self.phase_set.phasor(idx as usize);
        }
        Ok(out)
    }

    /// Copy with one element's index replaced (used by searches and tests).
    pub fn with_index(&self, ue: usize, m: usize, idx: u16) -> Result<Self> {
        let mut indices = self.phase_indices.clone();
        indices[ue][m] = idx;
        RisConfiguration::new(indices, self.phase_set.clone())
    }
}

/// The end-to-end channel seen by the transceiver: the direct link plus every
/// reflected path with its programmed phase,
/// `H = H_d + sum_i q[i] * Phi_i * g[i]`.
pub fn assemble_effective_channel(
    channels: &ChannelSet,
    ris: &RisConfiguration,
) -> Result<CMat> {
    if ris.n_ues() != channels.n_ues() {
        return Err(Error::DimensionMismatch {
            context: "assemble_effective_channel",
            expected: format!("{} handsets", channels.n_ues()),
            found: format!("{}", ris.n_ues()),
        });
    }
    let m = channels.elements_per_ue();
    let mut h = channels.h_direct.clone();
    for i in 0..channels.n_ues() {
        if ris.phase_indices()[i].len() != m {
            return Err(Error::DimensionMismatch {
                context: "assemble_effective_channel",
                expected: format!("{m} elements on handset {i}"),
                found: format!("{}", ris.phase_indices()[i].len()),
            });
        }
        for e in 0..m {
            let phi = ris.phasor(i, e);
            let q_col = channels.q[i].column(e);
            let g_row = channels.g[i].row(e);
            for c in 0..h.ncols() {
                let s = phi * g_row[c];
                for r in 0..h.nrows() {
                    h[(r, c)] += q_col[r] * s;
                }
            }
        }
    }
    for z in h.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite("assembled effective channel".into()));
        }
    }
    Ok(h)
}
