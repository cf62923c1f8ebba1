//! Hybrid analog/digital transceiver design from the singular value
//! decomposition of the effective channel.
//!
//! The analog stages are phase-only (every entry has fixed modulus), the
//! digital stages are unconstrained, and the product must approximate the
//! top singular subspaces of the channel. The factorization alternates two
//! kinds of step: a projection step (exact least-squares digital factor, then
//! analog phases snapped to the phase of `target * digital^H`) that moves
//! fast but may overshoot, and an entry-wise phase coordinate descent that
//! only ever lowers the residual. Projection steps are accepted only while
//! they improve, then coordinate descent polishes to a local minimum, so the
//! recorded residual history is non-increasing by construction.

use crate::linalg::{canonicalize_column, complete_unitary, frob, CMat};
use crate::scenario::ScenarioConfig;
use crate::seeding::stream;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Iteration cap for the projection phase of one run.
const FACTORIZE_MAX_ITERS: usize = 200;
/// Sweep cap for the polish phase (cheap entry-wise steps).
const POLISH_MAX_SWEEPS: usize = 4000;
/// Stop once the residual improves by less than this between iterations.
const FACTORIZE_STALL: f64 = 1e-8;
/// Extra polish stop: a sweep that recovers less than this fraction of the
/// remaining residual is not worth another pass. Without it, targets whose
/// floor is far from zero grind out the full sweep budget in 1e-8 crumbs.
const POLISH_RELATIVE_STALL: f64 = 1e-4;
/// Polish sweeps each restart gets while the finalists are being chosen;
/// only the best `POLISH_FINALISTS` continue to `POLISH_MAX_SWEEPS`. Keeping
/// two finalists guards against a basin that descends slowly early but
/// reaches a lower floor, while still bounding the cost of losing restarts.
const POLISH_SCREEN_SWEEPS: usize = 200;
/// Screened restarts that get the full polish budget.
const POLISH_FINALISTS: usize = 2;
/// Random restarts tried in addition to the deterministic warm start.
const FACTORIZE_RESTARTS: usize = 4;

/// Full singular value decomposition `H = U * diag(sigma) * V^H` with square
/// unitary factors and singular values sorted in descending order.
///
/// Columns follow a fixed phase convention (first entry of nonnegligible
/// modulus is real and positive, applied jointly to paired `u`/`v` columns),
/// and the thin factors are completed to square unitaries deterministically,
/// so equal inputs yield bitwise equal outputs.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    /// `N_r x N_r` unitary.
    pub u: CMat,
    /// Singular values, length `min(N_r, N_t)`, descending.
    pub sigma: Vec<f64>,
    /// `N_t x N_t` unitary.
    pub v: CMat,
}

impl SvdTriple {
    /// First `n` columns of `u`.
    pub fn u_lead(&self, n: usize) -> CMat {
        self.u.columns(0, n).into_owned()
    }

    /// First `n` columns of `v`.
    pub fn v_lead(&self, n: usize) -> CMat {
        self.v.columns(0, n).into_owned()
    }
}

/// Decompose `h`; fails on non-finite input.
pub fn svd_decompose(h: &CMat) -> Result<SvdTriple> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix handed to svd_decompose".into()));
    }
    let (n_r, n_t) = h.shape();
    let rank_max = n_r.min(n_t);
    let svd = h.clone().svd(true, true);
    let mut u_thin = svd.u.expect("u requested");
    let mut v_thin = svd.v_t.expect("v_t requested").adjoint();
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    // joint phase convention: rotating a u column and its paired v column by
    // the same unit factor leaves u * sigma * v^H unchanged
    for k in 0..rank_max {
        let phase = canonicalize_column(&mut u_thin.column_mut(k), 1e-12);
        for z in v_thin.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    let mut u = complete_unitary(&u_thin);
    let mut v = complete_unitary(&v_thin);
    for k in rank_max..n_r {
        canonicalize_column(&mut u.column_mut(k), 1e-12);
    }
    for k in rank_max..n_t {
        canonicalize_column(&mut v.column_mut(k), 1e-12);
    }
    Ok(SvdTriple { u, sigma, v })
}

/// One side of the hybrid architecture after factorization.
#[derive(Debug, Clone)]
pub struct FactorizationReport {
    /// Final residual `|| target - analog * digital ||_F` of the winning
    /// restart, before the norm-constraint rescaling.
    pub residual: f64,
    /// Residual after every iteration of the winning restart; non-increasing.
    pub residual_history: Vec<f64>,
    /// Which restart won (0 is the deterministic warm start).
    pub restart: usize,
}

/// Transmit-side factors: `f_analog` is `N_t x N_rt` phase-only,
/// `f_digital` is `N_rt x N`.
#[derive(Debug, Clone)]
pub struct PrecoderDesign {
    pub f_analog: CMat,
    pub f_digital: CMat,
    pub report: FactorizationReport,
}

/// Receive-side factors stored in application form: the combiner applied to
/// the antenna signal is `w_digital_h * w_analog_h` (`N x N_r`).
#[derive(Debug, Clone)]
pub struct CombinerDesign {
    /// `N_rs x N_r`, rows of fixed modulus `1/sqrt(N_r)`.
    pub w_analog_h: CMat,
    /// `N x N_rs`.
    pub w_digital_h: CMat,
    pub report: FactorizationReport,
}

/// Both sides bundled; the working unit the rest of the pipeline passes
/// around.
#[derive(Debug, Clone)]
pub struct HybridTransceiver {
    pub f_analog: CMat,
    pub f_digital: CMat,
    pub w_analog_h: CMat,
    pub w_digital_h: CMat,
}

impl HybridTransceiver {
    /// Effective precoder `F = f_analog * f_digital` (`N_t x N`).
    pub fn precoder(&self) -> CMat {
        &self.f_analog * &self.f_digital
    }

    /// Effective combiner `W = w_digital_h * w_analog_h` (`N x N_r`).
    pub fn combiner(&self) -> CMat {
        &self.w_digital_h * &self.w_analog_h
    }
}

/// Design the transmit side against the top-`N` right singular subspace.
pub fn design_hybrid_precoder(svd: &SvdTriple, config: &ScenarioConfig) -> Result<PrecoderDesign> {
    let n = config.n_streams;
    let n_rt = config.n_tx_rf_chains;
    let n_t = config.n_tx_antennas;
    check_side(svd.v.nrows(), n_t, n, n_rt, "precoder")?;
    let target = svd.v_lead(n);
    let hint = svd.v_lead(n_rt.min(svd.v.ncols()));
    let (f_analog, mut f_digital, report) = factorize(
        &target,
        n_rt,
        &hint,
        1.0 / (n_t as f64).sqrt(),
        config.rng_seed,
        "precoder-restart",
    );
    rescale_to_power(&f_analog, &mut f_digital, n as f64);
    Ok(PrecoderDesign {
        f_analog,
        f_digital,
        report,
    })
}

/// Design the receive side against the top-`N` left singular subspace.
pub fn design_hybrid_combiner(svd: &SvdTriple, config: &ScenarioConfig) -> Result<CombinerDesign> {
    let n = config.n_streams;
    let n_rs = config.n_rx_rf_chains;
    let n_r = config.n_rx_antennas;
    check_side(svd.u.nrows(), n_r, n, n_rs, "combiner")?;
    let target = svd.u_lead(n);
    let hint = svd.u_lead(n_rs.min(svd.u.ncols()));
    let (w_analog, mut w_digital, report) = factorize(
        &target,
        n_rs,
        &hint,
        1.0 / (n_r as f64).sqrt(),
        config.rng_seed,
        "combiner-restart",
    );
    rescale_to_power(&w_analog, &mut w_digital, n as f64);
    Ok(CombinerDesign {
        w_analog_h: w_analog.adjoint(),
        w_digital_h: w_digital.adjoint(),
        report,
    })
}

/// Design both sides and bundle them.
pub fn design_transceiver(
    svd: &SvdTriple,
    config: &ScenarioConfig,
) -> Result<(HybridTransceiver, FactorizationReport, FactorizationReport)> {
    let p = design_hybrid_precoder(svd, config)?;
    let c = design_hybrid_combiner(svd, config)?;
    Ok((
        HybridTransceiver {
            f_analog: p.f_analog,
            f_digital: p.f_digital,
            w_analog_h: c.w_analog_h,
            w_digital_h: c.w_digital_h,
        },
        p.report,
        c.report,
    ))
}

fn check_side(actual: usize, n_ant: usize, n: usize, n_rf: usize, side: &'static str) -> Result<()> {
    if actual != n_ant {
        return Err(Error::DimensionMismatch {
            context: "transceiver design",
            expected: format!("{n_ant} antennas"),
            found: format!("{actual}"),
        });
    }
    if n > n_rf || n_rf > n_ant {
        return Err(Error::InvalidParameter(format!(
            "{side}: need streams <= RF chains <= antennas, got {n} / {n_rf} / {n_ant}"
        )));
    }
    Ok(())
}

/// Scale the digital factor so `||analog * digital||_F^2` equals `power`.
fn rescale_to_power(analog: &CMat, digital: &mut CMat, power: f64) {
    let current = frob(&(analog * &*digital));
    if current > 0.0 {
        let s = (power.sqrt()) / current;
        *digital *= Complex64::from(s);
    }
}

/// Alternating minimization of `|| target - a * d ||_F` with `a` constrained
/// to entries of modulus `unit`. Returns the best `(a, d, report)` over the
/// deterministic hint start plus `FACTORIZE_RESTARTS` random starts.
fn factorize(
    target: &CMat,
    n_rf: usize,
    hint: &CMat,
    unit: f64,
    seed: u64,
    restart_label: &str,
) -> (CMat, CMat, FactorizationReport) {
    let n_ant = target.nrows();
    let mut screened: Vec<(CMat, CMat, FactorizationReport)> = Vec::new();
    for restart in 0..=FACTORIZE_RESTARTS {
        let a0 = if restart == 0 {
            // phases of the hint columns (cycled if the hint is narrow)
            CMat::from_fn(n_ant, n_rf, |i, j| {
                let z = hint[(i, j % hint.ncols())];
                if z.norm() > 1e-15 {
                    Complex64::from_polar(unit, z.arg())
                } else {
                    Complex64::from(unit)
                }
            })
        } else {
            let mut rng = stream(seed, restart_label, restart as u64);
            CMat::from_fn(n_ant, n_rf, |_, _| {
                Complex64::from_polar(unit, rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            })
        };
        screened.push(alternate_budgeted(target, a0, unit, restart, POLISH_SCREEN_SWEEPS));
    }
    // ties broken toward the lower restart index for determinism
    screened.sort_by(|x, y| {
        x.2.residual
            .partial_cmp(&y.2.residual)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.2.restart.cmp(&y.2.restart))
    });
    screened.truncate(POLISH_FINALISTS);
    let mut best: Option<(CMat, CMat, FactorizationReport)> = None;
    for (mut a, mut d, mut report) in screened {
        // each finalist finishes the polish it started during screening
        let mut best_r = report.residual;
        polish(
            target,
            &mut a,
            &mut d,
            unit,
            &mut best_r,
            &mut report.residual_history,
            POLISH_MAX_SWEEPS.saturating_sub(POLISH_SCREEN_SWEEPS),
        );
        report.residual = best_r;
        let better = match &best {
            None => true,
            Some((_, _, b)) => report.residual < b.residual,
        };
        if better {
            best = Some((a, d, report));
        }
    }
    best.expect("at least one restart runs")
}

/// Full-budget run of a single start; the reference the restart-budget
/// oracle in the tests is built on.
#[cfg(test)]
fn alternate(
    target: &CMat,
    a: CMat,
    unit: f64,
    restart: usize,
) -> (CMat, CMat, FactorizationReport) {
    alternate_budgeted(target, a, unit, restart, POLISH_MAX_SWEEPS)
}

fn alternate_budgeted(
    target: &CMat,
    mut a: CMat,
    unit: f64,
    restart: usize,
    polish_budget: usize,
) -> (CMat, CMat, FactorizationReport) {
    let mut d = solve_digital(&a, target);
    let mut best_r = frob(&(target - &a * &d));
    let mut residual_history = vec![best_r];
    let mut iters = 1;

    // fast phase: projection alternation, accepted only while it improves
    while iters < FACTORIZE_MAX_ITERS {
        let a_next = CMat::from_fn(a.nrows(), a.ncols(), |i, k| {
            let z: Complex64 = (0..target.ncols())
                .map(|j| target[(i, j)] * d[(k, j)].conj())
                .sum();
            if z.norm() > 1e-300 {
                Complex64::from_polar(unit, z.arg())
            } else {
                a[(i, k)]
            }
        });
        let d_next = solve_digital(&a_next, target);
        let r = frob(&(target - &a_next * &d_next));
        iters += 1;
        if r < best_r {
            a = a_next;
            d = d_next;
            residual_history.push(r);
            if best_r - r < FACTORIZE_STALL {
                best_r = r;
                break;
            }
            best_r = r;
        } else {
            break;
        }
    }

    polish(
        target,
        &mut a,
        &mut d,
        unit,
        &mut best_r,
        &mut residual_history,
        polish_budget,
    );

    let residual = best_r;
    (
        a,
        d,
        FactorizationReport {
            residual,
            residual_history,
            restart,
        },
    )
}

/// Strictly descending coordinate steps toward a local minimum; resumable, so
/// a run screened with a small budget can later be continued from where it
/// stopped without breaking the recorded (non-increasing) residual history.
fn polish(
    target: &CMat,
    a: &mut CMat,
    d: &mut CMat,
    unit: f64,
    best_r: &mut f64,
    residual_history: &mut Vec<f64>,
    budget: usize,
) {
    for _ in 0..budget {
        descend_analog(a, d, target, unit);
        *d = solve_digital(a, target);
        let r = frob(&(target - &*a * &*d));
        residual_history.push(r.min(*best_r));
        if *best_r - r < FACTORIZE_STALL.max(POLISH_RELATIVE_STALL * r) {
            *best_r = best_r.min(r);
            break;
        }
        *best_r = r;
    }
}

/// Exact least-squares digital factor via normal equations; the analog
/// matrix is tiny and generically well conditioned, with an identity fallback
/// ridge if not.
fn solve_digital(a: &CMat, target: &CMat) -> CMat {
    let gram = a.adjoint() * a;
    let rhs = a.adjoint() * target;
    let n = gram.nrows();
    let mut reg = gram.clone();
    for attempt in 0..6 {
        if let Some(sol) = reg.clone().lu().solve(&rhs) {
            if sol.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return sol;
            }
        }
        let ridge = 1e-12 * 10f64.powi(attempt) * (frob(&gram) + 1.0);
        reg = gram.clone();
        for i in 0..n {
            reg[(i, i)] += Complex64::from(ridge);
        }
    }
    CMat::zeros(a.ncols(), target.ncols())
}

/// One sweep of entry-wise phase coordinate descent on the analog factor.
///
/// For entry `(i, k)` the objective restricted to that entry is
/// `|| r_i + a_ik d_k ||^2` over `|a_ik| = unit`, minimized in closed form by
/// aligning `a_ik` with `(R D^H)_ik + a_ik (D D^H)_kk`. Each update can only
/// lower the residual, and the running residual row is patched in place.
fn descend_analog(a: &mut CMat, d: &CMat, target: &CMat, unit: f64) {
    let mut residual = target - &*a * d;
    let dd = d * d.adjoint();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let mut b = dd[(k, k)] * a[(i, k)];
            for j in 0..d.ncols() {
                b += residual[(i, j)] * d[(k, j)].conj();
            }
            let new = if b.norm() > 1e-300 {
                Complex64::from_polar(unit, b.arg())
            } else {
                a[(i, k)]
            };
            let delta = a[(i, k)] - new;
            if delta.norm() > 0.0 {
                for j in 0..d.ncols() {
                    residual[(i, j)] += delta * d[(k, j)];
                }
                a[(i, k)] = new;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, frob_sq};
    use crate::seeding::stream;

    fn cfg(n_t: usize, n_r: usize, n_rt: usize, n_rs: usize, n: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_tx_antennas: n_t,
            n_rx_antennas: n_r,
            n_tx_rf_chains: n_rt,
            n_rx_rf_chains: n_rs,
            n_streams: n,
            ..Default::default()
        }
    }

    fn random_h(seed: u64, n_r: usize, n_t: usize) -> CMat {
        let mut rng = stream(seed, "transceiver-test", 0);
        complex_gaussian(&mut rng, n_r, n_t, 1.0)
    }

    #[test]
    fn svd_reconstructs_and_is_unitary() {
        for seed in 0..8u64 {
            let h = random_h(seed, 6, 4);
            let svd = svd_decompose(&h).unwrap();
            let mut s = CMat::zeros(6, 4);
            for (k, &x) in svd.sigma.iter().enumerate() {
                s[(k, k)] = Complex64::from(x);
            }
            let back = &svd.u * s * svd.v.adjoint();
            assert!(frob(&(back - &h)) / frob(&h) < 1e-12);
            let eye_u = svd.u.adjoint() * &svd.u - CMat::identity(6, 6);
            let eye_v = svd.v.adjoint() * &svd.v - CMat::identity(4, 4);
            assert!(frob(&eye_u) < 1e-12 && frob(&eye_v) < 1e-12);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_of_diagonal_is_identity_factors() {
        let mut h = CMat::zeros(3, 3);
        for (i, x) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            h[(i, i)] = Complex64::from(x);
        }
        let svd = svd_decompose(&h).unwrap();
        assert!(frob(&(svd.u.clone() - CMat::identity(3, 3))) < 1e-12);
        assert!(frob(&(svd.v.clone() - CMat::identity(3, 3))) < 1e-12);
        for (got, want) in svd.sigma.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_is_deterministic_bitwise() {
        let h = random_h(3, 5, 5);
        let a = svd_decompose(&h).unwrap();
        let b = svd_decompose(&h).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.v, b.v);
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut h = random_h(0, 2, 2);
        h[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(svd_decompose(&h).is_err());
    }

    #[test]
    fn analog_entries_have_fixed_modulus() {
        let c = cfg(8, 8, 4, 4, 3);
        let h = random_h(10, 8, 8);
        let svd = svd_decompose(&h).unwrap();
        let (t, _, _) = design_transceiver(&svd, &c).unwrap();
        let ft = 1.0 / 8f64.sqrt();
        for z in t.f_analog.iter() {
            assert!((z.norm() - ft).abs() < 1e-12);
        }
        for z in t.w_analog_h.iter() {
            assert!((z.norm() - ft).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_constraints_hold_exactly() {
        let c = cfg(8, 10, 5, 6, 4);
        let h = random_h(11, 10, 8);
        let svd = svd_decompose(&h).unwrap();
        let (t, _, _) = design_transceiver(&svd, &c).unwrap();
        assert!((frob_sq(&t.precoder()) - 4.0).abs() < 1e-9);
        assert!((frob_sq(&t.combiner()) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn residual_history_is_monotone() {
        for seed in 0..10u64 {
            let c = ScenarioConfig {
                rng_seed: seed,
                ..cfg(8, 8, 4, 4, 3)
            };
            let h = random_h(seed + 100, 8, 8);
            let svd = svd_decompose(&h).unwrap();
            let p = design_hybrid_precoder(&svd, &c).unwrap();
            for w in p.report.residual_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "residual rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    // A constant-modulus target is exactly representable: the warm start
    // lands on it and the residual collapses.
    #[test]
    fn dft_target_is_recovered() {
        let n_t = 8;
        let dft = CMat::from_fn(n_t, n_t, |i, j| {
            Complex64::from_polar(
                1.0 / (n_t as f64).sqrt(),
                2.0 * std::f64::consts::PI * (i * j) as f64 / n_t as f64,
            )
        });
        let (_, d, report) = factorize(
            &dft.columns(0, 4).into_owned(),
            n_t,
            &dft,
            1.0 / (n_t as f64).sqrt(),
            0,
            "test-restart",
        );
        assert!(report.residual <= 1e-6, "residual {}", report.residual);
        assert!(d.iter().all(|z| z.re.is_finite()));
    }

    // Rank-1 channel, single stream: the designed precoder points along the
    // dominant right singular vector and carries unit power.
    #[test]
    fn rank_one_channel_single_stream() {
        let mut rng = stream(42, "transceiver-test", 1);
        let a = complex_gaussian(&mut rng, 6, 1, 1.0);
        let b = complex_gaussian(&mut rng, 1, 5, 1.0);
        let h = &a * &b;
        let svd = svd_decompose(&h).unwrap();
        let c = cfg(5, 6, 2, 2, 1);
        let p = design_hybrid_precoder(&svd, &c).unwrap();
        let f = &p.f_analog * &p.f_digital;
        assert!((frob_sq(&f) - 1.0).abs() < 1e-9);
        let v1 = svd.v_lead(1);
        let align: Complex64 = v1.iter().zip(f.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!(
            align.norm() / frob(&f) > 1.0 - 1e-6,
            "alignment {}",
            align.norm() / frob(&f)
        );
    }

    // With full RF chains per side the hybrid pair diagonalizes the channel:
    // the combined response is the singular-value diagonal.
    #[test]
    fn full_rf_chains_diagonalize() {
        let c = cfg(6, 6, 6, 6, 3);
        let h = random_h(21, 6, 6);
        let svd = svd_decompose(&h).unwrap();
        let (t, _, _) = design_transceiver(&svd, &c).unwrap();
        let k = t.combiner() * &h * t.precoder();
        let mut off = 0.0;
        let mut diag_err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    diag_err = diag_err.max((k[(i, j)] - Complex64::from(svd.sigma[i])).norm());
                } else {
                    off += k[(i, j)].norm_sqr();
                }
            }
        }
        let rel_off = off.sqrt() / frob(&k);
        assert!(rel_off < 1e-6, "off-diagonal leakage {rel_off}");
        assert!(diag_err / svd.sigma[0] < 1e-5, "diagonal error {diag_err}");
    }

    #[test]
    #[ignore]
    fn probe_restart_spread() {
        for seed in 0..3u64 {
            let h = random_h(seed + 300, 16, 12);
            let svd = svd_decompose(&h).unwrap();
            let target = svd.v_lead(8);
            let unit = 1.0 / (12f64).sqrt();
            let hint = svd.v_lead(8);
            let mut finals = Vec::new();
            for r in 0..50u64 {
                let a0 = if r == 0 {
                    CMat::from_fn(12, 8, |i, j| {
                        let z = hint[(i, j % hint.ncols())];
                        Complex64::from_polar(unit, z.arg())
                    })
                } else {
                    let mut rng = stream(seed, "oracle-restart", r);
                    CMat::from_fn(12, 8, |_, _| {
                        Complex64::from_polar(unit, rng.gen_range(0.0..2.0 * std::f64::consts::PI))
                    })
                };
                let (_, _, rep) = alternate(&target, a0, unit, r as usize);
                finals.push((rep.residual, rep.residual_history.len()));
            }
            finals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            println!(
                "seed {seed}: min {:.3e} ({} iters)  p25 {:.3e}  med {:.3e}  max {:.3e}",
                finals[0].0, finals[0].1, finals[12].0, finals[25].0, finals[49].0
            );
        }
    }

    // The default restart budget should land within 5% of what a 50-restart
    // run of the same solver achieves at the reference array sizes. Both
    // stop when per-iteration improvement falls under FACTORIZE_STALL, so
    // residuals at that resolution (about 1e-5 here) are stopping noise,
    // not design quality; the comparison carries that additive allowance.
    #[test]
    fn restart_budget_is_adequate() {
        for seed in 0..10u64 {
            let h = random_h(seed + 300, 16, 12);
            let svd = svd_decompose(&h).unwrap();
            let target = svd.v_lead(8);
            let unit = 1.0 / (12f64).sqrt();
            let hint = svd.v_lead(8);
            let (_, _, ours) = factorize(&target, 8, &hint, unit, seed, "precoder-restart");
            let mut oracle = f64::INFINITY;
            for r in 0..50u64 {
                let a0 = if r == 0 {
                    CMat::from_fn(12, 8, |i, j| {
                        let z = hint[(i, j % hint.ncols())];
                        Complex64::from_polar(unit, z.arg())
                    })
                } else {
                    let mut rng = stream(seed, "oracle-restart", r);
                    CMat::from_fn(12, 8, |_, _| {
                        Complex64::from_polar(unit, rng.gen_range(0.0..2.0 * std::f64::consts::PI))
                    })
                };
                let (_, _, rep) = alternate(&target, a0, unit, r as usize);
                oracle = oracle.min(rep.residual);
            }
            assert!(
                ours.residual <= 1.05 * oracle + 1e-5,
                "seed {seed}: ours {} vs oracle {}",
                ours.residual,
                oracle
            );
        }
    }

    #[test]
    fn infeasible_dimensions_rejected() {
        let h = random_h(1, 4, 4);
        let svd = svd_decompose(&h).unwrap();
        // more streams than RF chains
        let c = ScenarioConfig {
            n_tx_antennas: 4,
            n_rx_antennas: 4,
            n_tx_rf_chains: 2,
            n_rx_rf_chains: 4,
            n_streams: 3,
            ..Default::default()
        };
        assert!(design_hybrid_precoder(&svd, &c).is_err());
    }
}
