//! Discrete phase tuning: exhaustive enumeration and a best-first
//! branch-and-prune search over per-element phase indices.
//!
//! Both searches share one incremental evaluator. Fixing the transceiver,
//! the end-to-end response is affine in each element's phasor:
//! `Keff = B + sum_{i,m} phi_im * u_im * v_im^T` with
//! `B = W H_d F`, `u_im = W q_i[:,m]`, `v_im^T = g_i[m,:] F`, so applying or
//! changing one element is a rank-one update of a small running state and a
//! candidate is never evaluated from scratch. The same machinery also serves
//! the bootstrap objective used before any transceiver exists (maximizing
//! channel energy), which differs only in the running state (`H` itself) and
//! the scalar read off it.
//!
//! The prune rule is an admissible bound: a partial assignment's deviation
//! `||K_partial - I||_F` can shrink by at most the sum of the spectral radii
//! of the still-unset handsets' contributions (`tail`), so
//! `p * max(0, dev - tail)^2 + sigma_n^2 ||W||_F^2` underestimates every
//! completion. Subtrees whose bound cannot beat the incumbent by more than
//! half the configured near-optimality gap are dropped, which keeps the
//! returned objective within `gap/2 / (1 - gap/2)` of the true optimum; with
//! a zero gap the search is exact.

use crate::channel::{ChannelSet, RisConfiguration};
use crate::linalg::{frob_sq, CMat};
use crate::scenario::ScenarioConfig;
use crate::transceiver::HybridTransceiver;
use crate::{Error, Result};
use num_complex::Complex64;

/// Which search strategy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PhaseMethod {
    #[serde(rename = "es")]
    Exhaustive,
    #[serde(rename = "bp")]
    BranchPrune,
}

impl std::fmt::Display for PhaseMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseMethod::Exhaustive => write!(f, "es"),
            PhaseMethod::BranchPrune => write!(f, "bp"),
        }
    }
}

impl std::str::FromStr for PhaseMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "es" => Ok(PhaseMethod::Exhaustive),
            "bp" => Ok(PhaseMethod::BranchPrune),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected 'es' or 'bp')"
            ))),
        }
    }
}

/// Result of one phase search.
#[derive(Debug, Clone)]
pub struct PhaseSearchOutcome {
    pub ris: RisConfiguration,
    /// Objective of the returned configuration (stream MSE, or negated
    /// channel energy for the bootstrap search).
    pub objective: f64,
    /// Complete candidate configurations whose objective was evaluated.
    pub nodes_expanded: u64,
    pub method: PhaseMethod,
}

/// What the running state means and how to score it.
enum Goal {
    /// `value = p * ||S - I||_F^2 + noise_floor` on the `N x N` response.
    StreamMse { p: f64, noise_floor: f64 },
    /// `value = -||S||_F^2` on the `N_r x N_t` channel itself.
    ChannelEnergy,
}

/// One reflected path as a rank-one contribution to the running state.
struct Rank1 {
    left: Vec<Complex64>,
    right: Vec<Complex64>,
    /// `||left|| * ||right||`: the largest possible Frobenius change.
    radius: f64,
}

struct Problem {
    goal: Goal,
    base: CMat,
    /// `paths[ue][element]`.
    paths: Vec<Vec<Rank1>>,
    phasors: Vec<Complex64>,
    k: usize,
    m: usize,
    /// Handset processing order for the pruned search (largest total radius
    /// first; ties by index).
    order: Vec<usize>,
    /// `tail[t]`: total radius of groups at positions `t..`.
    tail: Vec<f64>,
}

impl Problem {
    fn n_groups(&self) -> usize {
        self.paths.len()
    }

    fn value(&self, state: &CMat) -> f64 {
        match self.goal {
            Goal::StreamMse { p, noise_floor } => {
                let n = state.nrows();
                let mut dev = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        let z = state[(i, j)];
                        if i == j {
                            dev += (z - Complex64::from(1.0)).norm_sqr();
                        } else {
                            dev += z.norm_sqr();
                        }
                    }
                }
                p * dev + noise_floor
            }
            Goal::ChannelEnergy => -frob_sq(state),
        }
    }

    /// Admissible lower bound over all completions of a state whose value is
    /// `v`, given the remaining groups' total radius.
    fn bound(&self, v: f64, tail: f64) -> f64 {
        match self.goal {
            Goal::StreamMse { p, noise_floor } => {
                let dev = ((v - noise_floor).max(0.0) / p).sqrt();
                let short = (dev - tail).max(0.0);
                p * short * short + noise_floor
            }
            Goal::ChannelEnergy => {
                let norm = (-v).max(0.0).sqrt();
                -(norm + tail) * (norm + tail)
            }
        }
    }

    fn apply_in(&self, state: &mut CMat, ue: usize, el: usize, idx: u16) {
        let phi = self.phasors[idx as usize];
        let path = &self.paths[ue][el];
        let cols = state.ncols();
        for c in 0..cols {
            let s = phi * path.right[c];
            for (r, l) in path.left.iter().enumerate() {
                state[(r, c)] += l * s;
            }
        }
    }

    /// Full evaluation of a complete assignment (reference path for warm
    /// starts and consistency checks).
    fn evaluate(&self, indices: &[Vec<u16>]) -> f64 {
        let mut s = self.base.clone();
        for (ue, row) in indices.iter().enumerate() {
            for (el, &idx) in row.iter().enumerate() {
                self.apply_in(&mut s, ue, el, idx);
            }
        }
        self.value(&s)
    }
}

fn check_finite(m: &CMat, what: &str) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

/// Stream-MSE problem for a fixed transceiver.
fn build_mse_problem(
    channels: &ChannelSet,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
) -> Result<Problem> {
    let w = transceiver.combiner();
    let f = transceiver.precoder();
    if w.ncols() != channels.n_rx() || f.nrows() != channels.n_tx() {
        return Err(Error::DimensionMismatch {
            context: "phase search",
            expected: format!("combiner x{} / precoder {}x", channels.n_rx(), channels.n_tx()),
            found: format!("combiner x{} / precoder {}x", w.ncols(), f.nrows()),
        });
    }
    check_finite(&w, "combiner")?;
    check_finite(&f, "precoder")?;
    check_finite(&channels.h_direct, "direct link")?;
    let base = &w * &channels.h_direct * &f;
    let n = base.nrows();
    let mut paths = Vec::with_capacity(channels.n_ues());
    for i in 0..channels.n_ues() {
        check_finite(&channels.g[i], "incident segment")?;
        check_finite(&channels.q[i], "departing segment")?;
        let mut group = Vec::with_capacity(channels.elements_per_ue());
        for e in 0..channels.elements_per_ue() {
            let left: Vec<Complex64> = (0..n)
                .map(|r| {
                    (0..channels.n_rx())
                        .map(|a| w[(r, a)] * channels.q[i][(a, e)])
                        .sum()
                })
                .collect();
            let right: Vec<Complex64> = (0..n)
                .map(|c| {
                    (0..channels.n_tx())
                        .map(|a| channels.g[i][(e, a)] * f[(a, c)])
                        .sum()
                })
                .collect();
            let radius = (left.iter().map(|z| z.norm_sqr()).sum::<f64>()
                * right.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sqrt();
            group.push(Rank1 { left, right, radius });
        }
        paths.push(group);
    }
    let goal = Goal::StreamMse {
        p: config.symbol_power,
        noise_floor: config.noise_power * frob_sq(&w),
    };
    finish_problem(goal, base, paths, config)
}

/// Bootstrap problem: maximize channel energy before any transceiver exists.
fn build_energy_problem(channels: &ChannelSet, config: &ScenarioConfig) -> Result<Problem> {
    check_finite(&channels.h_direct, "direct link")?;
    let base = channels.h_direct.clone();
    let mut paths = Vec::with_capacity(channels.n_ues());
    for i in 0..channels.n_ues() {
        check_finite(&channels.g[i], "incident segment")?;
        check_finite(&channels.q[i], "departing segment")?;
        let mut group = Vec::with_capacity(channels.elements_per_ue());
        for e in 0..channels.elements_per_ue() {
            let left: Vec<Complex64> = channels.q[i].column(e).iter().copied().collect();
            let right: Vec<Complex64> = channels.g[i].row(e).iter().copied().collect();
            let radius = (left.iter().map(|z| z.norm_sqr()).sum::<f64>()
                * right.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sqrt();
            group.push(Rank1 { left, right, radius });
        }
        paths.push(group);
    }
    finish_problem(Goal::ChannelEnergy, base, paths, config)
}

fn finish_problem(
    goal: Goal,
    base: CMat,
    paths: Vec<Vec<Rank1>>,
    config: &ScenarioConfig,
) -> Result<Problem> {
    let phase_set = config.phase_set()?;
    let k = phase_set.cardinality();
    let phasors: Vec<Complex64> = (0..k).map(|i| phase_set.phasor(i)).collect();
    let n_d = paths.len();
    let m = paths.first().map_or(0, |g| g.len());
    let mut order: Vec<usize> = (0..n_d).collect();
    let group_radius =
        |i: usize| -> f64 { paths[i].iter().map(|p| p.radius).sum::<f64>() };
    order.sort_by(|&a, &b| {
        group_radius(b)
            .partial_cmp(&group_radius(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut tail = vec![0.0; n_d + 1];
    for t in (0..n_d).rev() {
        tail[t] = tail[t + 1] + group_radius(order[t]);
    }
    Ok(Problem {
        goal,
        base,
        paths,
        phasors,
        k,
        m,
        order,
        tail,
    })
}

/// Candidate count `K^(N_d * M)`; `None` on overflow.
fn space_size(k: usize, digits: usize) -> Option<u128> {
    (k as u128).checked_pow(u32::try_from(digits).ok()?)
}

/// Tuned configuration given a fixed transceiver, by full enumeration in
/// index order (first minimum wins, so ties resolve to the smallest index
/// vector). Refuses spaces larger than `config.search_budget`.
pub fn exhaustive_search(
    channels: &ChannelSet,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
) -> Result<PhaseSearchOutcome> {
    let problem = build_mse_problem(channels, transceiver, config)?;
    let (indices, objective, nodes) = run_exhaustive(&problem, config.search_budget)?;
    Ok(PhaseSearchOutcome {
        ris: RisConfiguration::new(indices, config.phase_set()?)?,
        objective,
        nodes_expanded: nodes,
        method: PhaseMethod::Exhaustive,
    })
}

/// Tuned configuration given a fixed transceiver, by branch-and-prune.
pub fn branch_prune_search(
    channels: &ChannelSet,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
) -> Result<PhaseSearchOutcome> {
    branch_prune_search_warm(channels, transceiver, config, None)
}

/// Branch-and-prune with an optional warm-start incumbent. The result is
/// never worse than the warm start's objective, which is what makes the
/// outer alternating loop monotone.
pub fn branch_prune_search_warm(
    channels: &ChannelSet,
    transceiver: &HybridTransceiver,
    config: &ScenarioConfig,
    warm: Option<&RisConfiguration>,
) -> Result<PhaseSearchOutcome> {
    let problem = build_mse_problem(channels, transceiver, config)?;
    let (indices, objective, nodes) = run_branch_prune(
        &problem,
        warm.map(|r| r.phase_indices()),
        config.near_optimality_gap,
        config.search_budget,
    )?;
    Ok(PhaseSearchOutcome {
        ris: RisConfiguration::new(indices, config.phase_set()?)?,
        objective,
        nodes_expanded: nodes,
        method: PhaseMethod::BranchPrune,
    })
}

/// Configuration maximizing assembled channel energy; used to bootstrap the
/// alternating loop before a transceiver exists. The reported objective is
/// the negated energy.
pub fn initial_phase_search(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    method: PhaseMethod,
) -> Result<PhaseSearchOutcome> {
    let problem = build_energy_problem(channels, config)?;
    let (indices, objective, nodes) = match method {
        PhaseMethod::Exhaustive => run_exhaustive(&problem, config.search_budget)?,
        PhaseMethod::BranchPrune => {
            run_branch_prune(&problem, None, config.near_optimality_gap, config.search_budget)?
        }
    };
    Ok(PhaseSearchOutcome {
        ris: RisConfiguration::new(indices, config.phase_set()?)?,
        objective,
        nodes_expanded: nodes,
        method,
    })
}

struct Best {
    value: f64,
    /// Flat digits; layout depends on the search (see call sites).
    digits: Vec<u16>,
}

fn run_exhaustive(problem: &Problem, budget: u64) -> Result<(Vec<Vec<u16>>, f64, u64)> {
    let digits = problem.n_groups() * problem.m;
    let size = space_size(problem.k, digits).ok_or(Error::BudgetExceeded {
        required: u128::MAX,
        budget,
    })?;
    if size > budget as u128 {
        return Err(Error::BudgetExceeded {
            required: size,
            budget,
        });
    }
    if problem.n_groups() == 0 {
        return Ok((Vec::new(), problem.value(&problem.base), 1));
    }
    let mut stack: Vec<CMat> = (0..=digits).map(|_| problem.base.clone()).collect();
    let mut best = Best {
        value: f64::INFINITY,
        digits: Vec::new(),
    };
    let mut current = vec![0u16; digits];
    let mut count = 0u64;
    es_descend(problem, 0, &mut stack, &mut current, &mut best, &mut count);
    let per_ue: Vec<Vec<u16>> = best
        .digits
        .chunks(problem.m)
        .map(|c| c.to_vec())
        .collect();
    Ok((per_ue, best.value, count))
}

/// Depth-first digit enumeration, handset-major in index order. `stack[d]`
/// holds the state with digits `< d` applied; each level rebuilds its child
/// from its parent, so rounding never accumulates beyond the tree depth.
fn es_descend(
    problem: &Problem,
    d: usize,
    stack: &mut [CMat],
    current: &mut [u16],
    best: &mut Best,
    count: &mut u64,
) {
    let digits = problem.n_groups() * problem.m;
    if d == digits {
        let v = problem.value(&stack[d]);
        *count += 1;
        if v < best.value {
            best.value = v;
            best.digits = current.to_vec();
        }
        return;
    }
    let (ue, el) = (d / problem.m, d % problem.m);
    for idx in 0..problem.k as u16 {
        let (head, rest) = stack.split_at_mut(d + 1);
        rest[0].copy_from(&head[d]);
        problem.apply_in(&mut rest[0], ue, el, idx);
        current[d] = idx;
        es_descend(problem, d + 1, stack, current, best, count);
    }
}

fn run_branch_prune(
    problem: &Problem,
    warm: Option<&[Vec<u16>]>,
    gap: f64,
    budget: u64,
) -> Result<(Vec<Vec<u16>>, f64, u64)> {
    if problem.n_groups() == 0 {
        return Ok((Vec::new(), problem.value(&problem.base), 1));
    }
    // per-group enumeration must itself fit the refusal budget
    let group_size = space_size(problem.k, problem.m).ok_or(Error::BudgetExceeded {
        required: u128::MAX,
        budget,
    })?;
    if group_size > budget as u128 {
        return Err(Error::BudgetExceeded {
            required: group_size,
            budget,
        });
    }
    let mut count = 0u64;
    let mut best = Best {
        value: f64::INFINITY,
        digits: Vec::new(),
    };
    if let Some(w) = warm {
        // evaluated through the same incremental machinery as leaves
        best.value = problem.evaluate(w);
        best.digits = problem
            .order
            .iter()
            .flat_map(|&ue| w[ue].iter().copied())
            .collect();
        count += 1;
    }
    let mut group_states: Vec<CMat> = (0..=problem.n_groups())
        .map(|_| problem.base.clone())
        .collect();
    let mut elem_states: Vec<CMat> = (0..=problem.m).map(|_| problem.base.clone()).collect();
    let mut prefix: Vec<u16> = Vec::with_capacity(problem.n_groups() * problem.m);
    bp_descend(
        problem,
        0,
        &mut group_states,
        &mut elem_states,
        &mut prefix,
        &mut best,
        &mut count,
        0.5 * gap,
    );
    // map position-major digits back to handset-major
    let mut per_ue = vec![Vec::new(); problem.n_groups()];
    for (t, &ue) in problem.order.iter().enumerate() {
        per_ue[ue] = best.digits[t * problem.m..(t + 1) * problem.m].to_vec();
    }
    Ok((per_ue, best.value, count))
}

#[allow(clippy::too_many_arguments)]
fn bp_descend(
    problem: &Problem,
    t: usize,
    group_states: &mut [CMat],
    elem_states: &mut [CMat],
    prefix: &mut Vec<u16>,
    best: &mut Best,
    count: &mut u64,
    half_gap: f64,
) {
    let ue = problem.order[t];
    let last = t + 1 == problem.n_groups();

    if last {
        // every completion of this node is a full candidate: enumerate and
        // score them all, keeping the strict-improvement incumbent rule
        elem_states[0].copy_from(&group_states[t]);
        leaf_enumerate(problem, ue, 0, elem_states, prefix, best, count);
        return;
    }

    // score all of this handset's settings, best first
    elem_states[0].copy_from(&group_states[t]);
    let mut children: Vec<(f64, u64)> = Vec::new();
    collect_group_values(problem, ue, 0, 0, elem_states, &mut children);
    children.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    for &(v, code) in &children {
        let bound = problem.bound(v, problem.tail[t + 1]);
        if bound >= best.value - half_gap * best.value.abs() {
            break; // children are value-sorted and the bound grows with value
        }
        let (head, rest) = group_states.split_at_mut(t + 1);
        rest[0].copy_from(&head[t]);
        let start = prefix.len();
        prefix.resize(start + problem.m, 0);
        let mut c = code;
        for el in (0..problem.m).rev() {
            let idx = (c % problem.k as u64) as u16;
            c /= problem.k as u64;
            prefix[start + el] = idx;
            problem.apply_in(&mut rest[0], ue, el, idx);
        }
        bp_descend(
            problem,
            t + 1,
            group_states,
            elem_states,
            prefix,
            best,
            count,
            half_gap,
        );
        prefix.truncate(start);
    }
}

/// Enumerate one handset's `K^M` settings, reporting each complete state's
/// value with a base-`K` code of its digits (element-major).
fn collect_group_values(
    problem: &Problem,
    ue: usize,
    el: usize,
    code: u64,
    elem_states: &mut [CMat],
    out: &mut Vec<(f64, u64)>,
) {
    if el == problem.m {
        out.push((problem.value(&elem_states[el]), code));
        return;
    }
    for idx in 0..problem.k as u16 {
        let (head, rest) = elem_states.split_at_mut(el + 1);
        rest[0].copy_from(&head[el]);
        problem.apply_in(&mut rest[0], ue, el, idx);
        collect_group_values(problem, ue, el + 1, code * problem.k as u64 + idx as u64, elem_states, out);
    }
}

/// Terminal-group enumeration: each inner leaf is a complete candidate.
fn leaf_enumerate(
    problem: &Problem,
    ue: usize,
    el: usize,
    elem_states: &mut [CMat],
    prefix: &mut Vec<u16>,
    best: &mut Best,
    count: &mut u64,
) {
    if el == problem.m {
        let v = problem.value(&elem_states[el]);
        *count += 1;
        if v < best.value {
            best.value = v;
            best.digits = prefix.clone();
        }
        return;
    }
    for idx in 0..problem.k as u16 {
        let (head, rest) = elem_states.split_at_mut(el + 1);
        rest[0].copy_from(&head[el]);
        problem.apply_in(&mut rest[0], ue, el, idx);
        prefix.push(idx);
        leaf_enumerate(problem, ue, el + 1, elem_states, prefix, best, count);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;
    use crate::mse;
    use crate::scenario::sample_geometry;
    use crate::transceiver::{design_transceiver, svd_decompose};
    use rand::Rng;

    fn small_cfg(n_d: usize, m: usize, k: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_tx_antennas: 4,
            n_rx_antennas: 4,
            n_tx_rf_chains: 2,
            n_rx_rf_chains: 2,
            n_streams: 2,
            n_cooperating_ues: n_d,
            ris_elements_per_ue: m,
            phase_cardinality: k,
            noise_power: 1e-11,
            ..Default::default()
        }
    }

    /// Channels plus a transceiver designed on the zero-phase assembly.
    fn setup(cfg: &ScenarioConfig, seed: u64) -> (ChannelSet, HybridTransceiver) {
        let geom = sample_geometry(cfg, seed).unwrap();
        let ch = generate_channels(cfg, &geom, seed).unwrap();
        let ris0 = RisConfiguration::zeros(
            cfg.n_cooperating_ues,
            cfg.ris_elements_per_ue,
            cfg.phase_set().unwrap(),
        );
        let h0 = crate::channel::assemble_effective_channel(&ch, &ris0).unwrap();
        let svd = svd_decompose(&h0).unwrap();
        let (tx, _, _) = design_transceiver(&svd, cfg).unwrap();
        (ch, tx)
    }

    #[test]
    fn exhaustive_candidate_counts() {
        // 2 handsets x 2 elements, K=3: 81 candidates exactly
        let cfg = small_cfg(2, 2, 3);
        let (ch, tx) = setup(&cfg, 1);
        let out = exhaustive_search(&ch, &tx, &cfg).unwrap();
        assert_eq!(out.nodes_expanded, 81);

        // K=1: the space is a single candidate
        let cfg1 = small_cfg(2, 2, 1);
        let (ch1, tx1) = setup(&cfg1, 2);
        assert_eq!(exhaustive_search(&ch1, &tx1, &cfg1).unwrap().nodes_expanded, 1);

        // one handset, one element, K=9
        let cfg9 = small_cfg(1, 1, 9);
        let (ch9, tx9) = setup(&cfg9, 3);
        assert_eq!(exhaustive_search(&ch9, &tx9, &cfg9).unwrap().nodes_expanded, 9);
    }

    #[test]
    fn budget_refusal() {
        let cfg = ScenarioConfig {
            search_budget: 80,
            ..small_cfg(2, 2, 3)
        };
        let (ch, tx) = setup(&cfg, 4);
        match exhaustive_search(&ch, &tx, &cfg) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, 81);
                assert_eq!(budget, 80);
            }
            other => panic!("expected refusal, got {:?}", other.map(|o| o.objective)),
        }
    }

    #[test]
    fn search_value_matches_reference_objective() {
        for seed in 0..6u64 {
            let cfg = small_cfg(2, 2, 3);
            let (ch, tx) = setup(&cfg, seed);
            let out = exhaustive_search(&ch, &tx, &cfg).unwrap();
            let reference = mse::objective(&ch, &out.ris, &tx, &cfg).unwrap();
            assert!(
                (out.objective - reference).abs() <= 1e-10 * reference.max(1.0),
                "seed {seed}: {} vs {}",
                out.objective,
                reference
            );
        }
    }

    #[test]
    fn exhaustive_dominates_probes_and_greedy() {
        let cfg = small_cfg(2, 2, 3);
        let (ch, tx) = setup(&cfg, 11);
        let es = exhaustive_search(&ch, &tx, &cfg).unwrap();
        let ps = cfg.phase_set().unwrap();

        let mut rng = crate::seeding::stream(99, "probe", 0);
        for _ in 0..200 {
            let indices: Vec<Vec<u16>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(0..3u16)).collect())
                .collect();
            let ris = RisConfiguration::new(indices, ps.clone()).unwrap();
            let v = mse::objective(&ch, &ris, &tx, &cfg).unwrap();
            assert!(es.objective <= v + 1e-10);
        }

        // coordinate-wise greedy sweep as an independent heuristic oracle
        let mut greedy = RisConfiguration::zeros(2, 2, ps.clone());
        for _ in 0..4 {
            for ue in 0..2 {
                for el in 0..2 {
                    let mut best_idx = 0u16;
                    let mut best_v = f64::INFINITY;
                    for idx in 0..3u16 {
                        let cand = greedy.with_index(ue, el, idx).unwrap();
                        let v = mse::objective(&ch, &cand, &tx, &cfg).unwrap();
                        if v < best_v {
                            best_v = v;
                            best_idx = idx;
                        }
                    }
                    greedy = greedy.with_index(ue, el, best_idx).unwrap();
                }
            }
        }
        let greedy_v = mse::objective(&ch, &greedy, &tx, &cfg).unwrap();
        assert!(es.objective <= greedy_v + 1e-10);
    }

    #[test]
    fn tie_break_is_smallest_index_vector() {
        // K=1 collapses every choice; the unique candidate is all zeros
        let cfg = small_cfg(2, 2, 1);
        let (ch, tx) = setup(&cfg, 5);
        let out = exhaustive_search(&ch, &tx, &cfg).unwrap();
        assert_eq!(out.ris.phase_indices(), &[vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn branch_prune_matches_exhaustive_with_zero_gap() {
        for seed in 0..10u64 {
            let cfg = ScenarioConfig {
                near_optimality_gap: 0.0,
                ..small_cfg(2, 2, 3)
            };
            let (ch, tx) = setup(&cfg, seed + 50);
            let es = exhaustive_search(&ch, &tx, &cfg).unwrap();
            let bp = branch_prune_search(&ch, &tx, &cfg).unwrap();
            assert!(
                (es.objective - bp.objective).abs() <= 1e-12 * es.objective.max(1e-30),
                "seed {seed}: es {} bp {}",
                es.objective,
                bp.objective
            );
            assert!(bp.nodes_expanded <= es.nodes_expanded);
        }
    }

    #[test]
    fn branch_prune_within_configured_gap() {
        for seed in 0..10u64 {
            let cfg = small_cfg(2, 2, 3); // default gap 1%
            let (ch, tx) = setup(&cfg, seed + 80);
            let es = exhaustive_search(&ch, &tx, &cfg).unwrap();
            let bp = branch_prune_search(&ch, &tx, &cfg).unwrap();
            assert!(
                bp.objective <= es.objective * 1.0051 + 1e-30,
                "seed {seed}: es {} bp {}",
                es.objective,
                bp.objective
            );
        }
    }

    #[test]
    fn warm_start_never_regresses() {
        let cfg = small_cfg(2, 2, 3);
        let (ch, tx) = setup(&cfg, 7);
        let ps = cfg.phase_set().unwrap();
        // deliberately mediocre warm start
        let warm = RisConfiguration::new(vec![vec![2, 2], vec![2, 2]], ps).unwrap();
        let warm_v = mse::objective(&ch, &warm, &tx, &cfg).unwrap();
        let out = branch_prune_search_warm(&ch, &tx, &cfg, Some(&warm)).unwrap();
        assert!(out.objective <= warm_v + 1e-12);
    }

    #[test]
    fn empty_search_space_single_candidate() {
        let cfg = small_cfg(0, 0, 3);
        let (ch, tx) = setup(&cfg, 6);
        let es = exhaustive_search(&ch, &tx, &cfg).unwrap();
        assert_eq!(es.nodes_expanded, 1);
        assert_eq!(es.ris.n_ues(), 0);
        let bp = branch_prune_search(&ch, &tx, &cfg).unwrap();
        assert_eq!(bp.nodes_expanded, 1);
        assert!((es.objective - bp.objective).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_search_maximizes_energy() {
        let cfg = small_cfg(2, 2, 3);
        let geom = sample_geometry(&cfg, 8).unwrap();
        let ch = generate_channels(&cfg, &geom, 8).unwrap();
        let es = initial_phase_search(&ch, &cfg, PhaseMethod::Exhaustive).unwrap();
        let bp = initial_phase_search(&ch, &cfg, PhaseMethod::BranchPrune).unwrap();
        // exhaustive bootstrap dominates random probes on assembled energy
        let ps = cfg.phase_set().unwrap();
        let mut rng = crate::seeding::stream(100, "probe", 1);
        let energy = |ris: &RisConfiguration| -> f64 {
            frob_sq(&crate::channel::assemble_effective_channel(&ch, ris).unwrap())
        };
        let es_energy = energy(&es.ris);
        for _ in 0..100 {
            let indices: Vec<Vec<u16>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(0..3u16)).collect())
                .collect();
            let ris = RisConfiguration::new(indices, ps.clone()).unwrap();
            assert!(es_energy >= energy(&ris) - 1e-10);
        }
        assert!((-es.objective - es_energy).abs() <= 1e-10 * es_energy);
        // pruned variant honors the same gap guarantee (negated objective)
        assert!(-bp.objective >= es_energy * (1.0 - 0.0051) - 1e-30);
    }

    #[test]
    fn searches_are_deterministic() {
        let cfg = small_cfg(3, 1, 3);
        let (ch, tx) = setup(&cfg, 13);
        let a = branch_prune_search(&ch, &tx, &cfg).unwrap();
        let b = branch_prune_search(&ch, &tx, &cfg).unwrap();
        assert_eq!(a.ris.phase_indices(), b.ris.phase_indices());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.nodes_expanded, b.nodes_expanded);
    }

    #[test]
    fn incremental_state_matches_scratch_evaluation() {
        let cfg = small_cfg(2, 2, 4);
        let (ch, tx) = setup(&cfg, 21);
        let problem = build_mse_problem(&ch, &tx, &cfg).unwrap();
        let indices = vec![vec![1u16, 3], vec![2, 0]];
        let incremental = problem.evaluate(&indices);
        let ris = RisConfiguration::new(indices, cfg.phase_set().unwrap()).unwrap();
        let scratch = mse::objective(&ch, &ris, &tx, &cfg).unwrap();
        assert!((incremental - scratch).abs() <= 1e-10 * scratch.max(1.0));
    }
}
