//! Delay-minimizing spectrum allocation.
//!
//! The decision space has one bandwidth fraction per nonempty station
//! combination, so its dimension explodes with the station count — but optima
//! concentrate on at most `K` segments. The solver exploits that structure:
//! it keeps a small working set of candidate segments, solves the convex
//! program restricted to that set, prices all `2^K - 1` segments with the
//! exact gradient, and pulls the best-priced ones in until the working set
//! stops growing.
//!
//! The restricted solves use Frank-Wolfe with away steps over the simplex
//! face spanned by the working set. That keeps iterates sparse, certifies
//! accuracy through the duality gap, and needs nothing beyond rate columns
//! and the gradient. Line searches are pole-aware: the objective blows up
//! where a station's rate gap closes, which conveniently keeps every iterate
//! strictly stable.

mod simplex;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{
    objective_from_rates, objective_gradient_from_rates, worst_case_rates, RateVector,
    SpectrumError, SpectrumPartition, TrafficProfile, STABILITY_MARGIN, SUPPORT_THRESHOLD,
};
use crate::subset::BtsSubset;
use crate::topology::SpectralEfficiencyTable;
use simplex::{solve_standard_form, LpOutcome, StandardLp};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("candidate set is empty or contains invalid subsets")]
    BadCandidates,
    #[error("start point carries weight on {0}, which is outside the candidate set")]
    UnsupportedStart(BtsSubset),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Duality-gap tolerance of a restricted solve, relative to `1 + |objective|`.
    pub tol: f64,
    /// Cap on working-set expansion rounds.
    pub max_outer_iters: usize,
    /// Cap on descent steps within one restricted solve.
    pub max_inner_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_outer_iters: 50,
            max_inner_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub partition: SpectrumPartition,
    /// Worst-case service rate per station at the returned partition.
    pub rates: Vec<f64>,
    pub objective: f64,
}

impl Solution {
    pub fn support_size(&self) -> usize {
        self.partition.support_size(SUPPORT_THRESHOLD)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    /// Objective at the start point, then after every expansion round.
    pub objective_trace: Vec<f64>,
    pub solution: Option<Solution>,
}

/// A strictly stable partition plus its worst slack `min_i (r_i - lambda_i)`.
#[derive(Debug, Clone)]
pub struct FeasiblePoint {
    pub partition: SpectrumPartition,
    pub slack: f64,
}

/// Result of one restricted solve over a fixed candidate set.
#[derive(Debug, Clone)]
pub struct RestrictedSolve {
    pub partition: SpectrumPartition,
    pub rates: RateVector,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn check_traffic_dims(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<(), OptimizerError> {
    if table.num_bts() != traffic.num_bts() {
        return Err(SpectrumError::DimensionMismatch {
            expected: table.num_bts(),
            got: traffic.num_bts(),
        }
        .into());
    }
    Ok(())
}

/// Sorted, deduplicated candidate list; rejects empty sets and out-of-range
/// members so downstream indexing stays trivially safe.
fn normalize_candidates(
    k: usize,
    candidates: &[BtsSubset],
) -> Result<Vec<BtsSubset>, OptimizerError> {
    let full = BtsSubset::all(k);
    let mut cand = candidates.to_vec();
    cand.sort_unstable_by_key(|b| b.mask());
    cand.dedup();
    if cand.is_empty() || cand.iter().any(|b| b.is_empty() || !b.is_subset_of(full)) {
        return Err(OptimizerError::BadCandidates);
    }
    Ok(cand)
}

/// Partition from raw weights: negatives and zeros dropped, rest rescaled to
/// sum to exactly one.
fn partition_from_weights(k: usize, cand: &[BtsSubset], w: &[f64]) -> SpectrumPartition {
    let total: f64 = w.iter().filter(|&&v| v > 0.0).sum();
    SpectrumPartition::from_entries_unchecked(
        k,
        cand.iter()
            .zip(w)
            .filter(|&(_, &v)| v > 0.0)
            .map(|(b, &v)| (*b, v / total)),
    )
}

/// Maximize the worst slack `min_i (r_i - lambda_i)` over partitions supported
/// on `candidates`. Returns `None` when even the best slack cannot clear the
/// stability margin, i.e. the demand is not supportable on this candidate set.
pub fn find_feasible_within(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    candidates: &[BtsSubset],
) -> Result<Option<FeasiblePoint>, OptimizerError> {
    check_traffic_dims(table, traffic)?;
    let k = table.num_bts();
    let cand = normalize_candidates(k, candidates)?;

    // Variables: one weight per candidate, the slack split into positive and
    // negative parts, and one surplus per station row.
    let n_c = cand.len();
    let n = n_c + 2 + k;
    let mut rows = Vec::with_capacity(k + 1);
    for i in 0..k {
        let mut row = vec![0.0; n];
        for (j, b) in cand.iter().enumerate() {
            row[j] = table.get(i, *b);
        }
        row[n_c] = -1.0;
        row[n_c + 1] = 1.0;
        row[n_c + 2 + i] = -1.0;
        rows.push(row);
    }
    let mut budget = vec![0.0; n];
    budget[..n_c].fill(1.0);
    rows.push(budget);
    let mut rhs = traffic.rates().to_vec();
    rhs.push(1.0);
    let mut costs = vec![0.0; n];
    costs[n_c] = -1.0;
    costs[n_c + 1] = 1.0;

    let outcome = solve_standard_form(&StandardLp { costs, rows, rhs })
        .map_err(|e| OptimizerError::Lp(e.0))?;
    let x = match outcome {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Err(OptimizerError::Lp(
                "slack program unexpectedly reported infeasible".into(),
            ))
        }
        LpOutcome::Unbounded => {
            return Err(OptimizerError::Lp(
                "slack program unexpectedly reported unbounded".into(),
            ))
        }
    };

    let partition = partition_from_weights(k, &cand, &x[..n_c]);
    let rates = worst_case_rates(&partition, table)?;
    let slack = (0..k)
        .map(|i| rates.get(i) - traffic.rate(i))
        .fold(f64::INFINITY, f64::min);
    if slack <= STABILITY_MARGIN {
        return Ok(None);
    }
    Ok(Some(FeasiblePoint { partition, slack }))
}

/// [`find_feasible_within`] over every nonempty station combination.
pub fn find_feasible(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<Option<FeasiblePoint>, OptimizerError> {
    let cand: Vec<BtsSubset> = BtsSubset::enumerate_nonempty(table.num_bts()).collect();
    find_feasible_within(table, traffic, &cand)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mix_rates(cols: &[Vec<f64>], x: &[f64], k: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    for (c, &v) in cols.iter().zip(x) {
        if v != 0.0 {
            for i in 0..k {
                r[i] += v * c[i];
            }
        }
    }
    r
}

fn renormalize(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        for v in x.iter_mut() {
            *v /= s;
        }
    }
}

/// Step length along `r + alpha * dr`: cap at the stability boundary, then
/// bisect the directional derivative. The objective is strictly convex along
/// any segment with a pole where a rate gap closes, so the derivative is
/// increasing and bracketing is safe.
fn pole_aware_line_search(r: &[f64], dr: &[f64], lambda: &[f64], w: &[f64], alpha_max: f64) -> f64 {
    let mut hi = alpha_max;
    for i in 0..r.len() {
        if dr[i] < 0.0 {
            let allowed = (r[i] - lambda[i] - 2.0 * STABILITY_MARGIN) / -dr[i];
            hi = hi.min(allowed);
        }
    }
    if !(hi.is_finite() && hi > 0.0) {
        return 0.0;
    }
    let phi = |a: f64| -> f64 {
        (0..r.len())
            .map(|i| w[i] / (r[i] + a * dr[i] - lambda[i]))
            .sum()
    };
    let dphi = |a: f64| -> f64 {
        (0..r.len())
            .map(|i| {
                let gap = r[i] + a * dr[i] - lambda[i];
                -w[i] * dr[i] / (gap * gap)
            })
            .sum()
    };
    let mut alpha = if dphi(hi) <= 0.0 {
        hi
    } else {
        let (mut lo, mut up) = (0.0, hi);
        for _ in 0..64 {
            let mid = 0.5 * (lo + up);
            if dphi(mid) < 0.0 {
                lo = mid;
            } else {
                up = mid;
            }
        }
        0.5 * (lo + up)
    };
    // Monotonicity guard against floating-point trouble near the pole.
    let f0 = phi(0.0);
    let mut tries = 0;
    while phi(alpha) > f0 && tries < 60 {
        alpha *= 0.5;
        tries += 1;
    }
    if tries == 60 {
        0.0
    } else {
        alpha
    }
}

/// Minimize the delay objective over partitions supported on `candidates`,
/// starting from `start` (which must be strictly stable and supported on the
/// candidate set). Frank-Wolfe with away steps; the returned point is never
/// worse than the start, and `converged` reports whether the duality gap
/// closed below tolerance within the step budget.
pub fn solve_restricted(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    candidates: &[BtsSubset],
    start: &SpectrumPartition,
    options: &SolverOptions,
) -> Result<RestrictedSolve, OptimizerError> {
    check_traffic_dims(table, traffic)?;
    let k = table.num_bts();
    let cand = normalize_candidates(k, candidates)?;

    let mut index = vec![usize::MAX; table.num_subsets()];
    for (j, b) in cand.iter().enumerate() {
        index[b.mask() as usize] = j;
    }
    let mut x = vec![0.0; cand.len()];
    for (b, f) in start.entries() {
        let j = index[b.mask() as usize];
        if j == usize::MAX {
            return Err(OptimizerError::UnsupportedStart(b));
        }
        x[j] = f;
    }
    renormalize(&mut x);

    let cols: Vec<Vec<f64>> = cand.iter().map(|b| table.rate_column(*b)).collect();
    let lambda = traffic.rates().to_vec();
    let w = traffic.weights();
    let mut r = mix_rates(&cols, &x, k);
    let mut f_val = objective_from_rates(&RateVector(r.clone()), traffic)?;

    let mut converged = false;
    let mut steps = 0;
    for it in 0..options.max_inner_iters {
        steps = it + 1;
        let q: Vec<f64> = (0..k)
            .map(|i| {
                let gap = r[i] - lambda[i];
                w[i] / (gap * gap)
            })
            .collect();
        // Directional derivative of loading candidate j; exactly the pricing
        // used for working-set expansion, restricted to this face.
        let g: Vec<f64> = cols.iter().map(|c| -dot(&q, c)).collect();
        let gx = dot(&g, &x);

        let mut jf = 0;
        for j in 1..g.len() {
            if g[j] < g[jf] {
                jf = j;
            }
        }
        let gap_fw = gx - g[jf];
        if gap_fw <= options.tol * (1.0 + f_val.abs()) {
            converged = true;
            break;
        }

        let mut ja = usize::MAX;
        for j in 0..g.len() {
            if x[j] > 0.0 && (ja == usize::MAX || g[j] > g[ja]) {
                ja = j;
            }
        }
        let toward = g[jf] - gx;
        let away = gx - g[ja];
        let use_away = away < toward && x[ja] < 1.0 - 1e-12;

        let (dr, alpha_max): (Vec<f64>, f64) = if use_away {
            (
                (0..k).map(|i| r[i] - cols[ja][i]).collect(),
                x[ja] / (1.0 - x[ja]),
            )
        } else {
            ((0..k).map(|i| cols[jf][i] - r[i]).collect(), 1.0)
        };
        let alpha = pole_aware_line_search(&r, &dr, &lambda, &w, alpha_max);
        if alpha <= 0.0 {
            break;
        }

        if use_away {
            let scale = 1.0 + alpha;
            for v in x.iter_mut() {
                *v *= scale;
            }
            x[ja] -= alpha;
            if x[ja] < 1e-15 {
                x[ja] = 0.0;
            }
        } else {
            let scale = 1.0 - alpha;
            for v in x.iter_mut() {
                *v *= scale;
            }
            x[jf] += alpha;
        }
        for i in 0..k {
            r[i] += alpha * dr[i];
        }
        if it % 64 == 63 {
            // Exact refresh against floating-point drift.
            renormalize(&mut x);
            r = mix_rates(&cols, &x, k);
        }
        f_val = objective_from_rates(&RateVector(r.clone()), traffic)?;
    }

    renormalize(&mut x);
    let partition = partition_from_weights(k, &cand, &x);
    let rates = worst_case_rates(&partition, table)?;
    let objective = objective_from_rates(&rates, traffic)?;
    Ok(RestrictedSolve {
        partition,
        rates,
        objective,
        converged,
        iterations: steps,
    })
}

/// A direction `nu` with `sum(nu) = 0` and `sum(nu_j * cols_j) = 0`, if the
/// columns are affinely dependent. Gauss-Jordan on the stacked matrix of
/// columns plus an all-ones row; the first free column yields the direction.
fn affine_null_direction(cols: &[Vec<f64>]) -> Option<Vec<f64>> {
    let p = cols.len();
    let k = cols[0].len();
    let rows = k + 1;
    let mut m: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            (0..p)
                .map(|j| if r < k { cols[j][r] } else { 1.0 })
                .collect()
        })
        .collect();
    let scale = m.iter().flatten().fold(1.0_f64, |a, &v| a.max(v.abs()));
    let tol = 1e-11 * scale;

    let mut pivot_row_of_col = vec![usize::MAX; p];
    let mut rank = 0;
    for col in 0..p {
        if rank >= rows {
            break;
        }
        let mut best = rank;
        for r in rank + 1..rows {
            if m[r][col].abs() > m[best][col].abs() {
                best = r;
            }
        }
        if m[best][col].abs() <= tol {
            continue;
        }
        m.swap(rank, best);
        let inv = 1.0 / m[rank][col];
        for v in &mut m[rank][col..p] {
            *v *= inv;
        }
        let pivot_row = m[rank][col..p].to_vec();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank {
                let f = row[col];
                if f != 0.0 {
                    for (v, &pv) in row[col..p].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        pivot_row_of_col[col] = rank;
        rank += 1;
    }

    let free = (0..p).find(|&j| pivot_row_of_col[j] == usize::MAX)?;
    let mut nu = vec![0.0; p];
    nu[free] = 1.0;
    for col in 0..p {
        let r = pivot_row_of_col[col];
        if r != usize::MAX {
            nu[col] = -m[r][free];
        }
    }
    Some(nu)
}

/// Shift mass along affine null directions of the supported rate columns
/// until none remain. The rate point — and hence the objective — is
/// untouched, but redundant segments drop out of the support.
fn caratheodory_prune(cand: &mut Vec<BtsSubset>, x: &mut Vec<f64>, cols: &mut Vec<Vec<f64>>) {
    loop {
        let keep: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        if keep.iter().any(|&b| !b) {
            let mut it = keep.iter();
            cand.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            cols.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            x.retain(|_| *it.next().unwrap());
        }
        if x.len() <= 1 {
            return;
        }
        let Some(nu) = affine_null_direction(cols) else {
            return;
        };
        let mut t = f64::INFINITY;
        let mut drop_j = usize::MAX;
        for j in 0..x.len() {
            if nu[j] > 1e-12 {
                let tj = x[j] / nu[j];
                if tj < t {
                    t = tj;
                    drop_j = j;
                }
            }
        }
        if drop_j == usize::MAX {
            return;
        }
        for j in 0..x.len() {
            x[j] -= t * nu[j];
            if x[j] < 0.0 {
                x[j] = 0.0;
            }
        }
        x[drop_j] = 0.0;
    }
}

/// Tidy a converged solution. Affine dependencies in the support are removed
/// first (free: the rate point does not move). If the support still exceeds
/// the station count, segments are dropped outright and the reduced problem
/// re-solved, accepting a drop only when the objective stays within the
/// solver tolerance — structurally minimal solutions exist, so this
/// normally succeeds without giving anything up.
fn polish(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    res: RestrictedSolve,
    options: &SolverOptions,
) -> Result<RestrictedSolve, OptimizerError> {
    let k = table.num_bts();
    let mut cand: Vec<BtsSubset> = res.partition.entries().map(|(b, _)| b).collect();
    let mut x: Vec<f64> = res.partition.entries().map(|(_, f)| f).collect();
    let mut cols: Vec<Vec<f64>> = cand.iter().map(|b| table.rate_column(*b)).collect();
    caratheodory_prune(&mut cand, &mut x, &mut cols);

    let rebuilt = (|| -> Result<RestrictedSolve, SpectrumError> {
        let partition = partition_from_weights(k, &cand, &x);
        let rates = worst_case_rates(&partition, table)?;
        let objective = objective_from_rates(&rates, traffic)?;
        Ok(RestrictedSolve {
            partition,
            rates,
            objective,
            converged: res.converged,
            iterations: res.iterations,
        })
    })();
    let mut best = match rebuilt {
        Ok(b) => b,
        Err(_) => res,
    };

    let mut passes = 0;
    while best.partition.support_size(SUPPORT_THRESHOLD) > k && passes < 16 {
        passes += 1;
        let mut support = best.partition.support(SUPPORT_THRESHOLD);
        support.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.mask().cmp(&b.0.mask())));
        let accept = best.objective + options.tol * (1.0 + best.objective.abs());
        let mut replaced = None;
        for &(dropped, _) in &support {
            let remaining: Vec<BtsSubset> = best
                .partition
                .entries()
                .map(|(b, _)| b)
                .filter(|&b| b != dropped)
                .collect();
            if remaining.is_empty() {
                continue;
            }
            let weights: Vec<f64> = remaining
                .iter()
                .map(|&b| best.partition.fraction(b))
                .collect();
            let renorm = partition_from_weights(k, &remaining, &weights);
            let start = match crate::spectrum::objective(&renorm, table, traffic) {
                Ok(_) => Some(renorm),
                Err(_) => find_feasible_within(table, traffic, &remaining)?.map(|fp| fp.partition),
            };
            let Some(start) = start else { continue };
            let trial = solve_restricted(table, traffic, &remaining, &start, options)?;
            if trial.objective <= accept {
                replaced = Some(trial);
                break;
            }
        }
        match replaced {
            Some(t) => best = t,
            None => break,
        }
    }
    Ok(best)
}

/// Full solve: start from full reuse when stable (otherwise from the best
/// max-slack point), then alternate restricted solves with gradient pricing
/// over all `2^K - 1` segments, pulling the `K` best-priced segments into the
/// working set until nothing new arrives.
pub fn solve(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    options: &SolverOptions,
) -> Result<SolveReport, OptimizerError> {
    check_traffic_dims(table, traffic)?;
    let k = table.num_bts();

    let full = SpectrumPartition::full_reuse(k);
    let start = match crate::spectrum::objective(&full, table, traffic) {
        Ok(_) => full,
        Err(SpectrumError::Unstable { .. }) => match find_feasible(table, traffic)? {
            Some(fp) => fp.partition,
            None => {
                return Ok(SolveReport {
                    status: SolveStatus::Infeasible,
                    outer_iterations: 0,
                    objective_trace: Vec::new(),
                    solution: None,
                })
            }
        },
        Err(e) => return Err(e.into()),
    };

    let mut candidates: BTreeSet<BtsSubset> = start.entries().map(|(b, _)| b).collect();
    let mut trace = vec![crate::spectrum::objective(&start, table, traffic)?];
    let mut current = start;
    let mut status = SolveStatus::MaxIterations;
    let mut last: Option<RestrictedSolve> = None;
    let mut outer = 0;

    while outer < options.max_outer_iters.max(1) {
        outer += 1;
        let cand_vec: Vec<BtsSubset> = candidates.iter().copied().collect();
        let res = solve_restricted(table, traffic, &cand_vec, &current, options)?;
        trace.push(res.objective);

        let grad = objective_gradient_from_rates(&res.rates, table, traffic)?;
        let mut order: Vec<usize> = (1..grad.len()).collect();
        order.sort_unstable_by(|&a, &b| grad[a].total_cmp(&grad[b]).then(a.cmp(&b)));
        let newcomers: Vec<BtsSubset> =
            order.iter().take(k).map(|&m| BtsSubset(m as u16)).collect();

        current = res.partition.clone();
        last = Some(res);
        if newcomers.iter().all(|b| candidates.contains(b)) {
            status = SolveStatus::Optimal;
            break;
        }
        candidates.extend(newcomers);
    }

    let res = last.expect("at least one restricted solve always runs");
    let res = polish(table, traffic, res, options)?;
    Ok(SolveReport {
        status,
        outer_iterations: outer,
        objective_trace: trace,
        solution: Some(Solution {
            partition: res.partition.clone(),
            rates: res.rates.as_slice().to_vec(),
            objective: res.objective,
        }),
    })
}

/// Delay of the everything-shared partition, or infeasible when the demand
/// does not fit under full interference.
pub fn full_reuse_baseline(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<SolveReport, OptimizerError> {
    check_traffic_dims(table, traffic)?;
    let partition = SpectrumPartition::full_reuse(table.num_bts());
    let rates = worst_case_rates(&partition, table)?;
    match objective_from_rates(&rates, traffic) {
        Ok(objective) => Ok(SolveReport {
            status: SolveStatus::Optimal,
            outer_iterations: 0,
            objective_trace: vec![objective],
            solution: Some(Solution {
                partition,
                rates: rates.as_slice().to_vec(),
                objective,
            }),
        }),
        Err(SpectrumError::Unstable { .. }) => Ok(SolveReport {
            status: SolveStatus::Infeasible,
            outer_iterations: 0,
            objective_trace: Vec::new(),
            solution: None,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Best purely exclusive allocation: the same convex program restricted to
/// the K singleton segments. One restricted solve is exact here because the
/// singleton face is the entire orthogonal design space.
pub fn solve_orthogonal_baseline(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    options: &SolverOptions,
) -> Result<SolveReport, OptimizerError> {
    check_traffic_dims(table, traffic)?;
    let k = table.num_bts();
    let singles: Vec<BtsSubset> = (0..k).map(BtsSubset::singleton).collect();

    let uniform = SpectrumPartition::orthogonal_uniform(k);
    let start = match crate::spectrum::objective(&uniform, table, traffic) {
        Ok(_) => Some(uniform),
        Err(SpectrumError::Unstable { .. }) => {
            find_feasible_within(table, traffic, &singles)?.map(|fp| fp.partition)
        }
        Err(e) => return Err(e.into()),
    };
    let Some(start) = start else {
        return Ok(SolveReport {
            status: SolveStatus::Infeasible,
            outer_iterations: 0,
            objective_trace: Vec::new(),
            solution: None,
        });
    };

    let first = crate::spectrum::objective(&start, table, traffic)?;
    let res = solve_restricted(table, traffic, &singles, &start, options)?;
    Ok(SolveReport {
        status: if res.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIterations
        },
        outer_iterations: 1,
        objective_trace: vec![first, res.objective],
        solution: Some(Solution {
            partition: res.partition.clone(),
            rates: res.rates.as_slice().to_vec(),
            objective: res.objective,
        }),
    })
}

/// First-order optimality violation on the simplex: how far the gradient at
/// any supported segment sits above the best gradient over all segments.
/// Values near zero certify a stationary — hence globally optimal — point.
pub fn stationarity_gap(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    support_threshold: f64,
) -> Result<f64, OptimizerError> {
    let grad = crate::spectrum::objective_gradient(partition, table, traffic)?;
    let min_all = grad.iter().skip(1).fold(f64::INFINITY, |a, &g| a.min(g));
    let max_support = partition
        .support(support_threshold)
        .iter()
        .map(|&(b, _)| grad[b.mask() as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(max_support - min_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_from(rows: Vec<Vec<f64>>) -> SpectralEfficiencyTable {
        SpectralEfficiencyTable::from_rows(rows).unwrap()
    }

    /// Two stations at efficiency 2 alone, `shared` when both transmit.
    fn symmetric_pair(shared: f64) -> SpectralEfficiencyTable {
        table_from(vec![
            vec![0.0, 2.0, 0.0, shared],
            vec![0.0, 0.0, 2.0, shared],
        ])
    }

    /// Product-form monotone table: solo efficiency damped per interferer.
    fn random_table(k: usize, rng: &mut ChaCha8Rng) -> SpectralEfficiencyTable {
        let base: Vec<f64> = (0..k).map(|_| rng.random_range(1.5..4.0)).collect();
        let damp: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.random_range(0.5..0.95)).collect())
            .collect();
        let rows = (0..k)
            .map(|i| {
                (0..1usize << k)
                    .map(|mask| {
                        if mask & (1 << i) == 0 {
                            0.0
                        } else {
                            let mut s = base[i];
                            for (j, &d) in damp[i].iter().enumerate() {
                                if j != i && mask & (1 << j) != 0 {
                                    s *= d;
                                }
                            }
                            s
                        }
                    })
                    .collect()
            })
            .collect();
        table_from(rows)
    }

    fn random_partition(k: usize, rng: &mut ChaCha8Rng) -> SpectrumPartition {
        let masks: Vec<u16> = (1..1u32 << k).map(|m| m as u16).collect();
        let picks = 2 * k;
        let mut entries = Vec::new();
        let mut total = 0.0;
        for _ in 0..picks {
            let mask = masks[rng.random_range(0..masks.len())];
            let weight = -rng.random_range(0.0001..1.0_f64).ln();
            entries.push((BtsSubset(mask), weight));
            total += weight;
        }
        SpectrumPartition::from_entries_unchecked(
            k,
            entries.into_iter().map(|(b, w)| (b, w / total)),
        )
    }

    /// A table plus traffic guaranteed feasible: demand is a random partition's
    /// worst-case rates scaled below one.
    fn random_instance(
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> (SpectralEfficiencyTable, TrafficProfile) {
        let table = random_table(k, rng);
        let p = random_partition(k, rng);
        let rates = worst_case_rates(&p, &table).unwrap();
        let lambda: Vec<f64> = (0..k)
            .map(|i| rates.get(i) * rng.random_range(0.3..0.8))
            .collect();
        (table, TrafficProfile::new(lambda).unwrap())
    }

    #[test]
    fn feasibility_on_a_single_station() {
        let table = table_from(vec![vec![0.0, 2.0]]);
        let traffic = TrafficProfile::new(vec![1.0]).unwrap();
        let fp = find_feasible(&table, &traffic).unwrap().unwrap();
        assert!((fp.slack - 1.0).abs() < 1e-8);
        assert!((fp.partition.fraction(BtsSubset(1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_rejects_overload() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![1.5, 1.5]).unwrap();
        assert!(find_feasible(&table, &traffic).unwrap().is_none());
    }

    #[test]
    fn feasibility_splits_the_band_evenly_when_forced() {
        // Demand 1.0 per station is reachable only with r_i = 1.0 exactly
        // under exclusive halves, so the max-slack point is unique.
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.5, 0.5]).unwrap();
        let fp = find_feasible(&table, &traffic).unwrap().unwrap();
        assert!((fp.slack - 0.5).abs() < 1e-8);
        assert!((fp.partition.fraction(BtsSubset(0b01)) - 0.5).abs() < 1e-8);
        assert!((fp.partition.fraction(BtsSubset(0b10)) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn feasible_points_are_basic_and_unbeaten_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_F00D);
        for k in 3..=6 {
            for _ in 0..6 {
                let (table, traffic) = random_instance(k, &mut rng);
                let fp = find_feasible(&table, &traffic).unwrap().unwrap();
                assert!(fp.slack > 0.0);
                // Basic solutions of the slack program touch at most one
                // variable per row: K station rows plus the budget row.
                assert!(fp.partition.support_size(0.0) <= k + 1);
                // No sampled partition may beat the maximized slack.
                for _ in 0..30 {
                    let p = random_partition(k, &mut rng);
                    let rates = worst_case_rates(&p, &table).unwrap();
                    let slack = (0..k)
                        .map(|i| rates.get(i) - traffic.rate(i))
                        .fold(f64::INFINITY, f64::min);
                    assert!(slack <= fp.slack + 1e-8);
                }
            }
        }
    }

    #[test]
    fn restricted_solve_on_a_point_face_returns_the_start() {
        let table = symmetric_pair(1.2);
        let traffic = TrafficProfile::new(vec![0.5, 0.5]).unwrap();
        let start = SpectrumPartition::full_reuse(2);
        let res = solve_restricted(
            &table,
            &traffic,
            &[BtsSubset(0b11)],
            &start,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.objective - 1.0 / 0.7).abs() < 1e-9);
        assert!((res.partition.fraction(BtsSubset(0b11)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_solve_finds_symmetric_split() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.5, 0.5]).unwrap();
        let start =
            SpectrumPartition::new(2, [(BtsSubset(0b01), 0.7), (BtsSubset(0b10), 0.3)]).unwrap();
        let singles = [BtsSubset(0b01), BtsSubset(0b10)];
        let res = solve_restricted(
            &table,
            &traffic,
            &singles,
            &start,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.partition.fraction(BtsSubset(0b01)) - 0.5).abs() < 1e-6);
        assert!((res.objective - 2.0).abs() < 1e-8);
    }

    #[test]
    fn restricted_solve_matches_pencil_and_paper_optimum() {
        // Exclusive split a, 1-a with solo rate 2 and demand (0.8, 0.2):
        // minimizing 0.8/(2a-0.8) + 0.2/(1.8-2a) gives a = 11/15 and
        // objective 1.8.
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.8, 0.2]).unwrap();
        let start =
            SpectrumPartition::new(2, [(BtsSubset(0b01), 0.5), (BtsSubset(0b10), 0.5)]).unwrap();
        let singles = [BtsSubset(0b01), BtsSubset(0b10)];
        let res = solve_restricted(
            &table,
            &traffic,
            &singles,
            &start,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((res.partition.fraction(BtsSubset(0b01)) - 11.0 / 15.0).abs() < 1e-5);
        assert!((res.objective - 1.8).abs() < 1e-7);
    }

    #[test]
    fn restricted_solve_never_worsens_the_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..15 {
            let (table, traffic) = random_instance(4, &mut rng);
            let start = loop {
                let p = random_partition(4, &mut rng);
                if crate::spectrum::objective(&p, &table, &traffic).is_ok() {
                    break p;
                }
            };
            let start_obj = crate::spectrum::objective(&start, &table, &traffic).unwrap();
            let cand: Vec<BtsSubset> = BtsSubset::enumerate_nonempty(4).collect();
            let res = solve_restricted(&table, &traffic, &cand, &start, &SolverOptions::default())
                .unwrap();
            assert!(res.objective <= start_obj + 1e-9 * (1.0 + start_obj.abs()));
        }
    }

    #[test]
    fn solve_prefers_sharing_when_it_is_efficient() {
        // Sharing yields 1.2 each versus 1.0 each under an even split.
        let table = symmetric_pair(1.2);
        let traffic = TrafficProfile::new(vec![0.5, 0.5]).unwrap();
        let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let sol = report.solution.unwrap();
        assert!((sol.objective - 1.0 / 0.7).abs() < 1e-8);
        assert!((sol.partition.fraction(BtsSubset(0b11)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn solve_escapes_full_reuse_when_interference_hurts() {
        // Full reuse is stable here but strictly worse than exclusive halves,
        // so the working set must grow beyond its starting point.
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.5, 0.5]).unwrap();
        let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let sol = report.solution.unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-6);
        assert!((sol.partition.fraction(BtsSubset(0b01)) - 0.5).abs() < 1e-6);
        assert!((sol.partition.fraction(BtsSubset(0b10)) - 0.5).abs() < 1e-6);
        assert!(sol.support_size() <= 2);
    }

    #[test]
    fn solve_starts_from_slack_point_when_full_reuse_is_unstable() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.9, 0.9]).unwrap();
        let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let sol = report.solution.unwrap();
        assert!((sol.objective - 10.0).abs() < 1e-4);
        assert!((sol.partition.fraction(BtsSubset(0b01)) - 0.5).abs() < 1e-5);
    }

    #[test]
    fn solve_reports_unsupportable_demand() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![1.5, 1.5]).unwrap();
        let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Infeasible);
        assert!(report.solution.is_none());
        assert!(report.objective_trace.is_empty());
    }

    #[test]
    fn solve_handles_a_single_station() {
        let table = table_from(vec![vec![0.0, 2.0]]);
        let traffic = TrafficProfile::new(vec![0.5]).unwrap();
        let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let sol = report.solution.unwrap();
        assert!((sol.objective - 1.0 / 1.5).abs() < 1e-12);
        assert_eq!(sol.support_size(), 1);
    }

    #[test]
    fn random_solves_satisfy_structure_and_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..12 {
            let (table, traffic) = random_instance(4, &mut rng);
            let report = solve(&table, &traffic, &SolverOptions::default()).unwrap();
            assert_eq!(report.status, SolveStatus::Optimal);
            let sol = report.solution.as_ref().unwrap();

            for pair in report.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9 * (1.0 + pair[0].abs()));
            }
            assert!(sol.support_size() <= 4);
            for i in 0..4 {
                assert!(sol.rates[i] > traffic.rate(i));
            }

            let grad =
                crate::spectrum::objective_gradient(&sol.partition, &table, &traffic).unwrap();
            let grad_scale = grad.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
            let gap = stationarity_gap(&sol.partition, &table, &traffic, 1e-3).unwrap();
            assert!(
                gap <= 1e-4 * (1.0 + grad_scale),
                "stationarity violated: {gap} vs scale {grad_scale}"
            );
        }
    }

    #[test]
    fn solver_output_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (table, traffic) = random_instance(5, &mut rng);
        let a = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        let b = solve(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn pruning_removes_affinely_dependent_segments() {
        // Columns (2,0), (0,2) and (1,1) are collinear, so a uniform mix has
        // redundant support; pruning must shed at least one segment without
        // moving the mixed rate point.
        let mut cand = vec![BtsSubset(0b01), BtsSubset(0b10), BtsSubset(0b11)];
        let mut x = vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let mut cols = vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]];
        caratheodory_prune(&mut cand, &mut x, &mut cols);
        assert!(x.len() <= 2);
        let r = mix_rates(&cols, &x, 2);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baselines_bracket_the_optimized_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..8 {
            let (table, traffic) = random_instance(4, &mut rng);
            let opts = SolverOptions::default();
            let best = solve(&table, &traffic, &opts).unwrap();
            let best_obj = best.solution.unwrap().objective;
            if let Some(sol) = full_reuse_baseline(&table, &traffic).unwrap().solution {
                assert!(best_obj <= sol.objective + 1e-7 * (1.0 + sol.objective));
            }
            if let Some(sol) = solve_orthogonal_baseline(&table, &traffic, &opts)
                .unwrap()
                .solution
            {
                assert!(best_obj <= sol.objective + 1e-7 * (1.0 + sol.objective));
            }
        }
    }

    #[test]
    fn orthogonal_baseline_survives_loads_that_break_full_reuse() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![0.9, 0.9]).unwrap();
        let full = full_reuse_baseline(&table, &traffic).unwrap();
        assert_eq!(full.status, SolveStatus::Infeasible);
        let orth = solve_orthogonal_baseline(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(orth.status, SolveStatus::Optimal);
        let sol = orth.solution.unwrap();
        assert!((sol.objective - 10.0).abs() < 1e-4);
    }

    #[test]
    fn orthogonal_baseline_rejects_demand_beyond_exclusive_capacity() {
        let table = symmetric_pair(0.8);
        let traffic = TrafficProfile::new(vec![1.5, 1.5]).unwrap();
        let orth = solve_orthogonal_baseline(&table, &traffic, &SolverOptions::default()).unwrap();
        assert_eq!(orth.status, SolveStatus::Infeasible);
        assert!(orth.solution.is_none());
    }
}
