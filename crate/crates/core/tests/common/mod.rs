#![allow(dead_code)]

//! Shared fixtures for the integration suites: synthetic efficiency tables,
//! random feasible instances, the seeded reference scenario, and a
//! brute-force grid oracle for small station counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hetnet_core::spectrum::{worst_case_rates, SpectrumPartition, TrafficProfile};
use hetnet_core::subset::BtsSubset;
use hetnet_core::topology::{
    build_efficiency_table, Deployment, HexGrid, RadioParams, Scenario, SpectralEfficiencyTable,
};

/// Product-form monotone table: a solo efficiency per station, damped by a
/// fixed factor per interferer. Satisfies all table invariants by
/// construction while being cheap at any K.
pub fn random_table(k: usize, rng: &mut ChaCha8Rng) -> SpectralEfficiencyTable {
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
    SpectralEfficiencyTable::from_rows(rows).unwrap()
}

/// Random point on the partition simplex with a support of about `2k`
/// segments.
pub fn random_partition(k: usize, rng: &mut ChaCha8Rng) -> SpectrumPartition {
    let masks: Vec<u16> = (1..1u32 << k).map(|m| m as u16).collect();
    let mut entries = Vec::new();
    let mut total = 0.0;
    for _ in 0..2 * k {
        let mask = masks[rng.random_range(0..masks.len())];
        let weight = -rng.random_range(0.0001..1.0_f64).ln();
        entries.push((BtsSubset(mask), weight));
        total += weight;
    }
    SpectrumPartition::from_entries_unchecked(k, entries.into_iter().map(|(b, w)| (b, w / total)))
}

/// Table plus demand that is guaranteed supportable: rates of a random
/// partition scaled down by a random load factor.
pub fn random_feasible_instance(
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (SpectralEfficiencyTable, TrafficProfile) {
    let table = random_table(k, rng);
    let (_, traffic) = random_stable_load(&table, rng);
    (table, traffic)
}

/// A random strictly stable pair (partition, traffic) for a given table.
/// Partitions that starve a station are redrawn.
pub fn random_stable_load(
    table: &SpectralEfficiencyTable,
    rng: &mut ChaCha8Rng,
) -> (SpectrumPartition, TrafficProfile) {
    let k = table.num_bts();
    loop {
        let p = random_partition(k, rng);
        let rates = worst_case_rates(&p, table).unwrap();
        if (0..k).any(|i| rates.get(i) <= 1e-9) {
            continue;
        }
        let lambda: Vec<f64> = (0..k)
            .map(|i| rates.get(i) * rng.random_range(0.3..0.8))
            .collect();
        return (p, TrafficProfile::new(lambda).unwrap());
    }
}

/// The pinned reference deployment: 100 m x 100 m area, 20 m cell spacing,
/// seven stations on grid vertices, default radio parameters. The seed is
/// fixed so every suite exercises the same network.
pub const REFERENCE_SEED: u64 = 7;

pub fn reference_scenario() -> Scenario {
    scenario_with_seed(REFERENCE_SEED)
}

pub fn scenario_with_seed(seed: u64) -> Scenario {
    let grid = HexGrid::generate(100.0, 100.0, 20.0).unwrap();
    let deployment = Deployment::generate(grid, 7, seed).unwrap();
    let radio = RadioParams::default();
    let table = build_efficiency_table(&deployment, &radio).unwrap();
    Scenario {
        deployment,
        radio,
        table,
    }
}

/// Largest uniform per-station demand `feasible` accepts, by doubling then
/// bisection. `feasible` must be monotone (true below, false above).
pub fn max_uniform_load(mut feasible: impl FnMut(f64) -> bool, hint: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = hint.max(1e-3);
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return lo;
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exhaustive minimum of the delay objective over the grid of partitions
/// whose fractions are multiples of `1/steps`, over all `2^k - 1` segments.
/// Infeasible and provably-worse branches are pruned via per-station
/// optimistic rates. Practical up to k = 3 at fine steps.
pub fn grid_search_best(
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    steps: usize,
) -> f64 {
    let k = table.num_bts();
    let cols: Vec<Vec<f64>> = BtsSubset::enumerate_nonempty(k)
        .map(|b| table.rate_column(b))
        .collect();
    let lambda = traffic.rates().to_vec();
    let w = traffic.weights();
    let step = 1.0 / steps as f64;

    // suffix_max[j][i]: best efficiency station i can still get from any
    // segment at index >= j; used for optimistic-bound pruning.
    let mut suffix_max = vec![vec![0.0f64; k]; cols.len() + 1];
    for j in (0..cols.len()).rev() {
        for i in 0..k {
            suffix_max[j][i] = suffix_max[j + 1][i].max(cols[j][i]);
        }
    }

    (0..=steps)
        .into_par_iter()
        .map(|n0| {
            let mut r = vec![0.0; k];
            for i in 0..k {
                r[i] = n0 as f64 * step * cols[0][i];
            }
            let mut best = f64::INFINITY;
            descend(
                1,
                steps - n0,
                &mut r,
                &cols,
                &suffix_max,
                &lambda,
                &w,
                step,
                &mut best,
            );
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    j: usize,
    remaining: usize,
    r: &mut [f64],
    cols: &[Vec<f64>],
    suffix_max: &[Vec<f64>],
    lambda: &[f64],
    w: &[f64],
    step: f64,
    best: &mut f64,
) {
    let k = r.len();
    // Optimistic objective: all remaining bandwidth simultaneously on each
    // station's best remaining segment. Anything above `best` is hopeless.
    let budget = remaining as f64 * step;
    let mut bound = 0.0;
    for i in 0..k {
        let gap = r[i] + budget * suffix_max[j][i] - lambda[i];
        if gap <= 0.0 {
            return;
        }
        bound += w[i] / gap;
    }
    if bound >= *best {
        return;
    }

    if j == cols.len() - 1 {
        let mut value = 0.0;
        for i in 0..k {
            let gap = r[i] + budget * cols[j][i] - lambda[i];
            if gap <= 0.0 {
                return;
            }
            value += w[i] / gap;
        }
        if value < *best {
            *best = value;
        }
        return;
    }

    for n in 0..=remaining {
        descend(
            j + 1,
            remaining - n,
            r,
            cols,
            suffix_max,
            lambda,
            w,
            step,
            best,
        );
        if n < remaining {
            for i in 0..k {
                r[i] += step * cols[j][i];
            }
        }
    }
    for i in 0..k {
        r[i] -= remaining as f64 * step * cols[j][i];
    }
}
