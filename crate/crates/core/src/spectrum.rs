//! The rate model: spectrum partitions, traffic profiles, per-station service
//! rates, and the conservative delay objective with its gradient.
//!
//! A partition assigns a fraction of the unit bandwidth to every sharing
//! combination. Service rates are linear in the partition; the objective is
//! the traffic-weighted mean of the per-station `1 / (rate - arrival)` delay
//! terms, evaluated at worst-case rates (all other stations assumed busy).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subset::BtsSubset;
use crate::topology::SpectralEfficiencyTable;

/// Rate gap below which a queue is treated as unstable, in rate units.
/// Keeps the objective finite and the numerics well conditioned near the
/// stability boundary.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Allocation below this fraction of the band counts as an empty segment.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("partition is over {got} stations but the table has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("queue at station {bts} is unstable: service rate {rate} <= arrival rate {lambda}")]
    Unstable { bts: usize, rate: f64, lambda: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid traffic profile: {0}")]
    InvalidTraffic(String),
}

/// Fractions of the unit bandwidth keyed by sharing combination. Sparse:
/// absent subsets hold zero. Entries iterate in mask order, which makes the
/// serialized form canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct SpectrumPartition {
    k: usize,
    x: BTreeMap<BtsSubset, f64>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    k: usize,
    segments: Vec<SegmentRepr>,
}

#[derive(Serialize, Deserialize)]
struct SegmentRepr {
    subset: BtsSubset,
    fraction: f64,
}

impl From<SpectrumPartition> for PartitionRepr {
    fn from(p: SpectrumPartition) -> Self {
        PartitionRepr {
            k: p.k,
            segments: p
                .x
                .into_iter()
                .map(|(subset, fraction)| SegmentRepr { subset, fraction })
                .collect(),
        }
    }
}

impl TryFrom<PartitionRepr> for SpectrumPartition {
    type Error = String;

    fn try_from(repr: PartitionRepr) -> Result<Self, String> {
        SpectrumPartition::new(
            repr.k,
            repr.segments.into_iter().map(|s| (s.subset, s.fraction)),
        )
        .map_err(|e| e.to_string())
    }
}

impl SpectrumPartition {
    /// Build a validated partition: fractions nonnegative and summing to 1
    /// (within 1e-9), nothing on the empty set, subsets within `{0,..,k-1}`.
    pub fn new(
        k: usize,
        entries: impl IntoIterator<Item = (BtsSubset, f64)>,
    ) -> Result<SpectrumPartition, SpectrumError> {
        let p = SpectrumPartition::from_entries_unchecked(k, entries);
        p.validate()?;
        Ok(p)
    }

    /// Build without the sum-to-one check. Used where off-simplex points are
    /// legitimately evaluated (finite differences, partial line-search steps).
    pub fn from_entries_unchecked(
        k: usize,
        entries: impl IntoIterator<Item = (BtsSubset, f64)>,
    ) -> SpectrumPartition {
        let mut x = BTreeMap::new();
        for (b, f) in entries {
            if f != 0.0 {
                *x.entry(b).or_insert(0.0) += f;
            }
        }
        x.retain(|_, f| *f != 0.0);
        SpectrumPartition { k, x }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let full = BtsSubset::all(self.k);
        let mut total = 0.0;
        for (&b, &f) in &self.x {
            if b.is_empty() {
                return Err(SpectrumError::InvalidPartition(
                    "the empty combination cannot carry bandwidth".into(),
                ));
            }
            if !b.is_subset_of(full) {
                return Err(SpectrumError::InvalidPartition(format!(
                    "subset {b} is outside the {} stations",
                    self.k
                )));
            }
            if !(f >= 0.0 && f.is_finite()) {
                return Err(SpectrumError::InvalidPartition(format!(
                    "fraction for {b} is {f}"
                )));
            }
            total += f;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(SpectrumError::InvalidPartition(format!(
                "fractions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// The whole band shared by everyone.
    pub fn full_reuse(k: usize) -> SpectrumPartition {
        SpectrumPartition::from_entries_unchecked(k, [(BtsSubset::all(k), 1.0)])
    }

    /// Equal exclusive slices, one per station.
    pub fn orthogonal_uniform(k: usize) -> SpectrumPartition {
        let w = 1.0 / k as f64;
        SpectrumPartition::from_entries_unchecked(k, (0..k).map(|i| (BtsSubset::singleton(i), w)))
    }

    pub fn num_bts(&self) -> usize {
        self.k
    }

    pub fn fraction(&self, b: BtsSubset) -> f64 {
        self.x.get(&b).copied().unwrap_or(0.0)
    }

    /// Entries in mask order.
    pub fn entries(&self) -> impl Iterator<Item = (BtsSubset, f64)> + '_ {
        self.x.iter().map(|(&b, &f)| (b, f))
    }

    /// Segments with more than `threshold` of the band, in mask order.
    pub fn support(&self, threshold: f64) -> Vec<(BtsSubset, f64)> {
        self.entries().filter(|&(_, f)| f > threshold).collect()
    }

    pub fn support_size(&self, threshold: f64) -> usize {
        self.entries().filter(|&(_, f)| f > threshold).count()
    }

    /// Total bandwidth station `i` may transmit on.
    pub fn bandwidth_of(&self, i: usize) -> f64 {
        self.entries()
            .filter(|&(b, _)| b.contains(i))
            .map(|(_, f)| f)
            .sum()
    }

    /// L1 distance between two partitions over the union of their supports.
    pub fn l1_distance(&self, other: &SpectrumPartition) -> f64 {
        let mut d = 0.0;
        for (b, f) in self.entries() {
            d += (f - other.fraction(b)).abs();
        }
        for (b, f) in other.entries() {
            if self.fraction(b) == 0.0 {
                d += f.abs();
            }
        }
        d
    }

    /// Drop segments at or below `threshold` and rescale the rest to sum to 1.
    pub fn cleaned(&self, threshold: f64) -> SpectrumPartition {
        let kept: Vec<(BtsSubset, f64)> = self.support(threshold);
        let total: f64 = kept.iter().map(|&(_, f)| f).sum();
        SpectrumPartition::from_entries_unchecked(
            self.k,
            kept.into_iter().map(|(b, f)| (b, f / total)),
        )
    }
}

/// Poisson packet arrival rates per station; packet lengths are exponential
/// with unit mean, so rates and spectral efficiencies share units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    lambda: Vec<f64>,
}

impl TrafficProfile {
    pub fn new(lambda: Vec<f64>) -> Result<TrafficProfile, SpectrumError> {
        if lambda.is_empty() {
            return Err(SpectrumError::InvalidTraffic("no stations".into()));
        }
        if let Some(l) = lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(SpectrumError::InvalidTraffic(format!(
                "arrival rates must be positive and finite, got {l}"
            )));
        }
        Ok(TrafficProfile { lambda })
    }

    /// Same arrival rate at every station.
    pub fn uniform(k: usize, rate: f64) -> Result<TrafficProfile, SpectrumError> {
        TrafficProfile::new(vec![rate; k])
    }

    pub fn num_bts(&self) -> usize {
        self.lambda.len()
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.lambda
    }

    pub fn total(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Fraction of total traffic served by each station.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.total();
        self.lambda.iter().map(|l| l / total).collect()
    }
}

/// Per-station service rates, in the same units as arrival rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_dims(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
) -> Result<(), SpectrumError> {
    if partition.num_bts() != table.num_bts() {
        return Err(SpectrumError::DimensionMismatch {
            expected: table.num_bts(),
            got: partition.num_bts(),
        });
    }
    Ok(())
}

/// Service rate of station `i` when exactly the stations in `active` are
/// transmitting: on each segment `B`, only the members of `B` that are also
/// active generate signal or interference.
pub fn service_rate(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
    active: BtsSubset,
    i: usize,
) -> Result<f64, SpectrumError> {
    check_dims(partition, table)?;
    Ok(partition
        .entries()
        .map(|(b, f)| table.get(i, b.intersect(active)) * f)
        .sum())
}

/// Worst-case service rates: every other station assumed always transmitting
/// (active set = all stations).
pub fn worst_case_rates(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
) -> Result<RateVector, SpectrumError> {
    check_dims(partition, table)?;
    let k = table.num_bts();
    let mut rates = vec![0.0; k];
    for (b, f) in partition.entries() {
        for i in b.members() {
            rates[i] += table.get(i, b) * f;
        }
    }
    Ok(RateVector(rates))
}

/// Mean sojourn time of an M/M/1 queue: `1 / (rate - arrivals)`.
pub fn mm1_sojourn(rate: f64, lambda: f64) -> Result<f64, SpectrumError> {
    if rate - lambda <= STABILITY_MARGIN {
        return Err(SpectrumError::Unstable {
            bts: 0,
            rate,
            lambda,
        });
    }
    Ok(1.0 / (rate - lambda))
}

/// Traffic-weighted mean sojourn time at the given worst-case rates.
/// Reports the first unstable station if any rate gap closes.
pub fn objective_from_rates(
    rates: &RateVector,
    traffic: &TrafficProfile,
) -> Result<f64, SpectrumError> {
    if rates.len() != traffic.num_bts() {
        return Err(SpectrumError::DimensionMismatch {
            expected: traffic.num_bts(),
            got: rates.len(),
        });
    }
    let total = traffic.total();
    let mut value = 0.0;
    for i in 0..rates.len() {
        let r = rates.get(i);
        let l = traffic.rate(i);
        if r - l <= STABILITY_MARGIN {
            return Err(SpectrumError::Unstable {
                bts: i,
                rate: r,
                lambda: l,
            });
        }
        value += (l / total) / (r - l);
    }
    Ok(value)
}

/// Conservative network delay of a partition: weighted mean of per-station
/// M/M/1 sojourn times at worst-case rates.
pub fn objective(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<f64, SpectrumError> {
    objective_from_rates(&worst_case_rates(partition, table)?, traffic)
}

/// Partial derivatives of the objective at the given rates, indexed by subset
/// mask (entry for the empty set is 0):
/// `d/dx(B) = -sum_{i in B} w_i s_i(B) / (r_i - lambda_i)^2`.
pub fn objective_gradient_from_rates(
    rates: &RateVector,
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<Vec<f64>, SpectrumError> {
    let k = table.num_bts();
    if rates.len() != k || traffic.num_bts() != k {
        return Err(SpectrumError::DimensionMismatch {
            expected: k,
            got: rates.len(),
        });
    }
    let total = traffic.total();
    let mut pressure = vec![0.0; k];
    for (i, p) in pressure.iter_mut().enumerate() {
        let gap = rates.get(i) - traffic.rate(i);
        if gap <= STABILITY_MARGIN {
            return Err(SpectrumError::Unstable {
                bts: i,
                rate: rates.get(i),
                lambda: traffic.rate(i),
            });
        }
        *p = (traffic.rate(i) / total) / (gap * gap);
    }
    let mut grad = vec![0.0; table.num_subsets()];
    for (mask, g) in grad.iter_mut().enumerate().skip(1) {
        let b = BtsSubset(mask as u16);
        *g = -b
            .members()
            .map(|i| pressure[i] * table.get(i, b))
            .sum::<f64>();
    }
    Ok(grad)
}

/// Gradient of the objective with respect to every segment fraction.
pub fn objective_gradient(
    partition: &SpectrumPartition,
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
) -> Result<Vec<f64>, SpectrumError> {
    objective_gradient_from_rates(&worst_case_rates(partition, table)?, table, traffic)
}
