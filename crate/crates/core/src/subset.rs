//! Bitmask representation of a subset of base stations.
//!
//! All spectrum-sharing combinations are subsets of the station index set
//! `{0, .., k-1}`, so a `u16` mask (stations capped at 16) indexes every
//! combination compactly and gives a canonical ordering for free.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of base stations a scenario may hold.
///
/// Tables and partitions enumerate all `2^K` sharing combinations, so this is
/// a hard cap rather than a tunable.
pub const MAX_BTS: usize = 16;

/// A subset of base stations, encoded as a bitmask (bit `i` = station `i`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BtsSubset(pub u16);

impl BtsSubset {
    pub const EMPTY: BtsSubset = BtsSubset(0);

    /// The subset containing only station `i`.
    pub fn singleton(i: usize) -> Self {
        debug_assert!(i < MAX_BTS);
        BtsSubset(1 << i)
    }

    /// The full set `{0, .., k-1}`.
    pub fn all(k: usize) -> Self {
        debug_assert!(k <= MAX_BTS);
        if k == 0 {
            BtsSubset(0)
        } else {
            BtsSubset(((1u32 << k) - 1) as u16)
        }
    }

    pub fn from_members(members: &[usize]) -> Self {
        let mut mask = 0u16;
        for &i in members {
            debug_assert!(i < MAX_BTS);
            mask |= 1 << i;
        }
        BtsSubset(mask)
    }

    pub fn mask(self) -> u16 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_BTS && self.0 & (1 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn intersect(self, other: BtsSubset) -> BtsSubset {
        BtsSubset(self.0 & other.0)
    }

    pub fn union(self, other: BtsSubset) -> BtsSubset {
        BtsSubset(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: BtsSubset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member station indices in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..MAX_BTS).filter(move |i| mask & (1 << i) != 0)
    }

    /// All `2^k` subsets of `{0, .., k-1}` in mask order, empty set first.
    pub fn enumerate(k: usize) -> impl Iterator<Item = BtsSubset> {
        debug_assert!(k <= MAX_BTS);
        (0..(1u32 << k)).map(|m| BtsSubset(m as u16))
    }

    /// All nonempty subsets of `{0, .., k-1}` in mask order.
    pub fn enumerate_nonempty(k: usize) -> impl Iterator<Item = BtsSubset> {
        Self::enumerate(k).skip(1)
    }
}

impl fmt::Debug for BtsSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BtsSubset({})", self)
    }
}

impl fmt::Display for BtsSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.members().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_and_cardinality() {
        let b = BtsSubset::from_members(&[0, 2, 5]);
        assert!(b.contains(0) && b.contains(2) && b.contains(5));
        assert!(!b.contains(1) && !b.contains(6));
        assert_eq!(b.len(), 3);
        assert_eq!(b.members().collect::<Vec<_>>(), vec![0, 2, 5]);
    }

    #[test]
    fn full_set_and_empty() {
        assert_eq!(BtsSubset::all(3).mask(), 0b111);
        assert_eq!(BtsSubset::all(16).mask(), u16::MAX);
        assert!(BtsSubset::EMPTY.is_empty());
        assert_eq!(BtsSubset::all(0), BtsSubset::EMPTY);
    }

    #[test]
    fn subset_relations() {
        let a = BtsSubset::from_members(&[1, 3]);
        let b = BtsSubset::from_members(&[0, 1, 3]);
        assert!(a.is_subset_of(b));
        assert!(!b.is_subset_of(a));
        assert_eq!(a.intersect(b), a);
        assert_eq!(a.union(b), b);
    }

    #[test]
    fn enumeration_order_is_mask_order() {
        let all: Vec<u16> = BtsSubset::enumerate(2).map(|b| b.mask()).collect();
        assert_eq!(all, vec![0b00, 0b01, 0b10, 0b11]);
        assert_eq!(BtsSubset::enumerate_nonempty(2).count(), 3);
    }

    #[test]
    fn display_lists_members() {
        assert_eq!(BtsSubset::from_members(&[0, 2]).to_string(), "{0,2}");
        assert_eq!(BtsSubset::EMPTY.to_string(), "{}");
    }
}
