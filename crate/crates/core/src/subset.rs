//! Bitmask subsets of the state space.
//!
//! Desk scale (|S| <= enumeration cap) makes a `u32` mask the right
//! representation: subset enumeration is a counter, complements are an xor.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A subset of state indices `0..n`, stored as a bitmask.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSet(u32);

/// Largest state-space size a `StateSet` can index.
pub const MAX_STATES: usize = 32;

impl StateSet {
    pub const EMPTY: StateSet = StateSet(0);

    pub fn singleton(i: usize) -> Self {
        debug_assert!(i < MAX_STATES);
        StateSet(1 << i)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_STATES);
        if n == MAX_STATES {
            StateSet(u32::MAX)
        } else {
            StateSet((1u32 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut mask = 0u32;
        for i in iter {
            debug_assert!(i < MAX_STATES);
            mask |= 1 << i;
        }
        StateSet(mask)
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_STATES && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, i: usize) -> Self {
        StateSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        StateSet(self.0 & !(1 << i))
    }

    pub fn union(self, other: Self) -> Self {
        StateSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        StateSet(self.0 & other.0)
    }

    pub fn minus(self, other: Self) -> Self {
        StateSet(self.0 & !other.0)
    }

    /// Complement with respect to a space of `n` states.
    pub fn complement(self, n: usize) -> Self {
        StateSet(Self::full(n).0 & !self.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Member indices, ascending.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All proper nonempty subsets of `0..n`, in raw mask order.
    pub fn proper_nonempty(n: usize) -> impl Iterator<Item = StateSet> {
        let full = Self::full(n).0;
        (1..full).map(StateSet)
    }

    /// All nonempty strict subsets of `self`, in raw mask order.
    pub fn nonempty_strict_subsets(self) -> impl Iterator<Item = StateSet> {
        let outer = self.0;
        (1..outer)
            .filter(move |m| m & !outer == 0)
            .map(StateSet)
    }

    /// Reporting order for argmin ties: fewer states first, then ascending
    /// index lists lexicographically.
    pub fn canonical_cmp(self, other: Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.indices().cmp(&other.indices()))
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateSet{:?}", self.indices())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = StateSet::from_indices([0, 2]);
        let b = StateSet::singleton(1);
        assert!(a.contains(0) && a.contains(2) && !a.contains(1));
        assert_eq!(a.union(b), StateSet::full(3));
        assert_eq!(a.complement(3), b);
        assert_eq!(a.len(), 2);
        assert!(b.is_subset_of(StateSet::full(3)));
        assert!(a.is_disjoint(b));
        assert_eq!(a.minus(StateSet::singleton(2)), StateSet::singleton(0));
    }

    #[test]
    fn proper_subset_count() {
        assert_eq!(StateSet::proper_nonempty(3).count(), 6);
        assert_eq!(StateSet::proper_nonempty(5).count(), 30);
    }

    #[test]
    fn strict_subsets_of_subset() {
        let s1 = StateSet::from_indices([0, 1]);
        let subs: Vec<_> = s1.nonempty_strict_subsets().collect();
        assert_eq!(subs, vec![StateSet::singleton(0), StateSet::singleton(1)]);
    }

    #[test]
    fn canonical_order_prefers_small_sets() {
        let single = StateSet::singleton(2);
        let pair = StateSet::from_indices([0, 1]);
        assert_eq!(single.canonical_cmp(pair), Ordering::Less);
        let a = StateSet::from_indices([0, 3]);
        let b = StateSet::from_indices([1, 2]);
        assert_eq!(a.canonical_cmp(b), Ordering::Less);
    }

    #[test]
    fn iter_ascending() {
        assert_eq!(StateSet::from_indices([4, 1, 6]).indices(), vec![1, 4, 6]);
    }
}
