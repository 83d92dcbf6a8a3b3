//! Bitmask subsets of an item set of at most 64 items.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported item count.
pub const MAX_ITEMS: usize = 64;

/// A subset of `0..m` encoded as a bitmask; bit `j` set iff item `j` is a member.
///
/// The encoding is canonical: two subsets are equal iff their masks are equal.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub const fn from_bits(bits: u64) -> Self {
        Subset(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// All of `0..m`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_ITEMS);
        if m == MAX_ITEMS {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << m) - 1)
        }
    }

    pub fn singleton(j: usize) -> Self {
        debug_assert!(j < MAX_ITEMS);
        Subset(1u64 << j)
    }

    /// Builds a subset from item indices, rejecting indices `>= m`.
    pub fn from_items<I: IntoIterator<Item = usize>>(items: I, m: usize) -> Result<Self> {
        let mut bits = 0u64;
        for j in items {
            if j >= m || j >= MAX_ITEMS {
                return Err(Error::input(format!("item index {j} out of range for m = {m}")));
            }
            bits |= 1u64 << j;
        }
        Ok(Subset(bits))
    }

    pub fn contains(self, j: usize) -> bool {
        j < MAX_ITEMS && self.0 >> j & 1 == 1
    }

    pub fn with(self, j: usize) -> Self {
        Subset(self.0 | 1u64 << j)
    }

    pub fn without(self, j: usize) -> Self {
        Subset(self.0 & !(1u64 << j))
    }

    /// Symmetric difference with a single item.
    pub fn toggle(self, j: usize) -> Self {
        Subset(self.0 ^ 1u64 << j)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Subset) -> Self {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Self {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Self {
        Subset(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Complement within `0..m`.
    pub fn complement(self, m: usize) -> Self {
        Subset(!self.0 & Subset::full(m).0)
    }

    /// True iff every member is `< m`.
    pub fn fits(self, m: usize) -> bool {
        self.is_subset_of(Subset::full(m))
    }

    pub fn iter(self) -> Items {
        Items(self.0)
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<usize> for Subset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(Subset::EMPTY, Subset::with)
    }
}

/// Ascending iterator over the members of a [`Subset`].
pub struct Items(u64);

impl Iterator for Items {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let j = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(j)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Items {}

/// Calls `f` on every subset of `items` with exactly `size` members, in
/// colexicographic order of positions, until `f` returns `Some`.
pub(crate) fn find_combination<T>(items: &[usize], size: usize, mut f: impl FnMut(Subset) -> Option<T>) -> Option<T> {
    let p = items.len();
    if size > p {
        return None;
    }
    if size == 0 {
        return f(Subset::EMPTY);
    }
    debug_assert!(p < 64);
    let limit = 1u64 << p;
    // Gosper's hack over position masks.
    let mut pos: u64 = (1u64 << size) - 1;
    while pos < limit {
        let mut s = Subset::EMPTY;
        let mut rest = pos;
        while rest != 0 {
            s = s.with(items[rest.trailing_zeros() as usize]);
            rest &= rest - 1;
        }
        if let Some(t) = f(s) {
            return Some(t);
        }
        let c = pos & pos.wrapping_neg();
        let r = pos + c;
        pos = (((r ^ pos) >> 2) / c) | r;
    }
    None
}
