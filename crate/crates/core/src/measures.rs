//! Discrepancy and transfer-discrepancy of integral colorings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rounding::Coloring;
use crate::subset::{find_combination, Subset};
use crate::valuations::{common_item_count, TransferValuation, Valuation, TRANSFER_MAX_ITEMS};

/// Largest `k^m` [`disc_opt_bruteforce`] will enumerate.
pub const BRUTEFORCE_MAX_COLORINGS: u64 = 10_000_000;

/// Largest `|A| + |B|` [`transfer_imbalance`] will enumerate.
pub const TRANSFER_MAX_PAIR_ITEMS: usize = TRANSFER_MAX_ITEMS;

/// A worst `(agent, color pair)` cell and its value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyValue {
    pub value: f64,
    pub agent: usize,
    pub colors: (usize, usize),
}

impl DiscrepancyValue {
    const ZERO: DiscrepancyValue = DiscrepancyValue { value: 0.0, agent: 0, colors: (0, 0) };
}

fn check_profile(vals: &[Valuation], coloring: &Coloring) -> Result<()> {
    let m = common_item_count(vals)?;
    if coloring.len() != m {
        return Err(Error::input(format!("coloring covers {} items, valuations have {m}", coloring.len())));
    }
    Ok(())
}

/// `max over agents i and colors l, l' of |v_i(chi^-1(l)) - v_i(chi^-1(l'))|`.
pub fn disc_of_coloring(vals: &[Valuation], coloring: &Coloring) -> Result<DiscrepancyValue> {
    check_profile(vals, coloring)?;
    Ok(disc_of_bundles(vals, &coloring.bundles()))
}

pub(crate) fn disc_of_bundles(vals: &[Valuation], bundles: &[Subset]) -> DiscrepancyValue {
    let mut best = DiscrepancyValue::ZERO;
    for (i, v) in vals.iter().enumerate() {
        let mut lo = (f64::INFINITY, 0);
        let mut hi = (f64::NEG_INFINITY, 0);
        for (l, &b) in bundles.iter().enumerate() {
            let x = v.value(b);
            if x < lo.0 {
                lo = (x, l);
            }
            if x > hi.0 {
                hi = (x, l);
            }
        }
        let spread = hi.0 - lo.0;
        if spread > best.value {
            best = DiscrepancyValue { value: spread, agent: i, colors: (lo.1.min(hi.1), lo.1.max(hi.1)) };
        }
    }
    best
}

/// Optimal discrepancy over all `k^m` colorings, with an optimal coloring.
///
/// Colors are interchangeable, so item 0 is pinned to color 0.
pub fn disc_opt_bruteforce(vals: &[Valuation], k: usize) -> Result<(DiscrepancyValue, Coloring)> {
    let m = common_item_count(vals)?;
    if k == 0 {
        return Err(Error::input("k must be at least 1"));
    }
    let total = (k as u64).checked_pow(m as u32).filter(|&c| c <= BRUTEFORCE_MAX_COLORINGS);
    if total.is_none() {
        return Err(Error::capacity(format!(
            "k^m = {k}^{m} colorings exceeds the brute-force cap of {BRUTEFORCE_MAX_COLORINGS}"
        )));
    }
    if k == 1 {
        return Ok((DiscrepancyValue::ZERO, Coloring::new(vec![0; m], 1)?));
    }
    let mut digits = vec![0usize; m];
    let mut bundles = vec![Subset::EMPTY; k];
    bundles[0] = Subset::full(m);
    let mut best = (f64::INFINITY, DiscrepancyValue::ZERO, digits.clone());
    loop {
        let d = disc_of_bundles(vals, &bundles);
        if d.value < best.0 {
            best = (d.value, d, digits.clone());
            if d.value == 0.0 {
                break;
            }
        }
        // Odometer over items 1..m; item 0 stays on color 0.
        let mut j = 1;
        while j < m {
            bundles[digits[j]] = bundles[digits[j]].without(j);
            digits[j] = (digits[j] + 1) % k;
            bundles[digits[j]] = bundles[digits[j]].with(j);
            if digits[j] != 0 {
                break;
            }
            j += 1;
        }
        if j >= m {
            break;
        }
    }
    Ok((best.1, Coloring::new(best.2, k)?))
}

/// Minimal transfer between two bundles and a witness for it.
///
/// `richer` is the weakly richer side `A` after the definition's swap rule;
/// moving `from_richer` out of `A` and `from_poorer` out of `B` makes
/// `v((A \ S) + S') <= v((B \ S') + S)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferValue {
    pub value: usize,
    pub richer: Subset,
    pub poorer: Subset,
    pub from_richer: Subset,
    pub from_poorer: Subset,
}

impl TransferValue {
    /// Values of the two sides after applying the witness: `(A', B')`.
    pub fn applied(&self, v: &Valuation) -> (f64, f64) {
        let a = self.richer.difference(self.from_richer).union(self.from_poorer);
        let b = self.poorer.difference(self.from_poorer).union(self.from_richer);
        (v.value(a), v.value(b))
    }
}

/// `T_v(A, B)`: the fewest items moved between `A` and `B` so that the
/// richer side is no longer strictly richer. Ties `v(A) = v(B)` give 0.
pub fn transfer_imbalance(v: &Valuation, a: Subset, b: Subset) -> Result<TransferValue> {
    let m = v.num_items();
    if !a.fits(m) || !b.fits(m) {
        return Err(Error::input(format!("bundles reference items outside 0..{m}")));
    }
    if !a.is_disjoint(b) {
        return Err(Error::input(format!("bundles overlap on {:?}", a.intersection(b))));
    }
    let size = a.len() + b.len();
    if size > TRANSFER_MAX_PAIR_ITEMS {
        return Err(Error::capacity(format!(
            "transfer enumeration over {size} items exceeds the cap of {TRANSFER_MAX_PAIR_ITEMS}"
        )));
    }
    Ok(transfer_unchecked(v, a, b))
}

fn transfer_unchecked(v: &Valuation, a: Subset, b: Subset) -> TransferValue {
    let (richer, poorer) = if v.value(a) < v.value(b) { (b, a) } else { (a, b) };
    let pool: Vec<usize> = richer.union(poorer).iter().collect();
    for d in 0..=pool.len() {
        let hit = find_combination(&pool, d, |moved| {
            let s = moved.intersection(richer);
            let s2 = moved.intersection(poorer);
            let left = v.value(richer.difference(s).union(s2));
            let right = v.value(poorer.difference(s2).union(s));
            (left <= right).then_some((s, s2))
        });
        if let Some((from_richer, from_poorer)) = hit {
            return TransferValue { value: d, richer, poorer, from_richer, from_poorer };
        }
    }
    // Swapping everything always satisfies the inequality.
    unreachable!("full exchange satisfies the transfer condition")
}

/// `v'(S)`: `+T_v(S, S^c)` if `v(S) >= v(S^c)`, else `-T_v(S, S^c)`.
pub(crate) fn signed_transfer(v: &Valuation, s: Subset) -> i64 {
    let c = s.complement(v.num_items());
    let t = transfer_unchecked(v, s, c).value as i64;
    if v.value(s) >= v.value(c) {
        t
    } else {
        -t
    }
}

/// Wraps `v` into its signed transfer imbalance oracle, with marginal bound
/// [`TRANSFER_DERIVED_BOUND`](crate::valuations::TRANSFER_DERIVED_BOUND).
pub fn vprime_transform(v: Arc<Valuation>) -> Result<Valuation> {
    TransferValuation::new(v).map(Valuation::TransferDerived)
}

/// `max over agents and color pairs of T_{v_i}(chi^-1(l), chi^-1(l'))`.
pub fn transfer_disc_of_coloring(vals: &[Valuation], coloring: &Coloring) -> Result<DiscrepancyValue> {
    check_profile(vals, coloring)?;
    let bundles = coloring.bundles();
    let k = bundles.len();
    let mut best = DiscrepancyValue::ZERO;
    for (i, v) in vals.iter().enumerate() {
        for l in 0..k {
            for l2 in l + 1..k {
                let t = transfer_imbalance(v, bundles[l], bundles[l2])?.value as f64;
                if t > best.value {
                    best = DiscrepancyValue { value: t, agent: i, colors: (l, l2) };
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuations::{verify_marginal_bound, Verification};

    fn additive(w: &[f64]) -> Valuation {
        Valuation::additive(w.to_vec()).unwrap()
    }

    fn coloring(c: &[usize], k: usize) -> Coloring {
        Coloring::new(c.to_vec(), k).unwrap()
    }

    fn set(items: &[usize], m: usize) -> Subset {
        Subset::from_items(items.iter().copied(), m).unwrap()
    }

    #[test]
    fn disc_examples() {
        let v = [additive(&[1.0, 1.0])];
        assert_eq!(disc_of_coloring(&v, &coloring(&[0, 1], 2)).unwrap().value, 0.0);
        let v = [additive(&[3.0, 1.0])];
        let d = disc_of_coloring(&v, &coloring(&[0, 1], 2)).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.colors, (0, 1));
    }

    #[test]
    fn bruteforce_examples() {
        let (d, c) = disc_opt_bruteforce(&[additive(&[1.0; 4])], 2).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(disc_of_coloring(&[additive(&[1.0; 4])], &c).unwrap().value, 0.0);
        assert_eq!(disc_opt_bruteforce(&[additive(&[1.0; 3])], 2).unwrap().0.value, 1.0);
        assert_eq!(disc_opt_bruteforce(&[additive(&[0.3, 0.9])], 1).unwrap().0.value, 0.0);
    }

    #[test]
    fn bruteforce_capacity() {
        let v = [additive(&[0.5; 24])];
        assert!(matches!(disc_opt_bruteforce(&v, 2), Err(Error::Capacity(_))));
    }

    #[test]
    fn transfer_examples() {
        // A = {a: 3, b: 1}, B = {c: 2}; moving b gives 3 <= 3. Moving a also
        // works, and comes first in enumeration order.
        let v = additive(&[3.0, 1.0, 2.0]);
        let t = transfer_imbalance(&v, set(&[0, 1], 3), set(&[2], 3)).unwrap();
        assert_eq!(t.value, 1);
        assert_eq!(t.from_richer.len() + t.from_poorer.len(), 1);
        let (a, b) = t.applied(&v);
        assert!(a <= b);
        let moved_b = v.value(set(&[0], 3)) <= v.value(set(&[1, 2], 3));
        assert!(moved_b);

        let v = additive(&[1.0, 1.0]);
        let t = transfer_imbalance(&v, set(&[0], 2), set(&[1], 2)).unwrap();
        assert_eq!(t.value, 0);
        assert!(t.from_richer.is_empty() && t.from_poorer.is_empty());

        let v = additive(&[1.0; 4]);
        let t = transfer_imbalance(&v, Subset::full(4), Subset::EMPTY).unwrap();
        assert_eq!(t.value, 2);
    }

    #[test]
    fn transfer_swaps_poorer_first_argument() {
        let v = additive(&[3.0, 1.0, 2.0]);
        let t = transfer_imbalance(&v, set(&[2], 3), set(&[0, 1], 3)).unwrap();
        assert_eq!(t.value, 1);
        assert_eq!(t.richer, set(&[0, 1], 3));
    }

    #[test]
    fn transfer_errors() {
        let v = additive(&[1.0; 3]);
        assert!(matches!(transfer_imbalance(&v, set(&[0, 1], 3), set(&[1], 3)), Err(Error::Input(_))));
        let big = additive(&[0.1; 23]);
        assert!(matches!(transfer_imbalance(&big, Subset::full(23), Subset::EMPTY), Err(Error::Capacity(_))));
    }

    #[test]
    fn transfer_disc_examples() {
        let v = [additive(&[1.0, 1.0, 1.0])];
        assert_eq!(transfer_disc_of_coloring(&v, &coloring(&[0, 0, 1], 2)).unwrap().value, 1.0);
        let v = [additive(&[1.0, 1.0])];
        assert_eq!(transfer_disc_of_coloring(&v, &coloring(&[0, 1], 2)).unwrap().value, 0.0);
    }

    #[test]
    fn vprime_examples() {
        let v = Arc::new(additive(&[1.0; 4]));
        let vp = vprime_transform(v).unwrap();
        assert_eq!(vp.value(set(&[0, 1], 4)), 0.0);
        assert_eq!(vp.value(Subset::full(4)), 2.0);
        assert_eq!(vp.value(Subset::EMPTY), -2.0);
        assert_eq!(vp.marginal_bound(), 2.0);

        // v(S) = v(S^c) everywhere gives v' = 0.
        let sym = Arc::new(Valuation::custom(4, 1.0, |s| (s.len() as f64 - 2.0).abs()).unwrap());
        let vp = vprime_transform(sym).unwrap();
        assert!((0..16).all(|b| vp.value(Subset::from_bits(b)) == 0.0));
    }

    #[test]
    fn vprime_jumps_by_two_across_a_sign_change() {
        let vp = vprime_transform(Arc::new(additive(&[0.5]))).unwrap();
        assert_eq!(vp.value(Subset::EMPTY), -1.0);
        assert_eq!(vp.value(Subset::full(1)), 1.0);
        let r = verify_marginal_bound(&vp, Verification::Exhaustive).unwrap();
        assert_eq!(r.max_observed_marginal, 2.0);
        assert!(!r.violated);
    }

    #[test]
    fn vprime_capacity() {
        let v = Arc::new(additive(&[0.1; 23]));
        assert!(matches!(vprime_transform(v), Err(Error::Capacity(_))));
    }
}
