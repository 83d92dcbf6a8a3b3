//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nadisc::{Subset, Valuation};

/// Every subset of `mask`, including the empty set and `mask` itself.
pub fn submasks(mask: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = mask;
    loop {
        out.push(s);
        if s == 0 {
            break;
        }
        s = (s - 1) & mask;
    }
    out
}

pub fn v(val: &Valuation, bits: u64) -> f64 {
    val.value(Subset::from_bits(bits))
}

/// Transfer imbalance straight from its definition: try every pair of moved
/// sets and keep the smallest total that flips the comparison.
pub fn transfer_naive(val: &Valuation, a: u64, b: u64) -> usize {
    assert_eq!(a & b, 0);
    if v(val, a) < v(val, b) {
        return transfer_naive(val, b, a);
    }
    let mut best = usize::MAX;
    for s in submasks(a) {
        for t in submasks(b) {
            let left = (a & !s) | t;
            let right = (b & !t) | s;
            if v(val, left) <= v(val, right) {
                best = best.min((s.count_ones() + t.count_ones()) as usize);
            }
        }
    }
    best
}

/// Signed transfer imbalance of `s` against its complement in `0..m`.
pub fn vprime_naive(val: &Valuation, s: u64, m: usize) -> i64 {
    let c = full(m) & !s;
    if v(val, s) >= v(val, c) {
        transfer_naive(val, s, c) as i64
    } else {
        -(transfer_naive(val, c, s) as i64)
    }
}

pub fn full(m: usize) -> u64 {
    if m == 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

pub fn bundles_of(colors: &[usize], k: usize) -> Vec<u64> {
    let mut b = vec![0u64; k];
    for (j, &c) in colors.iter().enumerate() {
        b[c] |= 1 << j;
    }
    b
}

pub fn disc_naive(vals: &[Valuation], colors: &[usize], k: usize) -> f64 {
    let b = bundles_of(colors, k);
    let mut worst = 0.0f64;
    for val in vals {
        for l in 0..k {
            for l2 in 0..k {
                worst = worst.max((v(val, b[l]) - v(val, b[l2])).abs());
            }
        }
    }
    worst
}

/// Minimum discrepancy over all `k^m` colorings.
pub fn disc_opt_naive(vals: &[Valuation], m: usize, k: usize) -> f64 {
    let total = (k as u64).pow(m as u32);
    let mut colors = vec![0usize; m];
    let mut best = f64::INFINITY;
    for mut code in 0..total {
        for c in colors.iter_mut() {
            *c = (code % k as u64) as usize;
            code /= k as u64;
        }
        best = best.min(disc_naive(vals, &colors, k));
    }
    best
}

/// Multilinear extension by summing over all `2^m` subsets.
pub fn multilinear_naive(val: &Valuation, x: &[f64]) -> f64 {
    let m = x.len();
    (0..1u64 << m)
        .map(|s| {
            let p: f64 = (0..m).map(|j| if s >> j & 1 == 1 { x[j] } else { 1.0 - x[j] }).product();
            p * v(val, s)
        })
        .sum()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// `c[i][b] = v_i(bundle_b)`.
pub fn value_matrix(vals: &[Valuation], bundles: &[u64]) -> Vec<Vec<f64>> {
    vals.iter().map(|val| bundles.iter().map(|&b| v(val, b)).collect()).collect()
}

/// Best welfare over all reassignments and the lexicographically first
/// permutation reaching it within `tol`.
pub fn best_permutation(c: &[Vec<f64>], tol: f64) -> (Vec<usize>, f64) {
    let n = c.len();
    let perms = permutations(n);
    let welfare = |p: &Vec<usize>| (0..n).map(|i| c[i][p[i]]).sum::<f64>();
    let best = perms.iter().map(welfare).fold(f64::NEG_INFINITY, f64::max);
    let first = perms.into_iter().find(|p| welfare(p) >= best - tol).unwrap();
    (first, best)
}

/// Fourier-Motzkin elimination: is `{x : a x <= b for every row}` non-empty,
/// allowing each final constant inequality to miss by `tol`?
pub fn fm_feasible(mut rows: Vec<(Vec<f64>, f64)>, vars: usize, tol: f64) -> bool {
    for var in 0..vars {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for (a, b) in rows {
            if a[var] > 1e-12 {
                pos.push((a, b));
            } else if a[var] < -1e-12 {
                neg.push((a, b));
            } else {
                rest.push((a, b));
            }
        }
        for (pa, pb) in &pos {
            for (na, nb) in &neg {
                let (sp, sn) = (pa[var], -na[var]);
                let mut a: Vec<f64> = pa.iter().zip(na).map(|(x, y)| x / sp + y / sn).collect();
                a[var] = 0.0;
                rest.push((a, pb / sp + nb / sn));
            }
        }
        rows = rest;
    }
    rows.iter().all(|(_, b)| *b >= -tol)
}

/// Whether some non-negative payments make the allocation envy-free,
/// decided by eliminating the payment variables.
pub fn envy_freeable_fm(c: &[Vec<f64>], tol: f64) -> bool {
    let n = c.len();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // v_i(A_i) + p_i >= v_i(A_j) + p_j
                let mut a = vec![0.0; n];
                a[j] += 1.0;
                a[i] -= 1.0;
                rows.push((a, c[i][i] - c[i][j]));
            }
        }
        let mut a = vec![0.0; n];
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    fm_feasible(rows, n, tol)
}

/// Random coloring of `m` items with colors `0..k`.
pub fn random_colors(rng: &mut impl rand::Rng, m: usize, k: usize) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..k)).collect()
}
