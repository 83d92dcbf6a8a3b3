//! Envy-free allocations with subsidies.
//!
//! Bundles from an `n`-coloring are reassigned to maximize welfare. The
//! resulting envy graph has no positive-weight cycle, and paying each agent
//! the heaviest path weight leaving it removes all envy. Each payment is at
//! most the discrepancy of the coloring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::disc_of_coloring;
use crate::rounding::Coloring;
use crate::subset::Subset;
use crate::valuations::{common_item_count, Valuation};

/// Slack for every floating-point inequality in this module.
pub const SLACK: f64 = 1e-9;

/// Largest agent count for the assignment solver.
pub const MAX_AGENTS: usize = 64;

/// `A_i` is `bundles[i]`; the bundles partition `0..m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    m: usize,
    bundles: Vec<Subset>,
}

impl Allocation {
    pub fn new(bundles: Vec<Subset>, m: usize) -> Result<Self> {
        if bundles.is_empty() {
            return Err(Error::input("an allocation needs at least one bundle"));
        }
        let mut seen = Subset::EMPTY;
        for (i, &b) in bundles.iter().enumerate() {
            if !b.fits(m) {
                return Err(Error::input(format!("bundle {i} references items outside 0..{m}")));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::input(format!("bundle {i} overlaps an earlier bundle")));
            }
            seen = seen.union(b);
        }
        if seen != Subset::full(m) {
            return Err(Error::input(format!("bundles miss items {:?}", Subset::full(m).difference(seen))));
        }
        Ok(Allocation { m, bundles })
    }

    pub fn from_coloring(c: &Coloring) -> Self {
        Allocation { m: c.len(), bundles: c.bundles() }
    }

    pub fn bundles(&self) -> &[Subset] {
        &self.bundles
    }

    pub fn num_agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn num_items(&self) -> usize {
        self.m
    }

    /// Agent `i` receives `self.bundles[sigma[i]]`.
    pub fn permuted(&self, sigma: &[usize]) -> Allocation {
        Allocation { m: self.m, bundles: sigma.iter().map(|&b| self.bundles[b]).collect() }
    }

    pub fn welfare(&self, vals: &[Valuation]) -> f64 {
        vals.iter().zip(&self.bundles).map(|(v, &b)| v.value(b)).sum()
    }
}

/// Complete digraph on agents, `w[i][j] = v_i(A_j) - v_i(A_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvyGraph {
    n: usize,
    w: Vec<f64>,
}

impl EnvyGraph {
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::input("envy graph needs a non-empty square matrix"));
        }
        if (0..n).any(|i| rows[i][i] != 0.0) {
            return Err(Error::input("envy graph diagonal must be zero"));
        }
        if rows.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::input("envy weights must be finite"));
        }
        Ok(EnvyGraph { n, w: rows.into_iter().flatten().collect() })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveCycle {
    /// Agents along the cycle; the last returns to the first.
    pub agents: Vec<usize>,
    pub weight: f64,
}

/// Non-negative payments; `(A, p)` is envy-free and some payment is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentVector {
    pub p: Vec<f64>,
}

impl PaymentVector {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    /// Checks `v_i(A_i) + p_i >= v_i(A_j) + p_j` for all `i, j`.
    pub fn is_envy_free(&self, g: &EnvyGraph) -> bool {
        let n = g.num_agents();
        (0..n).all(|i| (0..n).all(|j| self.p[i] + SLACK >= g.weight(i, j) + self.p[j]))
    }
}

// ---------------------------------------------------------------------------
// Assignment

/// Maximum-weight perfect matching on a square matrix (Hungarian method with
/// potentials, O(n^3)). Returns `sigma` with row `i` matched to column `sigma[i]`.
pub fn max_weight_assignment(c: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = c.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // Minimize -c. Arrays are 1-based; index 0 is the virtual column.
    let cost = |i: usize, j: usize| -c[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[p[j] - 1] = j - 1;
    }
    let total = sigma.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
    (sigma, total)
}

/// Among maximum-weight assignments, the lexicographically smallest `sigma`.
fn lex_smallest_optimal(c: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = c.len();
    let (_, best) = max_weight_assignment(c);
    let tol = SLACK * (1.0 + best.abs());
    let mut sigma = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut fixed = 0.0;
    for i in 0..n {
        let rest_rows: Vec<usize> = (i + 1..n).collect();
        let choice = (0..n)
            .filter(|&b| !used[b])
            .find(|&b| {
                let cols: Vec<usize> = (0..n).filter(|&j| !used[j] && j != b).collect();
                let sub: Vec<Vec<f64>> = rest_rows.iter().map(|&r| cols.iter().map(|&j| c[r][j]).collect()).collect();
                fixed + c[i][b] + max_weight_assignment(&sub).1 >= best - tol
            })
            .expect("some column extends an optimal assignment");
        used[choice] = true;
        fixed += c[i][choice];
        sigma.push(choice);
    }
    (sigma, fixed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reassignment {
    pub allocation: Allocation,
    /// Agent `i` receives input bundle `sigma[i]`.
    pub sigma: Vec<usize>,
    pub welfare: f64,
}

/// Reassigns `bundles` to maximize `sum_i v_i(A_sigma(i))`; ties go to the
/// lexicographically smallest `sigma`.
pub fn best_reassignment(vals: &[Valuation], bundles: &[Subset]) -> Result<Reassignment> {
    let m = common_item_count(vals)?;
    let n = vals.len();
    if bundles.len() != n {
        return Err(Error::input(format!("{} bundles for {n} agents", bundles.len())));
    }
    if n > MAX_AGENTS {
        return Err(Error::capacity(format!("{n} agents exceeds the assignment cap of {MAX_AGENTS}")));
    }
    let base = Allocation::new(bundles.to_vec(), m)?;
    let c: Vec<Vec<f64>> = vals.iter().map(|v| bundles.iter().map(|&b| v.value(b)).collect()).collect();
    let (sigma, welfare) = lex_smallest_optimal(&c);
    Ok(Reassignment { allocation: base.permuted(&sigma), sigma, welfare })
}

pub fn build_envy_graph(vals: &[Valuation], alloc: &Allocation) -> Result<EnvyGraph> {
    let m = common_item_count(vals)?;
    let n = vals.len();
    if alloc.num_agents() != n || alloc.num_items() != m {
        return Err(Error::input(format!(
            "allocation has {} bundles over {} items; profile has {n} agents over {m}",
            alloc.num_agents(),
            alloc.num_items()
        )));
    }
    let vals_of: Vec<Vec<f64>> = vals.iter().map(|v| alloc.bundles.iter().map(|&b| v.value(b)).collect()).collect();
    let w = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| vals_of[i][j] - vals_of[i][i]).collect();
    Ok(EnvyGraph { n, w })
}

/// Finds a cycle of weight above [`SLACK`] by Bellman-Ford on negated weights.
pub fn has_positive_cycle(g: &EnvyGraph) -> Option<PositiveCycle> {
    let n = g.n;
    // Longest-path distances from a virtual source joined to every vertex.
    let mut dist = vec![0.0f64; n];
    let mut pred = vec![usize::MAX; n];
    let mut last = None;
    for _ in 0..n {
        last = None;
        for i in 0..n {
            for j in 0..n {
                if i != j && dist[i] + g.weight(i, j) > dist[j] + SLACK {
                    dist[j] = dist[i] + g.weight(i, j);
                    pred[j] = i;
                    last = Some(j);
                }
            }
        }
        last?;
    }
    // Still relaxing after n passes: walk back n steps to land on the cycle.
    let mut x = last?;
    for _ in 0..n {
        x = pred[x];
    }
    let mut agents = vec![x];
    let mut y = pred[x];
    while y != x {
        agents.push(y);
        y = pred[y];
    }
    agents.reverse();
    let weight = (0..agents.len()).map(|t| g.weight(agents[t], agents[(t + 1) % agents.len()])).sum();
    Some(PositiveCycle { agents, weight })
}

/// `p_i` = heaviest path weight starting at `i` (the empty path counts as 0).
pub fn compute_payments(g: &EnvyGraph) -> Result<PaymentVector> {
    if let Some(c) = has_positive_cycle(g) {
        return Err(Error::invariant(format!("envy graph has a positive cycle {:?} of weight {}", c.agents, c.weight)));
    }
    let n = g.n;
    let mut p = vec![0.0f64; n];
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                let cand = g.weight(i, j) + p[j];
                if i != j && cand > p[i] {
                    p[i] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(PaymentVector { p })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsidyReport {
    pub allocation: Allocation,
    pub sigma: Vec<usize>,
    pub envy: EnvyGraph,
    pub payments: PaymentVector,
    /// Discrepancy `D` of the input coloring.
    pub discrepancy: f64,
    pub total_subsidy: f64,
    pub max_payment: f64,
}

impl SubsidyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bundles of an `n`-coloring, welfare-maximally reassigned, with minimal
/// envy-eliminating payments. Fails if any payment exceeds `D` or the total
/// exceeds `(n - 1) D`, where `D` is the discrepancy of the coloring.
pub fn envy_free_with_subsidy(vals: &[Valuation], coloring: &Coloring) -> Result<SubsidyReport> {
    let n = vals.len();
    if coloring.k() != n {
        return Err(Error::input(format!("coloring has {} colors for {n} agents", coloring.k())));
    }
    let d = disc_of_coloring(vals, coloring)?.value;
    let re = best_reassignment(vals, &coloring.bundles())?;
    let envy = build_envy_graph(vals, &re.allocation)?;
    if let Some(c) = has_positive_cycle(&envy) {
        return Err(Error::invariant(format!(
            "welfare-maximal allocation has a positive envy cycle {:?} (weight {})",
            c.agents, c.weight
        )));
    }
    let payments = compute_payments(&envy)?;
    let total = payments.total();
    let max = payments.max();
    if max > d + SLACK {
        return Err(Error::invariant(format!("payment {max} exceeds the discrepancy {d}")));
    }
    if total > (n as f64 - 1.0) * d + SLACK {
        return Err(Error::invariant(format!("total subsidy {total} exceeds (n - 1) * {d}")));
    }
    Ok(SubsidyReport {
        allocation: re.allocation,
        sigma: re.sigma,
        envy,
        payments,
        discrepancy: d,
        total_subsidy: total,
        max_payment: max,
    })
}
