//! Fractional equal-splitting.
//!
//! Items are laid out as consecutive intervals of length `1/m` on the
//! necklace `[0, 1]`. A [`CutVector`] with at most `n(k-1)` cuts and one
//! label per piece induces a [`FractionalColoring`]: item `j`'s weight on
//! color `l` is the fraction of its interval covered by pieces labeled `l`.
//! [`split_necklace`] searches for cuts making every color equal under all
//! agents' multilinear extensions. Equal splits exist for prime-power `k`,
//! but the search is heuristic, so convergence is reported, not assumed.
//!
//! Each restart descends with trust-region linear programs over a
//! finite-difference Jacobian, falling back to per-cut line search and
//! relabeling when those stall. It then perturbs the incumbent and keeps a
//! perturbed descent only if it ends strictly lower.
//!
//! [`split_additive_exact`] is the linear-algebra route for additive
//! valuations: start from the uniform coloring and pivot inside the null
//! space of the equality constraints until few items remain fractional.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multilinear::{extension_value, has_closed_form, snap, FractionalVector, EXACT_SUPPORT_CAP};
use crate::rng;
use crate::rounding::Coloring;
use crate::valuations::{common_item_count, AdditiveValuation, Valuation};

/// Row-sum tolerance for fractional colorings.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Residual tolerance for [`split_additive_exact`].
pub const ADDITIVE_TOL: f64 = 1e-9;

/// Maximum number of cuts: `n(k-1)`.
pub fn max_cuts(n: usize, k: usize) -> usize {
    n * (k - 1)
}

/// Per-color cap on maximal intervals: `floor(n(k-1)/k) + 1`.
pub fn interval_cap(n: usize, k: usize) -> usize {
    n * (k - 1) / k + 1
}

// ---------------------------------------------------------------------------
// Layout, cuts and fractional colorings

/// Item order along the necklace: position `p` holds item `order[p]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NecklaceLayout {
    order: Vec<usize>,
}

impl NecklaceLayout {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        if m == 0 {
            return Err(Error::input("layout must contain at least one item"));
        }
        let mut seen = vec![false; m];
        for &j in &order {
            if j >= m || std::mem::replace(&mut seen[j], true) {
                return Err(Error::input(format!("layout order is not a permutation of 0..{m}")));
            }
        }
        Ok(NecklaceLayout { order })
    }

    pub fn identity(m: usize) -> Self {
        NecklaceLayout { order: (0..m).collect() }
    }

    /// A uniformly random order drawn from `seed`.
    pub fn shuffled(m: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng::stream(seed, 0));
        NecklaceLayout { order }
    }

    pub fn num_items(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Sorted cut positions in `[0, 1]` plus a color label for each of the
/// `cuts + 1` pieces. Coincident cuts (length-zero pieces) are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutVector {
    cuts: Vec<f64>,
    labels: Vec<usize>,
}

impl CutVector {
    pub fn new(cuts: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != cuts.len() + 1 {
            return Err(Error::input(format!(
                "{} cuts need {} labels, got {}",
                cuts.len(),
                cuts.len() + 1,
                labels.len()
            )));
        }
        if cuts.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::input("cut positions must lie in [0, 1]"));
        }
        if cuts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("cut positions must be sorted ascending"));
        }
        Ok(CutVector { cuts, labels })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Maximal runs of equal labels, per color. Length-zero pieces count, so
    /// this never undercounts the geometric intervals.
    pub fn run_counts(&self, k: usize) -> Vec<usize> {
        run_counts(&self.labels, k)
    }
}

fn run_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    let mut prev = None;
    for &l in labels {
        if prev != Some(l) {
            counts[l] += 1;
        }
        prev = Some(l);
    }
    counts
}

fn runs_within_cap(labels: &[usize], k: usize, cap: usize) -> bool {
    run_counts(labels, k).into_iter().all(|c| c <= cap)
}

/// An `m x k` row-stochastic matrix: row `j` is item `j`'s distribution over colors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalColoring {
    m: usize,
    k: usize,
    /// Row-major `m * k`.
    chi: Vec<f64>,
}

impl FractionalColoring {
    pub fn new(m: usize, k: usize, mut chi: Vec<f64>) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::input("fractional coloring needs m >= 1 and k >= 1"));
        }
        if chi.len() != m * k {
            return Err(Error::input(format!("expected {} entries, got {}", m * k, chi.len())));
        }
        for (j, row) in chi.chunks_mut(k).enumerate() {
            for p in row.iter_mut() {
                if !p.is_finite() || *p < -ROW_SUM_TOL || *p > 1.0 + ROW_SUM_TOL {
                    return Err(Error::input(format!("row {j} has entry {p} outside [0, 1]")));
                }
                *p = snap(p.clamp(0.0, 1.0));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::input(format!("row {j} sums to {sum}")));
            }
        }
        Ok(FractionalColoring { m, k, chi })
    }

    pub fn from_coloring(c: &Coloring) -> Self {
        let (m, k) = (c.len(), c.k());
        let mut chi = vec![0.0; m * k];
        for (j, &l) in c.colors().iter().enumerate() {
            chi[j * k + l] = 1.0;
        }
        FractionalColoring { m, k, chi }
    }

    pub fn num_items(&self) -> usize {
        self.m
    }

    pub fn num_colors(&self) -> usize {
        self.k
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.chi[j * self.k + l]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.chi[j * self.k..(j + 1) * self.k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.chi
    }

    /// `chi_l`, the inclusion vector of color `l`.
    pub fn column(&self, l: usize) -> FractionalVector {
        FractionalVector::new((0..self.m).map(|j| self.get(j, l)).collect())
            .expect("entries are validated on construction")
    }

    pub fn fractional_count(&self, l: usize) -> usize {
        (0..self.m).filter(|&j| is_fractional(self.get(j, l))).count()
    }

    pub fn max_fractional_per_color(&self) -> usize {
        (0..self.k).map(|l| self.fractional_count(l)).max().unwrap_or(0)
    }

    /// Items with a fractional entry in any color.
    pub fn fractional_items(&self) -> usize {
        (0..self.m).filter(|&j| self.row(j).iter().any(|&p| is_fractional(p))).count()
    }

    /// The coloring it encodes, if every row is a unit vector.
    pub fn to_coloring(&self) -> Option<Coloring> {
        let colors = (0..self.m).map(|j| self.row(j).iter().position(|&p| p == 1.0)).collect::<Option<Vec<_>>>()?;
        Coloring::new(colors, self.k).ok()
    }
}

fn is_fractional(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

/// Converts cuts on a layout into the fractional coloring they induce.
pub fn cuts_to_coloring(layout: &NecklaceLayout, cv: &CutVector, k: usize) -> Result<FractionalColoring> {
    if let Some(&l) = cv.labels.iter().find(|&&l| l >= k) {
        return Err(Error::input(format!("label {l} out of range for k = {k}")));
    }
    let m = layout.num_items();
    let mut chi = vec![0.0; m * k];
    fill_coloring(&layout.order, &cv.cuts, &cv.labels, k, &mut chi);
    Ok(FractionalColoring { m, k, chi })
}

fn fill_coloring(order: &[usize], cuts: &[f64], labels: &[usize], k: usize, chi: &mut [f64]) {
    let m = order.len();
    let mf = m as f64;
    chi.fill(0.0);
    let mut start = 0.0f64;
    for (p, &l) in labels.iter().enumerate() {
        let end = cuts.get(p).copied().unwrap_or(1.0).max(start);
        if end > start {
            let mut pos = ((start * mf).floor() as usize).min(m - 1);
            while pos < m {
                let lo = pos as f64 / mf;
                if lo >= end {
                    break;
                }
                let hi = (pos + 1) as f64 / mf;
                let overlap = end.min(hi) - start.max(lo);
                if overlap > 0.0 {
                    chi[order[pos] * k + l] += overlap * mf;
                }
                pos += 1;
            }
        }
        start = end;
    }
    for p in chi.iter_mut() {
        *p = snap(p.min(1.0));
    }
}

// ---------------------------------------------------------------------------
// Necklace search

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Independent restarts; restart 0 starts from evenly spaced cuts.
    pub restarts: usize,
    /// Imbalance at or below which a split counts as converged.
    pub tol: f64,
    /// Accepted-move budget per restart.
    pub max_iters: usize,
    pub seed: u64,
    /// Restarts run concurrently in batches of this size; the search stops
    /// after the first batch that contains a converged restart.
    pub batch: usize,
    /// Grid points per cut before golden-section refinement.
    pub grid: usize,
    pub golden_iters: usize,
    /// Basin-hopping perturbations per restart after the first descent stalls.
    pub kicks: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 32,
            tol: 1e-6,
            max_iters: 200,
            seed: 0,
            batch: 8,
            grid: 16,
            golden_iters: 40,
            kicks: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMethod {
    Necklace,
    AdditiveExact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub method: SplitMethod,
    pub coloring: FractionalColoring,
    /// `values[i][l] = F_i(chi_l)`.
    pub values: Vec<Vec<f64>>,
    /// `max_i (max_l F_i(chi_l) - min_l F_i(chi_l))`.
    pub imbalance: f64,
    pub max_fractional_per_color: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Necklace path only.
    pub cuts: Option<CutVector>,
    pub layout: Option<NecklaceLayout>,
    /// Restart that produced the result and how many ran.
    pub restart: usize,
    pub restarts_run: usize,
    /// Incumbent imbalance after each accepted move of the winning restart.
    pub trace: Vec<f64>,
}

impl SplitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Problem<'a> {
    vals: &'a [Valuation],
    order: &'a [usize],
    k: usize,
    cuts: usize,
    cap: usize,
}

#[derive(Clone)]
struct Eval {
    imbalance: f64,
    /// `n * k`, row-major by agent.
    values: Vec<f64>,
}

struct Restart {
    index: usize,
    cuts: Vec<f64>,
    labels: Vec<usize>,
    eval: Eval,
    iterations: usize,
    trace: Vec<f64>,
}

/// Finite-difference half-step for cut positions.
const FD_STEP: f64 = 1e-7;
const GOLDEN: f64 = 0.618_033_988_749_894_8;
const KICK_STREAM: u64 = 0x6b69_636b;
/// Move budget for the descent after a kick.
const KICK_MOVES: usize = 30;
/// A kicked descent still above `KICK_SLACK` times the incumbent after
/// `KICK_PATIENCE` moves is abandoned.
const KICK_PATIENCE: usize = 6;
const KICK_SLACK: f64 = 4.0;

/// Attempts per trust-region move before giving up.
const TRUST_SHRINKS: usize = 12;
/// Trust radius below which the SLP move reports a stall.
const MIN_RADIUS: f64 = 1e-13;
impl Problem<'_> {
    fn m(&self) -> usize {
        self.order.len()
    }

    fn evaluate(&self, cuts: &[f64], labels: &[usize]) -> Result<Eval> {
        let k = self.k;
        let values = self.values(cuts, labels, &(0..k).collect::<Vec<_>>(), None)?;
        let imbalance = values
            .chunks(k)
            .map(|row| {
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max);
        Ok(Eval { imbalance, values })
    }

    /// `F_i(chi_l)` for every agent, recomputing only `colors`; the other
    /// entries are copied from `known`.
    fn values(&self, cuts: &[f64], labels: &[usize], colors: &[usize], known: Option<&[f64]>) -> Result<Vec<f64>> {
        let (m, k) = (self.m(), self.k);
        let mut chi = vec![0.0; m * k];
        fill_coloring(self.order, cuts, labels, k, &mut chi);
        let mut values = match known {
            Some(v) => v.to_vec(),
            None => vec![0.0; self.vals.len() * k],
        };
        for &l in colors {
            let col = FractionalVector::new((0..m).map(|j| chi[j * k + l]).collect())?;
            for (i, v) in self.vals.iter().enumerate() {
                values[i * k + l] = extension_value(v, &col)?;
            }
        }
        Ok(values)
    }

    fn neighbors(cuts: &[f64], p: usize) -> (f64, f64) {
        let lo = if p == 0 { 0.0 } else { cuts[p - 1] };
        let hi = cuts.get(p + 1).copied().unwrap_or(1.0);
        (lo, hi)
    }

    fn initial(&self, index: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let (q, k) = (self.cuts, self.k);
        if index == 0 {
            let cuts = (1..=q).map(|p| p as f64 / (q + 1) as f64).collect();
            let labels = (0..=q).map(|p| p % k).collect();
            return (cuts, labels);
        }
        let mut rng = rng::stream(seed, index as u64);
        let mut cuts: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        cuts.sort_by(f64::total_cmp);
        for _ in 0..64 {
            let mut labels = Vec::with_capacity(q + 1);
            labels.push(rng.random_range(0..k));
            for p in 1..=q {
                let prev: usize = labels[p - 1];
                let step = rng.random_range(1..k);
                labels.push((prev + step) % k);
            }
            if runs_within_cap(&labels, k, self.cap) {
                return (cuts, labels);
            }
        }
        // Cyclic labelings always respect the cap.
        let mut colors: Vec<usize> = (0..k).collect();
        colors.shuffle(&mut rng);
        let labels = (0..=q).map(|p| colors[p % k]).collect();
        (cuts, labels)
    }

    fn run(&self, index: usize, cfg: &SearchConfig) -> Result<Restart> {
        let (mut cuts, mut labels) = self.initial(index, cfg.seed);
        let mut eval = self.evaluate(&cuts, &labels)?;
        let mut trace = vec![eval.imbalance];
        let mut iterations = self.descend(&mut cuts, &mut labels, &mut eval, cfg, &mut trace, None)?;
        // Basin hopping: perturb, descend, keep only strict improvements.
        let mut rng = rng::stream(rng::derive_seed(cfg.seed, KICK_STREAM), index as u64);
        let mut kicks = 0;
        while eval.imbalance > cfg.tol && kicks < cfg.kicks {
            kicks += 1;
            let (mut c2, mut l2) = self.perturb(&cuts, &labels, &mut rng);
            let mut e2 = self.evaluate(&c2, &l2)?;
            let mut scratch = Vec::new();
            self.descend(&mut c2, &mut l2, &mut e2, cfg, &mut scratch, Some(eval.imbalance))?;
            if e2.imbalance < eval.imbalance {
                cuts = c2;
                labels = l2;
                eval = e2;
                trace.push(eval.imbalance);
                iterations += 1;
            }
        }
        Ok(Restart { index, cuts, labels, eval, iterations, trace })
    }

    /// Local descent until no move improves; returns the number of accepted
    /// moves. With an `incumbent`, only trust-region steps are tried, for at
    /// most [`KICK_MOVES`] moves, and the descent is abandoned early when it
    /// stays far above the incumbent.
    fn descend(
        &self,
        cuts: &mut Vec<f64>,
        labels: &mut Vec<usize>,
        eval: &mut Eval,
        cfg: &SearchConfig,
        trace: &mut Vec<f64>,
        incumbent: Option<f64>,
    ) -> Result<usize> {
        let mut radius = 1.0 / self.m().max(1) as f64;
        let budget = if incumbent.is_some() { KICK_MOVES.min(cfg.max_iters) } else { cfg.max_iters };
        let mut moves = 0;
        while eval.imbalance > cfg.tol && moves < budget {
            if incumbent.is_some_and(|b| moves >= KICK_PATIENCE && eval.imbalance > KICK_SLACK * b) {
                break;
            }
            moves += 1;
            if self.slp_move(cuts, labels, eval, &mut radius)? {
                trace.push(eval.imbalance);
            } else if incumbent.is_some() {
                moves -= 1;
                break;
            } else if self.coordinate_move(cuts, labels, eval, cfg, trace)? {
                // Each accepted cut is already on the trace.
            } else if self.relabel_move(cuts, labels, eval)? {
                trace.push(eval.imbalance);
            } else {
                moves -= 1;
                break;
            }
        }
        Ok(moves)
    }

    /// A random nearby configuration: one cut resampled between its
    /// neighbors, one piece relabeled within the cap, or every cut jittered by
    /// up to half an item.
    fn perturb(&self, cuts: &[f64], labels: &[usize], rng: &mut impl Rng) -> (Vec<f64>, Vec<usize>) {
        let mut c = cuts.to_vec();
        let mut l = labels.to_vec();
        let q = c.len();
        match rng.random_range(0..4) {
            0 | 1 if q > 0 => {
                let p = rng.random_range(0..q);
                let (lo, hi) = Self::neighbors(cuts, p);
                c[p] = lo + (hi - lo) * rng.random::<f64>();
            }
            2 => {
                for _ in 0..8 {
                    let p = rng.random_range(0..l.len());
                    let old = l[p];
                    l[p] = (old + rng.random_range(1..self.k)) % self.k;
                    if runs_within_cap(&l, self.k, self.cap) {
                        break;
                    }
                    l[p] = old;
                }
            }
            _ => {
                let half = 0.5 / self.m() as f64;
                for x in &mut c {
                    *x = (*x + half * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0);
                }
                c.sort_by(f64::total_cmp);
            }
        }
        (c, l)
    }

    /// Trust-region linear-programming step on all cuts at once.
    ///
    /// Values are linearized with a central-difference Jacobian; the LP
    /// minimizes the linearized imbalance over steps that keep the cuts ordered
    /// and move each by at most `radius`. The radius grows or shrinks with the
    /// ratio of actual to predicted decrease.
    fn slp_move(&self, cuts: &mut Vec<f64>, labels: &[usize], cur: &mut Eval, radius: &mut f64) -> Result<bool> {
        let q = cuts.len();
        let rows = cur.values.len();
        let mut jac = vec![0.0; rows * q];
        let mut probe = cuts.clone();
        for p in 0..q {
            let (lo, hi) = Self::neighbors(cuts, p);
            let a = (cuts[p] - FD_STEP).max(lo);
            let b = (cuts[p] + FD_STEP).min(hi);
            if b - a < 1e-12 {
                continue;
            }
            // Moving cut p only trades weight between its two adjacent pieces.
            let touched = [labels[p], labels[p + 1]];
            probe[p] = a;
            let fa = self.values(&probe, labels, &touched, Some(&cur.values))?;
            probe[p] = b;
            let fb = self.values(&probe, labels, &touched, Some(&cur.values))?;
            probe[p] = cuts[p];
            for row in 0..rows {
                jac[row * q + p] = (fb[row] - fa[row]) / (b - a);
            }
        }
        for _ in 0..TRUST_SHRINKS {
            if *radius < MIN_RADIUS {
                *radius = MIN_RADIUS;
                return Ok(false);
            }
            let Some((step, predicted)) = self.linear_step(cuts, cur, &jac, *radius) else {
                return Ok(false);
            };
            let gain = cur.imbalance - predicted;
            if gain <= 1e-15 * (1.0 + cur.imbalance) {
                return Ok(false);
            }
            let cand: Vec<f64> = cuts.iter().zip(&step).map(|(c, s)| (c + s).clamp(0.0, 1.0)).collect();
            let mut cand = cand;
            cand.sort_by(f64::total_cmp);
            let e = self.evaluate(&cand, labels)?;
            let actual = cur.imbalance - e.imbalance;
            let rho = actual / gain;
            let longest = step.iter().fold(0.0f64, |a, s| a.max(s.abs()));
            if rho > 0.75 && longest > 0.5 * *radius {
                *radius = (*radius * 2.0).min(0.5);
            } else if rho < 0.25 {
                *radius = longest.min(*radius) * 0.25;
            }
            if actual > 0.0 {
                *cuts = cand;
                *cur = e;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Solves the linearized minimax problem; returns the step and the
    /// predicted imbalance.
    fn linear_step(&self, cuts: &[f64], cur: &Eval, jac: &[f64], radius: f64) -> Option<(Vec<f64>, f64)> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
        let (q, k) = (cuts.len(), self.k);
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let d: Vec<_> = (0..q).map(|p| lp.add_var(0.0, ((-radius).max(-cuts[p]), radius.min(1.0 - cuts[p])))).collect();
        let s = lp.add_var(1.0, (0.0, f64::INFINITY));
        for row in 0..q.saturating_sub(1) {
            lp.add_constraint([(d[row], 1.0), (d[row + 1], -1.0)], ComparisonOp::Le, cuts[row + 1] - cuts[row]);
        }
        // Pair (a, b) bounds the optimum below by its smallest reachable gap;
        // pairs whose largest reachable gap stays under that bound never bind.
        let pairs: Vec<(usize, usize, f64)> = (0..self.vals.len())
            .flat_map(|agent| {
                (0..k)
                    .flat_map(move |l| (0..k).filter(move |&l2| l2 != l).map(move |l2| (agent * k + l, agent * k + l2)))
            })
            .map(|(a, b)| {
                let reach: f64 = (0..q).map(|p| (jac[a * q + p] - jac[b * q + p]).abs()).sum::<f64>() * radius;
                (a, b, reach)
            })
            .collect();
        let floor = pairs.iter().map(|&(a, b, reach)| cur.values[a] - cur.values[b] - reach).fold(0.0f64, f64::max);
        for &(a, b, reach) in &pairs {
            if cur.values[a] - cur.values[b] + reach <= floor {
                continue;
            }
            // F_a + J_a d - F_b - J_b d <= s
            let mut terms: Vec<_> =
                (0..q).map(|p| (d[p], jac[a * q + p] - jac[b * q + p])).filter(|t| t.1 != 0.0).collect();
            terms.push((s, -1.0));
            lp.add_constraint(&terms, ComparisonOp::Le, cur.values[b] - cur.values[a]);
        }
        match lp.solve() {
            Ok(SolveOutcome::Solution(sol)) => Some((d.iter().map(|&v| sol[v]).collect(), sol[s])),
            _ => None,
        }
    }

    /// Grid scan plus golden-section refinement of each cut between its neighbors.
    fn coordinate_move(
        &self,
        cuts: &mut [f64],
        labels: &[usize],
        cur: &mut Eval,
        cfg: &SearchConfig,
        trace: &mut Vec<f64>,
    ) -> Result<bool> {
        let mut improved = false;
        let mut probe = cuts.to_vec();
        for p in 0..cuts.len() {
            let (lo, hi) = Self::neighbors(cuts, p);
            if hi - lo <= 0.0 {
                continue;
            }
            let mut best: Option<(f64, Eval)> = None;
            let mut at = |x: f64, best: &mut Option<(f64, Eval)>| -> Result<f64> {
                probe[p] = x;
                let e = self.evaluate(&probe, labels)?;
                let f = e.imbalance;
                if best.as_ref().is_none_or(|b| f < b.1.imbalance) {
                    *best = Some((x, e));
                }
                Ok(f)
            };
            let g = cfg.grid.max(2);
            let width = (hi - lo) / g as f64;
            for s in 0..=g {
                at(lo + width * s as f64, &mut best)?;
            }
            let centre = best.as_ref().map_or(cuts[p], |b| b.0);
            let (mut a, mut b) = ((centre - width).max(lo), (centre + width).min(hi));
            let mut x1 = b - GOLDEN * (b - a);
            let mut x2 = a + GOLDEN * (b - a);
            let mut f1 = at(x1, &mut best)?;
            let mut f2 = at(x2, &mut best)?;
            for _ in 0..cfg.golden_iters {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - GOLDEN * (b - a);
                    f1 = at(x1, &mut best)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + GOLDEN * (b - a);
                    f2 = at(x2, &mut best)?;
                }
            }
            probe[p] = cuts[p];
            if let Some((x, e)) = best {
                if e.imbalance < cur.imbalance {
                    cuts[p] = x;
                    probe[p] = x;
                    *cur = e;
                    trace.push(cur.imbalance);
                    improved = true;
                }
            }
        }
        Ok(improved)
    }

    /// Best single-piece relabeling that keeps every color within the interval cap.
    fn relabel_move(&self, cuts: &[f64], labels: &mut Vec<usize>, cur: &mut Eval) -> Result<bool> {
        let mut best: Option<(Vec<usize>, Eval)> = None;
        let mut cand = labels.clone();
        for p in 0..labels.len() {
            for l in (0..self.k).filter(|&l| l != labels[p]) {
                cand[p] = l;
                if runs_within_cap(&cand, self.k, self.cap) {
                    let e = self.evaluate(cuts, &cand)?;
                    let bar = best.as_ref().map_or(cur.imbalance, |b| b.1.imbalance);
                    if e.imbalance < bar {
                        best = Some((cand.clone(), e));
                    }
                }
            }
            cand[p] = labels[p];
        }
        Ok(match best {
            Some((l, e)) => {
                *labels = l;
                *cur = e;
                true
            }
            None => false,
        })
    }
}

/// Searches for at most `n(k-1)` cuts splitting the necklace into `k`
/// bundles of equal multilinear value for every agent.
pub fn split_necklace(
    vals: &[Valuation],
    k: usize,
    layout: &NecklaceLayout,
    cfg: &SearchConfig,
) -> Result<SplitReport> {
    let m = common_item_count(vals)?;
    let n = vals.len();
    if k < 2 {
        return Err(Error::input(format!("k must be at least 2, got {k}")));
    }
    if layout.num_items() != m {
        return Err(Error::input(format!("layout has {} items, valuations have {m}", layout.num_items())));
    }
    if cfg.restarts == 0 || cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::input("search needs at least one restart and a positive tolerance"));
    }
    let cap = interval_cap(n, k);
    let worst_support = m.min(2 * cap);
    if worst_support > EXACT_SUPPORT_CAP && !vals.iter().all(has_closed_form) {
        return Err(Error::capacity(format!(
            "a color column may hold {worst_support} fractional items, above the exact cap of {EXACT_SUPPORT_CAP} (n = {n}, k = {k})"
        )));
    }
    let problem = Problem { vals, order: &layout.order, k, cuts: max_cuts(n, k), cap };

    let mut best: Option<Restart> = None;
    let mut start = 0;
    let mut run = 0;
    while start < cfg.restarts {
        let end = (start + cfg.batch.max(1)).min(cfg.restarts);
        let batch: Vec<Result<Restart>> = (start..end).into_par_iter().map(|r| problem.run(r, cfg)).collect();
        for r in batch {
            let r = r?;
            if best.as_ref().is_none_or(|b| r.eval.imbalance < b.eval.imbalance) {
                best = Some(r);
            }
        }
        run = end;
        if best.as_ref().is_some_and(|b| b.eval.imbalance <= cfg.tol) {
            break;
        }
        start = end;
    }
    let best = best.expect("at least one restart ran");
    let cv = CutVector::new(best.cuts, best.labels)?;
    let coloring = cuts_to_coloring(layout, &cv, k)?;
    Ok(SplitReport {
        method: SplitMethod::Necklace,
        max_fractional_per_color: coloring.max_fractional_per_color(),
        coloring,
        values: best.eval.values.chunks(k).map(<[f64]>::to_vec).collect(),
        imbalance: best.eval.imbalance,
        iterations: best.iterations,
        converged: best.eval.imbalance <= cfg.tol,
        cuts: Some(cv),
        layout: Some(layout.clone()),
        restart: best.index,
        restarts_run: run,
        trace: best.trace,
    })
}

// ---------------------------------------------------------------------------
// Additive route

/// A non-zero vector in the null space of `a` (rows x cols, row-major), if any.
fn null_vector(a: &[f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let eps = 1e-10 * scale;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) =
            (r..rows).map(|i| (i, a[i * cols + c].abs())).fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= eps {
            continue;
        }
        if best != r {
            for j in 0..cols {
                a.swap(r * cols + j, best * cols + j);
            }
        }
        let p = a[r * cols + c];
        for j in 0..cols {
            a[r * cols + j] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[i * cols + c];
                if f != 0.0 {
                    for j in 0..cols {
                        a[i * cols + j] -= f * a[r * cols + j];
                    }
                }
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    let mut is_pivot = vec![false; cols];
    for &(_, c) in &pivots {
        is_pivot[c] = true;
    }
    let free = (0..cols).find(|&c| !is_pivot[c])?;
    let mut d = vec![0.0; cols];
    d[free] = 1.0;
    for &(row, c) in &pivots {
        d[c] = -a[row * cols + free];
    }
    let norm = d.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    Some(d.into_iter().map(|v| v / norm).collect())
}

/// Equal split for additive valuations by null-space pivoting from the uniform coloring.
///
/// Every step keeps all `n(k-1)` equalities and the row sums, and fixes at
/// least one entry at 0 or 1. At termination at most `n(k-1)` items are fractional.
pub fn split_additive_exact(vals: &[AdditiveValuation], k: usize) -> Result<SplitReport> {
    let n = vals.len();
    let first = vals.first().ok_or_else(|| Error::input("at least one valuation is required"))?;
    let m = first.weights().len();
    if vals.iter().any(|v| v.weights().len() != m) {
        return Err(Error::input("additive valuations disagree on the item count"));
    }
    if k < 2 {
        return Err(Error::input(format!("k must be at least 2, got {k}")));
    }
    let mk = m * k;
    let mut x = vec![1.0 / k as f64; mk];
    let mut fixed = vec![false; mk];
    let mut iterations = 0;
    loop {
        let free: Vec<usize> = (0..mk).filter(|&v| !fixed[v]).collect();
        if free.is_empty() {
            break;
        }
        let cols = free.len();
        let items: Vec<usize> = {
            let mut it: Vec<usize> = free.iter().map(|v| v / k).collect();
            it.dedup();
            it
        };
        let rows = items.len() + n * (k - 1);
        let mut a = vec![0.0; rows * cols];
        for (c, &v) in free.iter().enumerate() {
            let (j, l) = (v / k, v % k);
            let row = items.binary_search(&j).expect("item of a free entry");
            a[row * cols + c] = 1.0;
            for (i, val) in vals.iter().enumerate() {
                let w = val.weights()[j];
                for l2 in 1..k {
                    let coef = if l == l2 {
                        w
                    } else if l == 0 {
                        -w
                    } else {
                        0.0
                    };
                    a[(items.len() + i * (k - 1) + l2 - 1) * cols + c] = coef;
                }
            }
        }
        let Some(d) = null_vector(&a, rows, cols) else {
            break;
        };
        iterations += 1;
        let (mut alpha, mut hit) = (f64::INFINITY, free[0]);
        for (c, &v) in free.iter().enumerate() {
            let step = if d[c] > 1e-14 {
                (1.0 - x[v]) / d[c]
            } else if d[c] < -1e-14 {
                x[v] / -d[c]
            } else {
                continue;
            };
            if step < alpha {
                alpha = step;
                hit = v;
            }
        }
        for (c, &v) in free.iter().enumerate() {
            x[v] += alpha * d[c];
        }
        x[hit] = x[hit].round();
        fixed[hit] = true;
        for &v in &free {
            let s = snap(x[v].clamp(0.0, 1.0));
            if s == 0.0 || s == 1.0 {
                x[v] = s;
                fixed[v] = true;
            }
        }
    }
    // Absorb drift: a row with one non-integral entry takes the remainder.
    for j in 0..m {
        let row = &mut x[j * k..(j + 1) * k];
        let frac: Vec<usize> = (0..k).filter(|&l| is_fractional(row[l])).collect();
        if frac.len() == 1 {
            let rest: f64 = (0..k).filter(|&l| l != frac[0]).map(|l| row[l]).sum();
            row[frac[0]] = snap((1.0 - rest).clamp(0.0, 1.0));
        }
    }
    let coloring = FractionalColoring::new(m, k, x)?;
    let values: Vec<Vec<f64>> = vals
        .iter()
        .map(|v| (0..k).map(|l| (0..m).map(|j| v.weights()[j] * coloring.get(j, l)).sum()).collect())
        .collect();
    let imbalance = values
        .iter()
        .map(|row: &Vec<f64>| {
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(SplitReport {
        method: SplitMethod::AdditiveExact,
        max_fractional_per_color: coloring.max_fractional_per_color(),
        coloring,
        values,
        imbalance,
        iterations,
        converged: imbalance <= ADDITIVE_TOL,
        cuts: None,
        layout: None,
        restart: 0,
        restarts_run: 1,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuations::{random_instance, Family, FamilyParams};

    fn cv(cuts: &[f64], labels: &[usize]) -> CutVector {
        CutVector::new(cuts.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn caps() {
        assert_eq!(max_cuts(3, 3), 6);
        assert_eq!(interval_cap(1, 2), 1);
        assert_eq!(interval_cap(4, 3), 3);
        assert_eq!(interval_cap(8, 4), 7);
        for n in 1..20 {
            assert!(interval_cap(n, 2) <= n);
            assert!(interval_cap(n, 5) <= n);
        }
    }

    #[test]
    fn coloring_from_cuts() {
        let layout = NecklaceLayout::identity(2);
        let c = cuts_to_coloring(&layout, &cv(&[], &[0]), 2).unwrap();
        assert_eq!(c.entries(), &[1.0, 0.0, 1.0, 0.0]);
        let c = cuts_to_coloring(&layout, &cv(&[0.5], &[0, 1]), 2).unwrap();
        assert_eq!(c.entries(), &[1.0, 0.0, 0.0, 1.0]);
        let c = cuts_to_coloring(&layout, &cv(&[0.25], &[0, 1]), 2).unwrap();
        assert_eq!(c.entries(), &[0.5, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn layout_order_is_respected() {
        let layout = NecklaceLayout::new(vec![1, 0]).unwrap();
        let c = cuts_to_coloring(&layout, &cv(&[0.25], &[0, 1]), 2).unwrap();
        assert_eq!(c.row(1), &[0.5, 0.5]);
        assert_eq!(c.row(0), &[0.0, 1.0]);
        assert!(NecklaceLayout::new(vec![0, 0]).is_err());
    }

    #[test]
    fn cut_vector_validation() {
        assert!(CutVector::new(vec![0.6, 0.4], vec![0, 1, 0]).is_err());
        assert!(CutVector::new(vec![0.4], vec![0]).is_err());
        assert!(CutVector::new(vec![1.5], vec![0, 1]).is_err());
        let dup = cv(&[0.3, 0.3], &[0, 1, 0]);
        assert_eq!(dup.run_counts(2), vec![2, 1]);
        assert!(cuts_to_coloring(&NecklaceLayout::identity(2), &cv(&[0.5], &[0, 2]), 2).is_err());
    }

    #[test]
    fn symmetric_instance_splits_in_half() {
        let v = [Valuation::additive(vec![1.0; 4]).unwrap()];
        let r = split_necklace(&v, 2, &NecklaceLayout::identity(4), &SearchConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.imbalance, 0.0);
        let cuts = r.cuts.unwrap();
        assert_eq!(cuts.cuts(), &[0.5]);
        assert_eq!(cuts.labels(), &[0, 1]);
    }

    #[test]
    fn three_unit_items_three_colors() {
        let v = [Valuation::additive(vec![1.0; 3]).unwrap()];
        let r = split_necklace(&v, 3, &NecklaceLayout::identity(3), &SearchConfig::default()).unwrap();
        assert!(r.imbalance < 1e-12);
        let c = r.coloring.to_coloring().expect("integral");
        let mut colors = c.colors().to_vec();
        colors.sort();
        assert_eq!(colors, vec![0, 1, 2]);
    }

    #[test]
    fn necklace_agrees_with_additive_route() {
        let vals = random_instance(Family::AdditiveSigned, 2, 8, 5, &FamilyParams::default()).unwrap();
        let r = split_necklace(&vals, 2, &NecklaceLayout::identity(8), &SearchConfig::default()).unwrap();
        assert!(r.converged, "imbalance {}", r.imbalance);
        assert!(r.imbalance <= 1e-6);
        let adds: Vec<AdditiveValuation> = vals
            .iter()
            .map(|v| match v {
                Valuation::Additive(a) => a.clone(),
                _ => unreachable!(),
            })
            .collect();
        let exact = split_additive_exact(&adds, 2).unwrap();
        assert!(exact.imbalance <= ADDITIVE_TOL);
    }

    #[test]
    fn additive_exact_examples() {
        let r = split_additive_exact(&[AdditiveValuation::new(vec![1.0, 1.0]).unwrap()], 2).unwrap();
        assert!(r.imbalance <= 1e-9);
        assert!(r.coloring.fractional_items() <= 1);

        let r = split_additive_exact(&[AdditiveValuation::new(vec![3.0, 1.0, 1.0, 1.0]).unwrap()], 2).unwrap();
        assert!(r.imbalance <= 1e-9);
    }

    #[test]
    fn additive_exact_rank_deficient_profile() {
        // Duplicate agents add dependent constraints.
        let a = AdditiveValuation::new(vec![0.2, 0.7, 0.1, 0.9, 0.4]).unwrap();
        let r = split_additive_exact(&[a.clone(), a.clone(), a], 3).unwrap();
        assert!(r.imbalance <= 1e-9);
        assert!(r.coloring.fractional_items() <= 2);
    }

    #[test]
    fn restarts_are_deterministic() {
        let vals = random_instance(Family::Coverage, 3, 10, 2, &FamilyParams::default()).unwrap();
        let cfg = SearchConfig { restarts: 4, batch: 2, ..SearchConfig::default() };
        let a = split_necklace(&vals, 3, &NecklaceLayout::identity(10), &cfg).unwrap();
        let b = split_necklace(&vals, 3, &NecklaceLayout::identity(10), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        let v = [Valuation::additive(vec![1.0; 3]).unwrap()];
        let cfg = SearchConfig::default();
        assert!(split_necklace(&v, 1, &NecklaceLayout::identity(3), &cfg).is_err());
        assert!(split_necklace(&v, 2, &NecklaceLayout::identity(4), &cfg).is_err());
        let bad = SearchConfig { tol: 0.0, ..cfg };
        assert!(split_necklace(&v, 2, &NecklaceLayout::identity(3), &bad).is_err());
    }

    #[test]
    fn capacity_error_for_wide_enumeration() {
        // 30 agents, 2 colors: a column may carry 2 * 16 = 32 fractional items.
        let vals: Vec<Valuation> = (0..30).map(|_| Valuation::custom(40, 1.0, |s| s.len() as f64).unwrap()).collect();
        let r = split_necklace(&vals, 2, &NecklaceLayout::identity(40), &SearchConfig::default());
        assert!(matches!(r, Err(Error::Capacity(_))));
    }
}
