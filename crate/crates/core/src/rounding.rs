//! Independent randomized rounding of fractional colorings.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{disc_of_bundles, DiscrepancyValue};
use crate::multilinear::extension_value;
use crate::rng;
use crate::splitter::FractionalColoring;
use crate::subset::Subset;
use crate::valuations::{common_item_count, Valuation};

/// Constant `c` in `sqrt(c * t * ln(nk))`.
pub const BOUND_CONSTANT: f64 = 2.0;

/// Default number of roundings drawn by [`round_best_of`].
pub const DEFAULT_TRIALS: usize = 64;

/// An integral coloring `chi: M -> [k]`, colors `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coloring {
    k: usize,
    colors: Vec<usize>,
}

impl Coloring {
    pub fn new(colors: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("k must be at least 1"));
        }
        if colors.len() > crate::subset::MAX_ITEMS {
            return Err(Error::capacity(format!("{} items exceeds the bitmask limit", colors.len())));
        }
        if let Some((j, c)) = colors.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(Error::input(format!("item {j} has color {c}, but k = {k}")));
        }
        Ok(Coloring { k, colors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn color(&self, j: usize) -> usize {
        self.colors[j]
    }

    /// `chi^-1(l)`.
    pub fn bundle(&self, l: usize) -> Subset {
        self.colors.iter().enumerate().filter(|(_, &c)| c == l).map(|(j, _)| j).collect()
    }

    /// All `k` color classes, in color order.
    pub fn bundles(&self) -> Vec<Subset> {
        let mut b = vec![Subset::EMPTY; self.k];
        for (j, &c) in self.colors.iter().enumerate() {
            b[c] = b[c].with(j);
        }
        b
    }
}

/// Draws each item's color independently from its row of `chi`.
pub fn round_once(chi: &FractionalColoring, seed: u64) -> Coloring {
    let mut rng = rng::stream(seed, 0);
    draw(chi, &mut rng)
}

fn draw(chi: &FractionalColoring, rng: &mut impl Rng) -> Coloring {
    let colors = (0..chi.num_items())
        .map(|j| {
            let row = chi.row(j);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (l, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    last = l;
                    if u < acc {
                        return l;
                    }
                }
            }
            last
        })
        .collect();
    Coloring { k: chi.num_colors(), colors }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub coloring: Coloring,
    pub realized_disc: f64,
    pub worst: DiscrepancyValue,
    /// `F_i` of the first color column, per agent.
    pub mu: Vec<f64>,
    /// Largest `max_l F_i(chi_l) - min_l F_i(chi_l)` over agents.
    pub column_spread: f64,
    /// Largest fractional support over color columns.
    pub fractional_support: usize,
    pub bound_predicted: f64,
    pub trials_used: usize,
    pub best_trial: usize,
}

/// `sqrt(c * t * ln(nk))`.
pub fn predicted_bound(t: usize, n: usize, k: usize, c: f64) -> f64 {
    (c * t as f64 * ((n * k) as f64).ln()).sqrt()
}

/// McDiarmid tail `2 exp(-2 a^2 / t)` for unit bounded differences.
pub fn mcdiarmid_tail(t: usize, a: f64) -> f64 {
    2.0 * (-2.0 * a * a / t as f64).exp()
}

/// Draws `trials` independent roundings and keeps the one with the smallest
/// discrepancy (ties go to the earliest trial).
pub fn round_best_of(vals: &[Valuation], chi: &FractionalColoring, trials: usize, seed: u64) -> Result<RoundingReport> {
    let m = common_item_count(vals)?;
    if chi.num_items() != m {
        return Err(Error::input(format!("coloring covers {} items, valuations have {m}", chi.num_items())));
    }
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let k = chi.num_colors();
    let columns: Vec<_> = (0..k).map(|l| chi.column(l)).collect();
    let mut mu = Vec::with_capacity(vals.len());
    let mut spread = 0.0f64;
    for v in vals {
        let f = columns.iter().map(|c| extension_value(v, c)).collect::<Result<Vec<_>>>()?;
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
        mu.push(f[0]);
    }
    let t = columns.iter().map(|c| c.support_len()).max().unwrap_or(0);

    let outcomes: Vec<(DiscrepancyValue, Coloring)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, trial as u64);
            let c = draw(chi, &mut rng);
            (disc_of_bundles(vals, &c.bundles()), c)
        })
        .collect();
    let (best_trial, (worst, coloring)) = outcomes
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0.value < best.1 .0.value { cur } else { best })
        .expect("at least one trial");

    Ok(RoundingReport {
        realized_disc: worst.value,
        worst,
        coloring,
        mu,
        column_spread: spread,
        fractional_support: t,
        bound_predicted: predicted_bound(t, vals.len(), k, BOUND_CONSTANT),
        trials_used: trials,
        best_trial,
    })
}
