//! Multilinear extension `F(x) = E[v(S)]`, where each item `j` joins `S`
//! independently with probability `x_j`.
//!
//! [`eval_exact`] enumerates subsets of the fractional support only; items
//! with `x_j = 1` form a fixed base set. [`eval_mc`] samples. The pipeline
//! calls [`extension_value`], which uses the closed form where the oracle
//! has one (additive, coverage) and falls back to enumeration otherwise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::subset::Subset;
use crate::valuations::Valuation;

/// Largest fractional support [`eval_exact`] enumerates (2^24 oracle calls).
pub const EXACT_SUPPORT_CAP: usize = 24;

/// Coordinates this close to 0 or 1 are snapped to the integer.
pub const SNAP_EPS: f64 = 1e-12;

/// `sqrt(ln(2 / 0.05) / 2)`: the Hoeffding multiplier for a 95% two-sided interval.
const HOEFFDING_95: f64 = 1.358_101_515_740_619_5;

/// Per-item inclusion probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FractionalVector {
    x: Vec<f64>,
}

impl FractionalVector {
    /// Validates `x` into `[0, 1]^m` and snaps near-integral coordinates.
    pub fn new(mut x: Vec<f64>) -> Result<Self> {
        for (j, xj) in x.iter_mut().enumerate() {
            if !xj.is_finite() || *xj < -SNAP_EPS || *xj > 1.0 + SNAP_EPS {
                return Err(Error::input(format!("coordinate {j} = {xj} outside [0, 1]")));
            }
            *xj = snap(*xj);
        }
        Ok(FractionalVector { x })
    }

    /// The indicator vector of `s` over `m` items.
    pub fn indicator(s: Subset, m: usize) -> Self {
        FractionalVector { x: (0..m).map(|j| if s.contains(j) { 1.0 } else { 0.0 }).collect() }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Items with `0 < x_j < 1`, ascending.
    pub fn fractional_support(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&j| self.x[j] > 0.0 && self.x[j] < 1.0).collect()
    }

    pub fn support_len(&self) -> usize {
        self.x.iter().filter(|&&v| v > 0.0 && v < 1.0).count()
    }

    /// Items with `x_j = 1`.
    pub fn base_set(&self) -> Subset {
        self.x.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(j, _)| j).collect()
    }

    pub fn is_integral(&self) -> bool {
        self.support_len() == 0
    }
}

impl TryFrom<Vec<f64>> for FractionalVector {
    type Error = Error;

    fn try_from(x: Vec<f64>) -> Result<Self> {
        FractionalVector::new(x)
    }
}

impl From<FractionalVector> for Vec<f64> {
    fn from(v: FractionalVector) -> Self {
        v.x
    }
}

pub(crate) fn snap(v: f64) -> f64 {
    if v <= SNAP_EPS {
        0.0
    } else if v >= 1.0 - SNAP_EPS {
        1.0
    } else {
        v
    }
}

fn check_len(v: &Valuation, x: &FractionalVector) -> Result<()> {
    if v.num_items() != x.len() {
        return Err(Error::input(format!(
            "fractional vector has {} coordinates, oracle has {} items",
            x.len(),
            v.num_items()
        )));
    }
    Ok(())
}

/// Exact `F(x)` by enumerating the subsets of the fractional support.
pub fn eval_exact(v: &Valuation, x: &FractionalVector) -> Result<f64> {
    check_len(v, x)?;
    let support = x.fractional_support();
    if support.len() > EXACT_SUPPORT_CAP {
        return Err(Error::capacity(format!(
            "fractional support of {} items exceeds the exact cap of {EXACT_SUPPORT_CAP}; use eval_mc",
            support.len()
        )));
    }
    Ok(expand(v, x.as_slice(), &support, x.base_set(), 1.0))
}

fn expand(v: &Valuation, x: &[f64], rest: &[usize], set: Subset, prob: f64) -> f64 {
    match rest.split_first() {
        None => prob * v.value(set),
        Some((&j, tail)) => expand(v, x, tail, set.with(j), prob * x[j]) + expand(v, x, tail, set, prob * (1.0 - x[j])),
    }
}

/// Closed-form `F(x)` for oracles that admit one.
pub fn closed_form(v: &Valuation, x: &FractionalVector) -> Option<f64> {
    match v {
        Valuation::Additive(a) => Some(a.weights().iter().zip(x.as_slice()).map(|(w, p)| w * p).sum()),
        Valuation::Coverage(c) => {
            let base = x.base_set();
            let support: Subset = x.fractional_support().into_iter().collect();
            let x = x.as_slice();
            Some(
                c.coverers()
                    .iter()
                    .zip(c.element_weights())
                    .map(|(&cov, w)| {
                        if !cov.is_disjoint(base) {
                            return *w;
                        }
                        let missed: f64 = cov.intersection(support).iter().map(|j| 1.0 - x[j]).product();
                        w * (1.0 - missed)
                    })
                    .sum(),
            )
        }
        _ => None,
    }
}

/// True iff [`extension_value`] never needs enumeration for `v`.
pub fn has_closed_form(v: &Valuation) -> bool {
    matches!(v, Valuation::Additive(_) | Valuation::Coverage(_))
}

/// `F(x)` by the cheapest exact route: closed form when available,
/// otherwise [`eval_exact`].
pub fn extension_value(v: &Valuation, x: &FractionalVector) -> Result<f64> {
    check_len(v, x)?;
    match closed_form(v, x) {
        Some(f) => Ok(f),
        None => eval_exact(v, x),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Hoeffding 95% half-width from the range `L * |support|`. Reported, not certified.
    pub half_width: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `F(x)` from `trials` independent samples.
///
/// Trials are split across `workers` contiguous chunks, each drawing from its
/// own stream derived from `seed`; partial sums are combined in worker order,
/// so the result depends only on `(seed, trials, workers)`.
pub fn eval_mc(v: &Valuation, x: &FractionalVector, trials: usize, seed: u64, workers: usize) -> Result<McEstimate> {
    check_len(v, x)?;
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let workers = workers.clamp(1, trials);
    let support = x.fractional_support();
    let base = x.base_set();
    let xs = x.as_slice();
    let per = trials / workers;
    let extra = trials % workers;
    let sums: Vec<f64> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let count = per + usize::from(w < extra);
            let mut rng = rng::stream(seed, w as u64);
            let mut sum = 0.0;
            for _ in 0..count {
                let mut s = base;
                for &j in &support {
                    if rng.random::<f64>() < xs[j] {
                        s = s.with(j);
                    }
                }
                sum += v.value(s);
            }
            sum
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / trials as f64;
    let range = v.marginal_bound() * support.len() as f64;
    Ok(McEstimate { mean, half_width: range * HOEFFDING_95 / (trials as f64).sqrt(), trials })
}
