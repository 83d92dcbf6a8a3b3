//! Valuation oracles: set functions `v: 2^M -> R` with a declared marginal bound.
//!
//! Every oracle is immutable after construction and `Send + Sync`, so it can
//! be evaluated concurrently. Subsets are [`Subset`] bitmasks, which limits
//! the item count to 64.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::subset::{Subset, MAX_ITEMS};

/// Largest item count a [`TableValuation`] may tabulate (2^20 entries).
pub const TABLE_MAX_ITEMS: usize = 20;

/// Largest item count for exhaustive marginal checks.
pub const EXHAUSTIVE_MAX_ITEMS: usize = 20;

/// Largest item count for transfer-derived oracles; each evaluation
/// enumerates transfers across the whole item set.
pub const TRANSFER_MAX_ITEMS: usize = 22;

/// Marginal bound of signed transfer oracles. `T_v(S, S^c)` moves by at most 1
/// per item, but where `v(S) - v(S^c)` changes sign the value jumps from `-1`
/// to `+1`.
pub const TRANSFER_DERIVED_BOUND: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationKind {
    Additive,
    Table,
    Coverage,
    TransferDerived,
    Custom,
}

/// `v(S) = sum of weights[j] over j in S`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveValuation {
    weights: Vec<f64>,
    bound: f64,
}

impl AdditiveValuation {
    /// Declares the marginal bound as `max |weights[j]|`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let bound = weights.iter().fold(0.0f64, |b, w| b.max(w.abs()));
        Self::with_bound(weights, bound)
    }

    pub fn with_bound(weights: Vec<f64>, bound: f64) -> Result<Self> {
        check_item_count(weights.len())?;
        check_bound(bound)?;
        if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || w.abs() > bound) {
            return Err(Error::input(format!("weight {w} of item {j} outside [-{bound}, {bound}]")));
        }
        Ok(AdditiveValuation { weights, bound })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn value(&self, s: Subset) -> f64 {
        s.iter().map(|j| self.weights[j]).sum()
    }
}

/// Explicit value for each of the `2^m` subsets, indexed by bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct TableValuation {
    m: usize,
    values: Vec<f64>,
    bound: f64,
}

impl TableValuation {
    /// Declares the marginal bound as the exhaustively measured maximum marginal.
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        let mut t = TableValuation { m, values, bound: 0.0 };
        t.validate()?;
        t.bound = table_max_marginal(m, &t.values).0;
        Ok(t)
    }

    pub fn with_bound(m: usize, values: Vec<f64>, bound: f64) -> Result<Self> {
        check_bound(bound)?;
        let t = TableValuation { m, values, bound };
        t.validate()?;
        Ok(t)
    }

    /// Tabulates an arbitrary oracle, keeping its declared bound.
    pub fn tabulate(v: &Valuation) -> Result<Self> {
        let m = v.num_items();
        if m > TABLE_MAX_ITEMS {
            return Err(Error::capacity(format!("cannot tabulate {m} items; tables hold at most {TABLE_MAX_ITEMS}")));
        }
        let values = (0..1u64 << m).map(|b| v.value(Subset::from_bits(b))).collect();
        Self::with_bound(m, values, v.marginal_bound())
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::input("item count must be at least 1"));
        }
        if self.m > TABLE_MAX_ITEMS {
            return Err(Error::capacity(format!(
                "table valuation over {} items exceeds the cap of {TABLE_MAX_ITEMS}",
                self.m
            )));
        }
        if self.values.len() != 1usize << self.m {
            return Err(Error::input(format!(
                "table for m = {} must have {} entries, got {}",
                self.m,
                1usize << self.m,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("table contains a non-finite value"));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Weighted coverage: `v(S)` is the total weight of universe elements covered
/// by the union of the item sets of `S`. Monotone; the marginal bound is the
/// largest single-item coverage weight.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageValuation {
    item_sets: Vec<Vec<usize>>,
    element_weights: Vec<f64>,
    /// For each universe element, the items that cover it.
    coverers: Vec<Subset>,
    bound: f64,
}

impl CoverageValuation {
    pub fn new(universe_size: usize, item_sets: Vec<Vec<usize>>, element_weights: Vec<f64>) -> Result<Self> {
        let m = item_sets.len();
        check_item_count(m)?;
        if element_weights.len() != universe_size {
            return Err(Error::input(format!(
                "expected {universe_size} element weights, got {}",
                element_weights.len()
            )));
        }
        if element_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input("element weights must be finite and non-negative"));
        }
        let mut coverers = vec![Subset::EMPTY; universe_size];
        let mut item_sets = item_sets;
        for (j, set) in item_sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &u in set.iter() {
                if u >= universe_size {
                    return Err(Error::input(format!("item {j} covers element {u} outside the universe")));
                }
                coverers[u] = coverers[u].with(j);
            }
        }
        let bound =
            item_sets.iter().map(|set| set.iter().map(|&u| element_weights[u]).sum::<f64>()).fold(0.0, f64::max);
        Ok(CoverageValuation { item_sets, element_weights, coverers, bound })
    }

    /// Declares `bound`, which must be at least the largest singleton value.
    pub fn with_bound(
        universe_size: usize,
        item_sets: Vec<Vec<usize>>,
        element_weights: Vec<f64>,
        bound: f64,
    ) -> Result<Self> {
        check_bound(bound)?;
        let mut c = Self::new(universe_size, item_sets, element_weights)?;
        if c.bound > bound {
            return Err(Error::input(format!("an item is worth {} alone, above the bound {bound}", c.bound)));
        }
        c.bound = bound;
        Ok(c)
    }

    pub fn universe_size(&self) -> usize {
        self.element_weights.len()
    }

    pub fn item_sets(&self) -> &[Vec<usize>] {
        &self.item_sets
    }

    pub fn element_weights(&self) -> &[f64] {
        &self.element_weights
    }

    pub(crate) fn coverers(&self) -> &[Subset] {
        &self.coverers
    }

    fn value(&self, s: Subset) -> f64 {
        self.coverers.iter().zip(&self.element_weights).filter(|(c, _)| !c.is_disjoint(s)).map(|(_, w)| w).sum()
    }
}

/// Signed transfer imbalance `v'(S)` of a base oracle: `+T_v(S, S^c)` when
/// `v(S) >= v(S^c)`, otherwise `-T_v(S, S^c)`. Marginals lie in `{-2, ..., 2}`.
#[derive(Clone)]
pub struct TransferValuation {
    base: Arc<Valuation>,
}

impl TransferValuation {
    pub(crate) fn new(base: Arc<Valuation>) -> Result<Self> {
        let m = base.num_items();
        if m > TRANSFER_MAX_ITEMS {
            return Err(Error::capacity(format!(
                "transfer-derived oracle over {m} items exceeds the cap of {TRANSFER_MAX_ITEMS}"
            )));
        }
        Ok(TransferValuation { base })
    }

    pub fn base(&self) -> &Valuation {
        &self.base
    }
}

impl fmt::Debug for TransferValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransferValuation").field("base", &self.base).finish()
    }
}

pub type SetFn = dyn Fn(Subset) -> f64 + Send + Sync;

/// A user-supplied closure. It must be deterministic.
#[derive(Clone)]
pub struct CustomValuation {
    m: usize,
    bound: f64,
    f: Arc<SetFn>,
}

impl CustomValuation {
    pub fn new(m: usize, bound: f64, f: impl Fn(Subset) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_item_count(m)?;
        check_bound(bound)?;
        Ok(CustomValuation { m, bound, f: Arc::new(f) })
    }
}

impl fmt::Debug for CustomValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomValuation").field("m", &self.m).field("bound", &self.bound).finish_non_exhaustive()
    }
}

/// A valuation oracle over items `0..m`.
#[derive(Clone, Debug)]
pub enum Valuation {
    Additive(AdditiveValuation),
    Table(TableValuation),
    Coverage(CoverageValuation),
    TransferDerived(TransferValuation),
    Custom(CustomValuation),
}

impl Valuation {
    pub fn additive(weights: Vec<f64>) -> Result<Self> {
        AdditiveValuation::new(weights).map(Valuation::Additive)
    }

    pub fn table(m: usize, values: Vec<f64>) -> Result<Self> {
        TableValuation::new(m, values).map(Valuation::Table)
    }

    pub fn coverage(universe_size: usize, item_sets: Vec<Vec<usize>>, element_weights: Vec<f64>) -> Result<Self> {
        CoverageValuation::new(universe_size, item_sets, element_weights).map(Valuation::Coverage)
    }

    pub fn custom(m: usize, bound: f64, f: impl Fn(Subset) -> f64 + Send + Sync + 'static) -> Result<Self> {
        CustomValuation::new(m, bound, f).map(Valuation::Custom)
    }

    pub fn num_items(&self) -> usize {
        match self {
            Valuation::Additive(a) => a.weights.len(),
            Valuation::Table(t) => t.m,
            Valuation::Coverage(c) => c.item_sets.len(),
            Valuation::TransferDerived(t) => t.base.num_items(),
            Valuation::Custom(c) => c.m,
        }
    }

    /// Declared bound `L` on `|v(S + j) - v(S)|`.
    pub fn marginal_bound(&self) -> f64 {
        match self {
            Valuation::Additive(a) => a.bound,
            Valuation::Table(t) => t.bound,
            Valuation::Coverage(c) => c.bound,
            Valuation::TransferDerived(_) => TRANSFER_DERIVED_BOUND,
            Valuation::Custom(c) => c.bound,
        }
    }

    pub fn kind(&self) -> ValuationKind {
        match self {
            Valuation::Additive(_) => ValuationKind::Additive,
            Valuation::Table(_) => ValuationKind::Table,
            Valuation::Coverage(_) => ValuationKind::Coverage,
            Valuation::TransferDerived(_) => ValuationKind::TransferDerived,
            Valuation::Custom(_) => ValuationKind::Custom,
        }
    }

    /// `v(S)`, rejecting subsets that reference items `>= m`.
    pub fn eval(&self, s: Subset) -> Result<f64> {
        let m = self.num_items();
        if !s.fits(m) {
            let bad = s.difference(Subset::full(m)).iter().next().unwrap_or(m);
            return Err(Error::input(format!("subset references item {bad}, but m = {m}")));
        }
        Ok(self.value(s))
    }

    /// `v(S)` without the range check. `s` must fit in `0..m`.
    pub fn value(&self, s: Subset) -> f64 {
        debug_assert!(s.fits(self.num_items()));
        match self {
            Valuation::Additive(a) => a.value(s),
            Valuation::Table(t) => t.values[s.bits() as usize],
            Valuation::Coverage(c) => c.value(s),
            Valuation::TransferDerived(t) => crate::measures::signed_transfer(&t.base, s) as f64,
            Valuation::Custom(c) => (c.f)(s),
        }
    }
}

fn check_item_count(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::input("item count must be at least 1"));
    }
    if m > MAX_ITEMS {
        return Err(Error::capacity(format!("{m} items exceeds the bitmask limit of {MAX_ITEMS}")));
    }
    Ok(())
}

fn check_bound(bound: f64) -> Result<()> {
    if !bound.is_finite() || bound < 0.0 {
        return Err(Error::input(format!("marginal bound must be finite and non-negative, got {bound}")));
    }
    Ok(())
}

/// Checks that every oracle in a profile is defined over the same `m` items.
pub fn common_item_count(vals: &[Valuation]) -> Result<usize> {
    let first = vals.first().ok_or_else(|| Error::input("at least one valuation is required"))?;
    let m = first.num_items();
    if let Some(i) = vals.iter().position(|v| v.num_items() != m) {
        return Err(Error::input(format!("valuation {i} has {} items, valuation 0 has {m}", vals[i].num_items())));
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Marginal-bound verification

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verification {
    /// All `(S, j)` pairs; requires `m <= 20`.
    Exhaustive,
    /// `samples` uniformly random `(S, j)` pairs drawn from `seed`.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub max_observed_marginal: f64,
    /// `(S, j)` with `j` not in `S` attaining the maximum.
    pub witness: Option<(Subset, usize)>,
    pub declared_bound: f64,
    pub pairs_checked: u64,
    pub violated: bool,
}

pub fn verify_marginal_bound(v: &Valuation, mode: Verification) -> Result<MarginalReport> {
    let m = v.num_items();
    let mut best = 0.0f64;
    let mut witness = None;
    let mut pairs = 0u64;
    let consider = |s: Subset, j: usize, best: &mut f64, witness: &mut Option<(Subset, usize)>| {
        let d = (v.value(s.with(j)) - v.value(s)).abs();
        if d > *best || witness.is_none() {
            *best = best.max(d);
            *witness = Some((s, j));
        }
    };
    match mode {
        Verification::Exhaustive => {
            if m > EXHAUSTIVE_MAX_ITEMS {
                return Err(Error::capacity(format!(
                    "exhaustive marginal check over {m} items exceeds the cap of {EXHAUSTIVE_MAX_ITEMS}; use sampled mode"
                )));
            }
            if let Valuation::Table(t) = v {
                (best, witness, pairs) = table_max_marginal_witness(m, &t.values);
            } else {
                for bits in 0..1u64 << m {
                    let s = Subset::from_bits(bits);
                    for j in s.complement(m).iter() {
                        consider(s, j, &mut best, &mut witness);
                        pairs += 1;
                    }
                }
            }
        }
        Verification::Sampled { samples, seed } => {
            let mut rng = rng::stream(seed, 0);
            let full = Subset::full(m).bits();
            for _ in 0..if m == 0 { 0 } else { samples } {
                let s = Subset::from_bits(rng.random::<u64>() & full);
                let j = rng.random_range(0..m);
                consider(s.without(j), j, &mut best, &mut witness);
                pairs += 1;
            }
        }
    }
    let bound = v.marginal_bound();
    Ok(MarginalReport {
        max_observed_marginal: best,
        witness,
        declared_bound: bound,
        pairs_checked: pairs,
        violated: best > bound,
    })
}

fn table_max_marginal(m: usize, values: &[f64]) -> (f64, Option<(Subset, usize)>) {
    let (b, w, _) = table_max_marginal_witness(m, values);
    (b, w)
}

fn table_max_marginal_witness(m: usize, values: &[f64]) -> (f64, Option<(Subset, usize)>, u64) {
    let mut best = 0.0f64;
    let mut witness = None;
    let mut pairs = 0u64;
    for j in 0..m {
        let bit = 1usize << j;
        for s in 0..values.len() {
            if s & bit == 0 {
                let d = (values[s | bit] - values[s]).abs();
                pairs += 1;
                if d > best || witness.is_none() {
                    best = best.max(d);
                    witness = Some((Subset::from_bits(s as u64), j));
                }
            }
        }
    }
    (best, witness, pairs)
}

// ---------------------------------------------------------------------------
// Random instance families

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Weights uniform in `[0, 1]`.
    AdditiveUniform,
    /// Weights uniform in `[-1, 1]`.
    AdditiveSigned,
    /// Random weighted coverage, rescaled to marginal bound 1.
    Coverage,
    /// Uniform random table, rescaled by its measured maximum marginal.
    TableRandomLipschitz,
}

impl Family {
    pub const ALL: [Family; 4] =
        [Family::AdditiveUniform, Family::AdditiveSigned, Family::Coverage, Family::TableRandomLipschitz];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::AdditiveUniform => "additive-uniform",
            Family::AdditiveSigned => "additive-signed",
            Family::Coverage => "coverage",
            Family::TableRandomLipschitz => "table-random-lipschitz",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown valuation family '{s}'")))
    }
}

/// Knobs for the coverage family; ignored by the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    /// Universe size per agent; `None` means `2m`.
    pub universe: Option<usize>,
    /// Probability that an item covers a given element.
    pub density: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams { universe: None, density: 0.3 }
    }
}

/// `n` oracles over `m` items from `family`, each with marginal bound 1.
/// All randomness comes from `seed`.
pub fn random_instance(family: Family, n: usize, m: usize, seed: u64, params: &FamilyParams) -> Result<Vec<Valuation>> {
    if n == 0 {
        return Err(Error::input("agent count must be at least 1"));
    }
    check_item_count(m)?;
    let mut rng = rng::stream(seed, 0);
    (0..n)
        .map(|_| match family {
            Family::AdditiveUniform => {
                let w = (0..m).map(|_| rng.random::<f64>()).collect();
                AdditiveValuation::with_bound(w, 1.0).map(Valuation::Additive)
            }
            Family::AdditiveSigned => {
                let w = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
                AdditiveValuation::with_bound(w, 1.0).map(Valuation::Additive)
            }
            Family::Coverage => random_coverage(&mut rng, m, params),
            Family::TableRandomLipschitz => random_lipschitz_table(&mut rng, m),
        })
        .collect()
}

const COVERAGE_HEADROOM: f64 = 1e-9;

fn random_coverage(rng: &mut impl Rng, m: usize, params: &FamilyParams) -> Result<Valuation> {
    if !(0.0..=1.0).contains(&params.density) {
        return Err(Error::input(format!("coverage density {} outside [0, 1]", params.density)));
    }
    let universe = params.universe.unwrap_or(2 * m).max(1);
    let mut weights: Vec<f64> = (0..universe).map(|_| rng.random::<f64>()).collect();
    let mut sets: Vec<Vec<usize>> =
        (0..m).map(|_| (0..universe).filter(|_| rng.random_bool(params.density)).collect()).collect();
    // Keep every item non-trivial.
    for set in sets.iter_mut().filter(|s| s.is_empty()) {
        set.push(rng.random_range(0..universe));
    }
    let peak = sets.iter().map(|s| s.iter().map(|&u| weights[u]).sum::<f64>()).fold(0.0, f64::max);
    // Marginals are differences of two sums; the headroom absorbs their
    // round-off so that observed marginals never exceed the declared 1.
    if peak > 0.0 {
        let scale = peak * (1.0 + COVERAGE_HEADROOM);
        weights.iter_mut().for_each(|w| *w /= scale);
    }
    CoverageValuation::with_bound(universe, sets, weights, 1.0).map(Valuation::Coverage)
}

fn random_lipschitz_table(rng: &mut impl Rng, m: usize) -> Result<Valuation> {
    if m > TABLE_MAX_ITEMS {
        return Err(Error::capacity(format!(
            "table-random-lipschitz over {m} items exceeds the table cap of {TABLE_MAX_ITEMS}"
        )));
    }
    let mut values: Vec<f64> = (0..1usize << m).map(|_| rng.random::<f64>()).collect();
    rescale_to_unit_marginals(m, &mut values);
    TableValuation::with_bound(m, values, 1.0).map(Valuation::Table)
}

/// Divides a table by its measured maximum marginal until that maximum is at most 1.
pub(crate) fn rescale_to_unit_marginals(m: usize, values: &mut [f64]) {
    let (peak, _) = table_max_marginal(m, values);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    // Rounding can leave the peak a few ulps above 1, and dividing by such a
    // peak may round back to the same values. Shrink geometrically instead.
    let mut shrink = f64::EPSILON;
    while table_max_marginal(m, values).0 > 1.0 {
        values.iter_mut().for_each(|v| *v *= 1.0 - shrink);
        shrink *= 2.0;
    }
}

// ---------------------------------------------------------------------------
// Instance documents

/// The defining data of one serializable oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValuationData {
    Additive { weights: Vec<f64>, marginal_bound: f64 },
    Table { m: usize, values: Vec<f64>, marginal_bound: f64 },
    Coverage { universe_size: usize, item_sets: Vec<Vec<usize>>, element_weights: Vec<f64>, marginal_bound: f64 },
}

impl ValuationData {
    pub fn from_valuation(v: &Valuation) -> Result<Self> {
        match v {
            Valuation::Additive(a) => {
                Ok(ValuationData::Additive { weights: a.weights.clone(), marginal_bound: a.bound })
            }
            Valuation::Table(t) => {
                Ok(ValuationData::Table { m: t.m, values: t.values.clone(), marginal_bound: t.bound })
            }
            Valuation::Coverage(c) => Ok(ValuationData::Coverage {
                universe_size: c.universe_size(),
                item_sets: c.item_sets.clone(),
                element_weights: c.element_weights.clone(),
                marginal_bound: c.bound,
            }),
            other => Err(Error::input(format!("{:?} oracles cannot be serialized", other.kind()))),
        }
    }

    pub fn into_valuation(self) -> Result<Valuation> {
        match self {
            ValuationData::Additive { weights, marginal_bound } => {
                AdditiveValuation::with_bound(weights, marginal_bound).map(Valuation::Additive)
            }
            ValuationData::Table { m, values, marginal_bound } => {
                TableValuation::with_bound(m, values, marginal_bound).map(Valuation::Table)
            }
            ValuationData::Coverage { universe_size, item_sets, element_weights, marginal_bound } => {
                CoverageValuation::with_bound(universe_size, item_sets, element_weights, marginal_bound)
                    .map(Valuation::Coverage)
            }
        }
    }
}

/// A self-describing instance list: how it was generated plus the full
/// defining data of every oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub family: String,
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub params: FamilyParams,
    pub valuations: Vec<ValuationData>,
}

impl InstanceDocument {
    pub fn new(family: &str, seed: Option<u64>, params: FamilyParams, vals: &[Valuation]) -> Result<Self> {
        let m = common_item_count(vals)?;
        Ok(InstanceDocument {
            family: family.to_owned(),
            seed,
            n: vals.len(),
            m,
            params,
            valuations: vals.iter().map(ValuationData::from_valuation).collect::<Result<_>>()?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_valuations(self) -> Result<Vec<Valuation>> {
        let (n, m) = (self.n, self.m);
        let vals: Vec<Valuation> =
            self.valuations.into_iter().map(ValuationData::into_valuation).collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(Error::input(format!("document declares n = {n} but holds {} valuations", vals.len())));
        }
        if common_item_count(&vals)? != m {
            return Err(Error::input(format!("document declares m = {m} but valuations disagree")));
        }
        Ok(vals)
    }
}
