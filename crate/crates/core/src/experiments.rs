//! Seeded end-to-end runs, parameter sweeps and CSV output.
//!
//! Every cell derives its instance, search and rounding seeds from the cell
//! seed alone, so a record is reproducible from its config echo.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{disc_of_coloring, disc_opt_bruteforce, transfer_disc_of_coloring, vprime_transform};
use crate::rng::derive_seed;
use crate::rounding::{round_best_of, RoundingReport, DEFAULT_TRIALS};
use crate::splitter::{split_necklace, NecklaceLayout, SearchConfig, SplitReport};
use crate::subsidy::{envy_free_with_subsidy, SubsidyReport};
use crate::valuations::{random_instance, Family, FamilyParams, InstanceDocument, TableValuation, Valuation};

/// Family tag that loads the instance from `instance_path`.
pub const FILE_FAMILY: &str = "file";

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 16] = [
    "command",
    "family",
    "n",
    "m",
    "k",
    "seed",
    "trials",
    "restarts",
    "tol",
    "imbalance",
    "realized_disc",
    "bound_predicted",
    "transfer_disc",
    "total_subsidy",
    "converged",
    "wall_time_ms",
];

const SEARCH_STREAM: u64 = 1;
const ROUNDING_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fractional split only.
    Split,
    /// Split, then best-of-`trials` rounding.
    Round,
    /// Exact optimum by enumeration.
    Disc,
    /// Pipeline on the signed transfer oracles; reports transfer-discrepancy.
    Transfer,
    /// Pipeline with `k = n`, then envy-free payments.
    Subsidy,
    /// Grid over `sweep`, running `sweep.command` in every cell.
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Split, Command::Round, Command::Disc, Command::Transfer, Command::Subsidy, Command::Sweep];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Split => "split",
            Command::Round => "round",
            Command::Disc => "disc",
            Command::Transfer => "transfer",
            Command::Subsidy => "subsidy",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| Error::input(format!("unknown command '{s}'")))
    }
}

/// Cartesian grid; cells are visited with `n` outermost, then `k`, `m`, `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub command: Command,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { command: Command::Round, n: vec![2], k: vec![2], m: vec![8], seeds: vec![0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// A [`Family`] tag or `"file"`.
    pub family: String,
    pub seed: u64,
    pub trials: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// CSV destination; `None` skips writing.
    pub output_path: Option<PathBuf>,
    /// Instance document for `family = "file"`.
    pub instance_path: Option<PathBuf>,
    /// Directory for per-record JSON reports.
    pub audit_dir: Option<PathBuf>,
    /// Concurrent sweep cells.
    pub workers: usize,
    /// Record wall time; off by default so output bytes depend only on the config.
    pub timing: bool,
    pub family_params: FamilyParams,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        ExperimentConfig {
            command: Command::Round,
            n: 2,
            m: 8,
            k: 2,
            family: Family::Coverage.as_str().to_owned(),
            seed: 0,
            trials: DEFAULT_TRIALS,
            restarts: search.restarts,
            tol: search.tol,
            max_iters: search.max_iters,
            output_path: None,
            instance_path: None,
            audit_dir: None,
            workers: 1,
            timing: false,
            family_params: FamilyParams::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n", self.n),
            ("m", self.m),
            ("k", self.k),
            ("trials", self.trials),
            ("restarts", self.restarts),
            ("max_iters", self.max_iters),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(Error::input(format!("{name} must be at least 1")));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::input(format!("tol must be positive, got {}", self.tol)));
        }
        if self.family == FILE_FAMILY {
            if self.instance_path.is_none() {
                return Err(Error::input("family = \"file\" needs instance_path"));
            }
        } else {
            self.family.parse::<Family>()?;
        }
        if self.command == Command::Sweep {
            let g = &self.sweep;
            if g.command == Command::Sweep {
                return Err(Error::input("sweep cells cannot themselves be sweeps"));
            }
            if self.family == FILE_FAMILY {
                return Err(Error::input("sweeps need a random family, not \"file\""));
            }
            for (name, axis) in [("n", &g.n), ("k", &g.k), ("m", &g.m)] {
                if axis.is_empty() || axis.contains(&0) {
                    return Err(Error::input(format!("sweep axis {name} must be non-empty with entries at least 1")));
                }
            }
            if g.seeds.is_empty() {
                return Err(Error::input("sweep needs at least one seed"));
            }
        }
        Ok(())
    }

    fn search(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            restarts: self.restarts,
            tol: self.tol,
            max_iters: self.max_iters,
            seed: derive_seed(seed, SEARCH_STREAM),
            ..SearchConfig::default()
        }
    }

    /// The single-run configs of a sweep, in grid order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        if self.command != Command::Sweep {
            return vec![self.clone()];
        }
        let g = &self.sweep;
        let mut out = Vec::new();
        for &n in &g.n {
            for &k in &g.k {
                for &m in &g.m {
                    for &seed in &g.seeds {
                        out.push(ExperimentConfig { command: g.command, n, k, m, seed, ..self.clone() });
                    }
                }
            }
        }
        out
    }
}

/// One CSV row. Metrics a command does not produce are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: Command,
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub trials: usize,
    pub restarts: usize,
    pub tol: f64,
    pub imbalance: Option<f64>,
    pub realized_disc: Option<f64>,
    pub bound_predicted: Option<f64>,
    pub transfer_disc: Option<f64>,
    pub total_subsidy: Option<f64>,
    pub converged: bool,
    pub wall_time_ms: u64,
}

impl ResultRecord {
    fn echo(cfg: &ExperimentConfig, n: usize, m: usize, k: usize) -> Self {
        ResultRecord {
            command: cfg.command,
            family: cfg.family.clone(),
            n,
            m,
            k,
            seed: cfg.seed,
            trials: cfg.trials,
            restarts: cfg.restarts,
            tol: cfg.tol,
            imbalance: None,
            realized_disc: None,
            bound_predicted: None,
            transfer_disc: None,
            total_subsidy: None,
            converged: true,
            wall_time_ms: 0,
        }
    }
}

/// Everything a pipeline run produced; written to the audit directory.
#[derive(Clone, Debug, Serialize)]
pub struct AuditDocument {
    pub config: ExperimentConfig,
    pub record: ResultRecord,
    pub split: Option<SplitReport>,
    pub rounding: Option<RoundingReport>,
    pub subsidy: Option<SubsidyReport>,
    pub optimum_coloring: Option<Vec<usize>>,
}

/// Split with the identity necklace layout, then round.
pub fn pipeline(
    vals: &[Valuation],
    k: usize,
    search: &SearchConfig,
    trials: usize,
    rounding_seed: u64,
) -> Result<(SplitReport, RoundingReport)> {
    let m = crate::valuations::common_item_count(vals)?;
    let split = split_necklace(vals, k, &NecklaceLayout::identity(m), search)?;
    let rounding = round_best_of(vals, &split.coloring, trials, rounding_seed)?;
    Ok((split, rounding))
}

fn instance(cfg: &ExperimentConfig) -> Result<Vec<Valuation>> {
    if cfg.family == FILE_FAMILY {
        let path = cfg.instance_path.as_ref().ok_or_else(|| Error::input("family = \"file\" needs instance_path"))?;
        let doc = InstanceDocument::from_json(&fs::read_to_string(path)?)?;
        return doc.into_valuations();
    }
    random_instance(cfg.family.parse()?, cfg.n, cfg.m, cfg.seed, &cfg.family_params)
}

fn with_cell<T>(cfg: &ExperimentConfig, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        let cell = format!(
            "{} (family={}, n={}, m={}, k={}, seed={})",
            cfg.command, cfg.family, cfg.n, cfg.m, cfg.k, cfg.seed
        );
        match e {
            Error::Input(s) => Error::Input(format!("{cell}: {s}")),
            Error::Capacity(s) => Error::Capacity(format!("{cell}: {s}")),
            Error::Invariant(s) => Error::Invariant(format!("{cell}: {s}")),
            Error::Parse(s) => Error::Parse(format!("{cell}: {s}")),
            io @ Error::Io(_) => io,
        }
    })
}

/// Runs one non-sweep cell.
pub fn run_cell(cfg: &ExperimentConfig) -> Result<(ResultRecord, AuditDocument)> {
    with_cell(cfg, run_cell_inner(cfg))
}

fn run_cell_inner(cfg: &ExperimentConfig) -> Result<(ResultRecord, AuditDocument)> {
    let start = Instant::now();
    let vals = instance(cfg)?;
    let n = vals.len();
    let m = crate::valuations::common_item_count(&vals)?;
    let k = if cfg.command == Command::Subsidy { n } else { cfg.k };
    let mut rec = ResultRecord::echo(cfg, n, m, k);
    let mut audit = AuditDocument {
        config: cfg.clone(),
        record: rec.clone(),
        split: None,
        rounding: None,
        subsidy: None,
        optimum_coloring: None,
    };
    let search = cfg.search(cfg.seed);
    let rounding_seed = derive_seed(cfg.seed, ROUNDING_STREAM);
    match cfg.command {
        Command::Split => {
            let split = split_necklace(&vals, k, &NecklaceLayout::identity(m), &search)?;
            rec.imbalance = Some(split.imbalance);
            rec.converged = split.converged;
            audit.split = Some(split);
        }
        Command::Round => {
            let (split, rounding) = pipeline(&vals, k, &search, cfg.trials, rounding_seed)?;
            rec.imbalance = Some(split.imbalance);
            rec.converged = split.converged;
            rec.realized_disc = Some(rounding.realized_disc);
            rec.bound_predicted = Some(rounding.bound_predicted);
            audit.split = Some(split);
            audit.rounding = Some(rounding);
        }
        Command::Disc => {
            let (opt, coloring) = disc_opt_bruteforce(&vals, k)?;
            rec.realized_disc = Some(opt.value);
            audit.optimum_coloring = Some(coloring.colors().to_vec());
        }
        Command::Transfer => {
            let primes = vals
                .iter()
                .map(|v| {
                    let vp = vprime_transform(Arc::new(v.clone()))?;
                    Ok(Valuation::Table(TableValuation::tabulate(&vp)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let (split, rounding) = pipeline(&primes, k, &search, cfg.trials, rounding_seed)?;
            let t = transfer_disc_of_coloring(&vals, &rounding.coloring)?;
            rec.imbalance = Some(split.imbalance);
            rec.converged = split.converged;
            rec.realized_disc = Some(rounding.realized_disc);
            rec.bound_predicted = Some(rounding.bound_predicted);
            rec.transfer_disc = Some(t.value);
            audit.split = Some(split);
            audit.rounding = Some(rounding);
        }
        Command::Subsidy => {
            let (split, rounding) = pipeline(&vals, k, &search, cfg.trials, rounding_seed)?;
            let report = envy_free_with_subsidy(&vals, &rounding.coloring)?;
            rec.imbalance = Some(split.imbalance);
            rec.converged = split.converged;
            rec.realized_disc = Some(disc_of_coloring(&vals, &rounding.coloring)?.value);
            rec.bound_predicted = Some(rounding.bound_predicted);
            rec.total_subsidy = Some(report.total_subsidy);
            audit.split = Some(split);
            audit.rounding = Some(rounding);
            audit.subsidy = Some(report);
        }
        Command::Sweep => return Err(Error::input("run_cell takes a single cell, not a sweep")),
    }
    if cfg.timing {
        rec.wall_time_ms = start.elapsed().as_millis() as u64;
    }
    audit.record = rec.clone();
    Ok((rec, audit))
}

/// Writes records as CSV with the fixed header.
pub fn write_csv<W: Write>(out: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn audit_name(r: &ResultRecord) -> String {
    format!("{}_{}_n{}_m{}_k{}_s{}.json", r.command, r.family, r.n, r.m, r.k, r.seed)
}

/// Executes `cfg`, streaming CSV rows to `output_path` in grid order.
///
/// Sweep cells run `workers` at a time. A non-converged split is recorded, not
/// dropped; any error aborts the run.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::input(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let mut writer = match &cfg.output_path {
        Some(p) => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(p)?;
            w.write_record(CSV_COLUMNS)?;
            Some(w)
        }
        None => None,
    };
    if let Some(dir) = &cfg.audit_dir {
        fs::create_dir_all(dir)?;
    }
    let mut records = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(cfg.workers) {
        let done: Vec<Result<(ResultRecord, AuditDocument)>> =
            pool.install(|| chunk.par_iter().map(run_cell).collect());
        for res in done {
            let (rec, audit) = res?;
            if let Some(w) = writer.as_mut() {
                w.serialize(&rec)?;
                w.flush()?;
            }
            if let Some(dir) = &cfg.audit_dir {
                fs::write(dir.join(audit_name(&rec)), serde_json::to_string_pretty(&audit)?)?;
            }
            records.push(rec);
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Scaling fits

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `realized_disc ~ C sqrt(n ln(nk))`.
    SqrtNLogNK,
    /// `total_subsidy ~ C n sqrt(n ln n)`.
    NSqrtNLogN,
}

impl ScalingModel {
    pub fn curve(self, n: usize, k: usize) -> f64 {
        let n = n as f64;
        match self {
            ScalingModel::SqrtNLogNK => (n * (n * k as f64).ln()).sqrt(),
            ScalingModel::NSqrtNLogN => n * (n * n.ln()).sqrt(),
        }
    }

    fn metric(self, r: &ResultRecord) -> Option<f64> {
        match self {
            ScalingModel::SqrtNLogNK => r.realized_disc,
            ScalingModel::NSqrtNLogN => r.total_subsidy,
        }
    }
}

impl FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt-nlog-nk" => Ok(ScalingModel::SqrtNLogNK),
            "n-sqrt-nlogn" => Ok(ScalingModel::NSqrtNLogN),
            _ => Err(Error::input(format!("unknown scaling model '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: usize,
    pub k: usize,
    pub mean: f64,
    pub fitted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Least-squares `C` in `mean ~ C f(n, k)`.
    pub coefficient: f64,
    /// `max |mean - C f| / (C f)` over `(n, k)` groups; 0 when both are 0.
    pub residual: f64,
    pub points: Vec<FitPoint>,
}

/// Fits per-`(n, k)` means of the model's metric to `C f(n, k)`. Records
/// without the metric are skipped.
pub fn fit_scaling(records: &[ResultRecord], model: ScalingModel) -> Result<ScalingFit> {
    let mut groups: Vec<((usize, usize), f64, usize)> = Vec::new();
    for r in records {
        let Some(y) = model.metric(r) else { continue };
        match groups.iter_mut().find(|g| g.0 == (r.n, r.k)) {
            Some(g) => {
                g.1 += y;
                g.2 += 1;
            }
            None => groups.push(((r.n, r.k), y, 1)),
        }
    }
    groups.sort_by_key(|g| g.0);
    let mut ns: Vec<usize> = groups.iter().map(|g| g.0 .0).collect();
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::input(format!("scaling fit needs at least 4 distinct n, got {}", ns.len())));
    }
    let pts: Vec<(usize, usize, f64, f64)> =
        groups.iter().map(|&((n, k), s, c)| (n, k, s / c as f64, model.curve(n, k))).collect();
    let sff: f64 = pts.iter().map(|p| p.3 * p.3).sum();
    let syf: f64 = pts.iter().map(|p| p.2 * p.3).sum();
    let coefficient = if sff > 0.0 { syf / sff } else { 0.0 };
    let mut residual = 0.0f64;
    let points = pts
        .iter()
        .map(|&(n, k, mean, f)| {
            let fitted = coefficient * f;
            let err = (mean - fitted).abs();
            let rel = if err == 0.0 {
                0.0
            } else if fitted == 0.0 {
                f64::INFINITY
            } else {
                err / fitted.abs()
            };
            residual = residual.max(rel);
            FitPoint { n, k, mean, fitted }
        })
        .collect();
    Ok(ScalingFit { coefficient, residual, points })
}
