//! Experiment configuration, orchestration and artifacts.
//!
//! A config names a candidate pool, a unitary family, a detector with a list
//! of efficiencies, and a list of depths. [`run`] builds one tree per
//! `(N, η)` cell and returns a result row, a feed-forward dump and a leaf
//! histogram for each. [`write_artifacts`] lays these out on disk:
//!
//! ```text
//! <dir>/results.csv
//! <dir>/trees/N<N>_eta<η>.jsonl
//! <dir>/histograms/N<N>_eta<η>.jsonl
//! ```
//!
//! Everything except the `wall_ms` column is a pure function of the config.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Branch, MeasurementStep};
use crate::elements::{
    apd, homodyne_binned, pnrd, qubit_pool, schedule, CandidatePool, DetectorKind, ParamRange, PovmFamily,
    UnitaryFamily, UnitaryKind,
};
use crate::merit::{evaluate_table, InconclusivePolicy, MeritOptions, PairConvention};
use crate::optimize::{
    exhaustive_build, greedy_build, Objective, OptimizeError, RefinePolicy, SearchCost, SweepGrid,
    DEFAULT_EXHAUSTIVE_BUDGET,
};
use crate::tree::{self, leaf_distributions, DecisionTree, LeafTable, NodeKind, TreeNode, DEFAULT_PRUNE_THRESHOLD};

/// Header of the result table.
pub const RESULT_HEADER: &str = "N,eta,detector,unitary,D,R,E,pruned_mass,wall_ms";
/// Significant digits of every printed probability.
pub const PRINT_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    /// Number of evenly spread qubits; mutually exclusive with `states`.
    pub candidates: Option<usize>,
    /// Explicit kets as `[re, im]` amplitude pairs over Fock indices.
    pub states: Option<Vec<Vec<[f64; 2]>>>,
    /// Priors for explicit states; uniform when absent.
    pub priors: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitaryConfig {
    pub kind: UnitaryKind,
    pub range: Option<[f64; 2]>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    #[serde(default = "default_efficiencies")]
    pub efficiencies: Vec<f64>,
    /// Photon-number saturation of a number-resolving detector.
    pub saturation: Option<usize>,
}

fn default_efficiencies() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Greedy,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prune() -> f64 {
    DEFAULT_PRUNE_THRESHOLD
}

fn default_budget() -> u64 {
    DEFAULT_EXHAUSTIVE_BUDGET as u64
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pool: PoolConfig,
    pub unitary: UnitaryConfig,
    pub detector: DetectorConfig,
    pub depths: Vec<usize>,
    /// Fock truncation; defaults to 2 for rotations and 12 for displacements.
    pub fock_dim: Option<usize>,
    #[serde(default = "default_prune")]
    pub prune_threshold: f64,
    #[serde(default)]
    pub refine: RefinePolicy,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_budget")]
    pub exhaustive_budget: u64,
    #[serde(default)]
    pub pair_convention: PairConvention,
    #[serde(default)]
    pub inconclusive: InconclusivePolicy,
    /// Worker threads; all available cores when absent or zero.
    pub threads: Option<usize>,
    /// Write measured cell times; `false` writes 0 so outputs are
    /// byte-identical across runs.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One failed check, tied to the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
    #[error("{0}")]
    Budget(OptimizeError),
    #[error(transparent)]
    Optimize(OptimizeError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Merit(#[from] crate::merit::MeritError),
    #[error("cannot start worker pool: {0}")]
    Threads(String),
    #[error("malformed tree dump line {line}: {message}")]
    Dump { line: usize, message: String },
}

impl From<OptimizeError> for ExperimentError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::BudgetExceeded { .. } => ExperimentError::Budget(e),
            other => ExperimentError::Optimize(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    /// Checks every field and resolves defaults. All problems are reported
    /// at once.
    pub fn validate(&self) -> Result<Experiment, ExperimentError> {
        let mut errs = Vec::new();
        let mut bad = |field: &str, message: String| {
            errs.push(FieldError {
                field: field.to_string(),
                message,
            })
        };

        let kind = self.unitary.kind;
        let dim = self.fock_dim.unwrap_or_else(|| kind.default_dim());
        if dim < 2 {
            bad("fock_dim", format!("must be at least 2, got {dim}"));
        }
        if kind == UnitaryKind::PrintedHadamard {
            log::warn!("printed_hadamard is singular and not a unitary; use it only for comparison");
        }

        let range = match self.unitary.range {
            None => Some(kind.default_range()),
            Some([lo, hi]) => match ParamRange::new(lo, hi) {
                Ok(r) => Some(r),
                Err(e) => {
                    bad("unitary.range", e.to_string());
                    None
                }
            },
        };
        let samples = self.unitary.samples.unwrap_or_else(|| kind.default_samples());
        if samples < 2 {
            bad("unitary.samples", format!("must be at least 2, got {samples}"));
        }

        let pool = match (&self.pool.candidates, &self.pool.states) {
            (Some(_), Some(_)) => {
                bad("pool", "set either `candidates` or `states`, not both".into());
                None
            }
            (None, None) => {
                bad("pool", "set `candidates` or `states`".into());
                None
            }
            (Some(c), None) => {
                if self.pool.priors.is_some() {
                    bad("pool.priors", "only allowed with explicit `states`".into());
                }
                match qubit_pool(*c, dim.max(2)) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        bad("pool.candidates", e.to_string());
                        None
                    }
                }
            }
            (None, Some(states)) => {
                let kets: Vec<Vec<Complex64>> = states
                    .iter()
                    .map(|k| {
                        let mut v: Vec<Complex64> = k.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                        v.resize(dim.max(v.len()), Complex64::new(0.0, 0.0));
                        v
                    })
                    .collect();
                if kets.iter().any(|k| k.len() > dim) {
                    bad("pool.states", format!("a ket is longer than fock_dim = {dim}"));
                    None
                } else {
                    let n = kets.len().max(1);
                    let priors = self.pool.priors.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
                    match CandidatePool::from_kets(&kets, priors) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            bad("pool.states", e.to_string());
                            None
                        }
                    }
                }
            }
        };

        if self.detector.efficiencies.is_empty() {
            bad("detector.efficiencies", "list is empty".into());
        }
        let mut povms = Vec::new();
        for (i, &eta) in self.detector.efficiencies.iter().enumerate() {
            let field = format!("detector.efficiencies[{i}]");
            let made = match self.detector.kind {
                DetectorKind::Apd => apd(eta, dim.max(2)),
                DetectorKind::Pnrd => match self.detector.saturation {
                    Some(ns) => pnrd(eta, ns, dim.max(2)),
                    None => {
                        bad("detector.saturation", "required for a number-resolving detector".into());
                        break;
                    }
                },
                DetectorKind::Homodyne => {
                    if eta != 1.0 {
                        bad(&field, format!("homodyne detection only supports efficiency 1, got {eta}"));
                        continue;
                    }
                    homodyne_binned(dim.max(2))
                }
            };
            match made {
                Ok(p) => povms.push((eta, p)),
                Err(e) => bad(&field, e.to_string()),
            }
        }
        if self.detector.kind != DetectorKind::Pnrd && self.detector.saturation.is_some() {
            bad("detector.saturation", "only meaningful for a number-resolving detector".into());
        }

        if self.depths.is_empty() {
            bad("depths", "list is empty".into());
        }
        for (i, &n) in self.depths.iter().enumerate() {
            if n == 0 {
                bad(&format!("depths[{i}]"), "depth must be at least 1".into());
            }
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            bad("prune_threshold", format!("must lie in [0, 1), got {}", self.prune_threshold));
        }
        if !(self.refine.rel_improvement_floor >= 0.0) {
            bad("refine.rel_improvement_floor", "must be non-negative".into());
        }
        if let Some(p) = &pool {
            if let Err(e) = self.objective.check(p.len()) {
                bad("objective", e.to_string());
            }
        }

        if !errs.is_empty() {
            return Err(ExperimentError::Invalid(errs));
        }
        let (pool, range) = (pool.expect("checked"), range.expect("checked"));
        Ok(Experiment {
            config: self.clone(),
            pool,
            unitary: UnitaryFamily::new(kind, range, dim).expect("dimension checked"),
            grid: SweepGrid::new(range, samples).expect("samples checked"),
            povms,
        })
    }
}

/// A validated config with every default resolved.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub pool: CandidatePool,
    pub unitary: UnitaryFamily,
    pub grid: SweepGrid,
    /// `(η, POVM)` in config order.
    pub povms: Vec<(f64, PovmFamily)>,
}

impl Experiment {
    pub fn outcomes(&self) -> usize {
        self.povms.first().map_or(0, |(_, p)| p.outcomes())
    }

    /// The measurement chain for depth `n` at the given detector.
    pub fn steps(&self, n: usize, povm: &PovmFamily) -> Vec<MeasurementStep> {
        schedule(n)
            .expect("depth checked")
            .transmissions()
            .iter()
            .map(|&t| MeasurementStep::new(self.unitary.clone(), povm.clone(), t).expect("validated elements"))
            .collect()
    }

    /// Exhaustive search cost for every configured depth.
    pub fn costs(&self) -> Vec<SearchCost> {
        self.config
            .depths
            .iter()
            .map(|&n| SearchCost::new(n, self.outcomes(), self.grid.samples()))
            .collect()
    }

    fn merit_options(&self) -> MeritOptions {
        MeritOptions {
            pairs: self.config.pair_convention,
            inconclusive: self.config.inconclusive,
        }
    }

    fn build(&self, steps: &[MeasurementStep]) -> Result<DecisionTree, OptimizeError> {
        let c = &self.config;
        match c.optimizer {
            OptimizerKind::Greedy => {
                greedy_build(&self.pool, steps, &self.grid, &c.refine, c.objective, c.prune_threshold)
            }
            OptimizerKind::Exhaustive => exhaustive_build(
                &self.pool,
                steps,
                &self.grid,
                c.objective,
                c.prune_threshold,
                c.exhaustive_budget as u128,
            )
            .map(|r| r.tree),
        }
    }
}

/// One line of the result table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub depth: usize,
    pub eta: f64,
    pub detector: DetectorKind,
    pub unitary: UnitaryKind,
    pub d: f64,
    pub r: Option<f64>,
    pub e: Option<f64>,
    pub pruned_mass: f64,
    pub wall_ms: u128,
}

/// Rounds to [`PRINT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", PRINT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn fmt_prob(x: f64) -> String {
    format!("{:?}", round_sig(x))
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_prob).unwrap_or_default();
        format!(
            "{},{:?},{},{},{},{},{},{},{}",
            self.depth,
            self.eta,
            self.detector,
            self.unitary,
            fmt_prob(self.d),
            opt(self.r),
            opt(self.e),
            fmt_prob(self.pruned_mass),
            self.wall_ms
        )
    }
}

/// One node of a feed-forward dump. Lines are ordered by `(k, nu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub k: usize,
    pub nu: usize,
    /// `internal`, `leaf`, `pruned` or `dead`.
    pub kind: String,
    /// Setting at this node, full precision.
    pub tau: Option<f64>,
    /// Beam-splitter transmission at this node.
    pub t: Option<f64>,
    /// Joint probability of each candidate reaching this node.
    pub probs: Vec<f64>,
    /// `ν` of the parent (on level `k − 1`).
    pub parent: Option<usize>,
    /// Outcome on the edge from the parent, 0-based.
    pub outcome: Option<usize>,
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Internal => "internal",
        NodeKind::Leaf => "leaf",
        NodeKind::Pruned => "pruned",
        NodeKind::Dead => "dead",
    }
}

pub fn dump_tree(tree: &DecisionTree) -> Vec<TreeRecord> {
    let nodes = tree.nodes();
    let mut records: Vec<TreeRecord> = nodes
        .iter()
        .map(|n| TreeRecord {
            k: n.level,
            nu: n.position,
            kind: kind_name(n.kind).to_string(),
            tau: n.tau,
            t: n.transmission,
            probs: n.probs.iter().copied().map(round_sig).collect(),
            parent: n.parent.map(|p| nodes[p].position),
            outcome: n.outcome.map(|mu| mu - 1),
        })
        .collect();
    records.sort_by_key(|r| (r.k, r.nu));
    records
}

/// One full-depth leaf of a histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    /// 1-based leaf index.
    pub l: usize,
    /// Outcome sequence, 0-based digits.
    pub outcomes: String,
    /// Joint probability of each candidate at this leaf.
    pub probs: Vec<f64>,
}

pub fn emit_histogram(table: &LeafTable) -> Vec<HistogramRow> {
    (0..table.leaves())
        .map(|l0| HistogramRow {
            l: l0 + 1,
            outcomes: Branch::from_leaf_index(l0 + 1, table.depth, table.outcomes).label(),
            probs: table.leaf_column(l0).into_iter().map(round_sig).collect(),
        })
        .collect()
}

/// Everything produced for one `(N, η)` cell.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub row: ResultRow,
    pub tree: DecisionTree,
    pub table: LeafTable,
}

impl CellOutput {
    pub fn file_stem(&self) -> String {
        format!("N{}_eta{:?}", self.row.depth, self.row.eta)
    }
}

/// Builds and scores every cell, depth-major then in efficiency order.
/// Cells run concurrently on a pool of `threads` workers.
pub fn run(exp: &Experiment) -> Result<Vec<CellOutput>, ExperimentError> {
    let cells: Vec<(usize, usize)> = exp
        .config
        .depths
        .iter()
        .flat_map(|&n| (0..exp.povms.len()).map(move |i| (n, i)))
        .collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(n, i)| run_cell(exp, n, i))
            .collect::<Result<Vec<_>, ExperimentError>>()
    };
    match exp.config.threads.filter(|&t| t > 0) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| ExperimentError::Threads(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn run_cell(exp: &Experiment, n: usize, povm_index: usize) -> Result<CellOutput, ExperimentError> {
    let (eta, povm) = &exp.povms[povm_index];
    let start = Instant::now();
    let steps = exp.steps(n, povm);
    let tree = exp.build(&steps)?;
    let table = leaf_distributions(&tree);
    let report = evaluate_table(&table, exp.merit_options())?;
    let wall_ms = if exp.config.record_wall_time {
        start.elapsed().as_millis()
    } else {
        0
    };
    log::info!("N={n} eta={eta}: D={:.6} in {wall_ms} ms", report.d);
    Ok(CellOutput {
        row: ResultRow {
            depth: n,
            eta: *eta,
            detector: povm.kind(),
            unitary: exp.unitary.kind(),
            d: report.d,
            r: report.r,
            e: report.e,
            pruned_mass: report.pruned_mass,
            wall_ms,
        },
        tree,
        table,
    })
}

pub fn results_csv(cells: &[CellOutput]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&c.row.to_csv());
        out.push('\n');
    }
    out
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("plain data serializes") + "\n")
        .collect()
}

pub fn tree_jsonl(tree: &DecisionTree) -> String {
    jsonl(&dump_tree(tree))
}

pub fn histogram_jsonl(table: &LeafTable) -> String {
    jsonl(&emit_histogram(table))
}

/// Writes the result table, tree dumps and histograms under `dir`.
pub fn write_artifacts(dir: &Path, cells: &[CellOutput]) -> Result<(), ExperimentError> {
    let trees = dir.join("trees");
    let hists = dir.join("histograms");
    for d in [dir, &trees, &hists] {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let path = dir.join("results.csv");
    std::fs::write(&path, results_csv(cells)).map_err(io_err(&path))?;
    for cell in cells {
        let path = trees.join(format!("{}.jsonl", cell.file_stem()));
        std::fs::write(&path, tree_jsonl(&cell.tree)).map_err(io_err(&path))?;
        let path = hists.join(format!("{}.jsonl", cell.file_stem()));
        std::fs::write(&path, histogram_jsonl(&cell.table)).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_tree_dump(reader: impl BufRead) -> Result<Vec<TreeRecord>, ExperimentError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ExperimentError::Dump {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ExperimentError::Dump {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_tree_dump(mut w: impl Write, tree: &DecisionTree) -> std::io::Result<()> {
    w.write_all(tree_jsonl(tree).as_bytes())
}

/// Rebuilds a tree from the settings in a dump, propagating the candidate
/// states again through `steps`.
pub fn replay(
    records: &[TreeRecord],
    pool: &CandidatePool,
    steps: &[MeasurementStep],
    prune_threshold: f64,
) -> Result<DecisionTree, ExperimentError> {
    let settings: HashMap<(usize, usize), f64> =
        records.iter().filter_map(|r| r.tau.map(|t| ((r.k, r.nu), t))).collect();
    let lookup = move |node: &TreeNode, _: &MeasurementStep| {
        settings.get(&(node.level, node.position)).copied().unwrap_or(0.0)
    };
    tree::build(pool, steps, &lookup, prune_threshold).map_err(|e| ExperimentError::Optimize(e.into()))
}
