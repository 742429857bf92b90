//! Class-probability decision tree.
//!
//! Node `(k, ν)` sits at level `k` and horizontal position `ν ∈ 1..=M^k`;
//! child `μ` of `(k, ν)` is `(k + 1, (ν − 1)·M + μ)`. Every node keeps the
//! conditional (normalized) state of each candidate together with the joint
//! probability of that candidate and of reaching the node.

use rayon::prelude::*;

use crate::channel::{Branch, MeasurementStep, StepResult};
use crate::elements::CandidatePool;
use crate::fock::DensityMatrix;

/// Default `Σ_c p_c` below which recursion stops.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-6;
/// Probabilities closer than this are a tie when assigning leaves.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Expanded; carries an optimized setting and `M` children.
    Internal,
    /// Full-depth leaf.
    Leaf,
    /// Cut off because its mass fell below the prune threshold.
    Pruned,
    /// No candidate can reach it.
    Dead,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub level: usize,
    pub position: usize,
    pub states: Vec<Option<DensityMatrix>>,
    pub probs: Vec<f64>,
    pub tau: Option<f64>,
    pub transmission: Option<f64>,
    pub kind: NodeKind,
    pub parent: Option<usize>,
    /// Outcome (1-based) on the edge from the parent.
    pub outcome: Option<usize>,
    pub children: Vec<usize>,
}

impl TreeNode {
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_leaf(&self) -> bool {
        self.kind != NodeKind::Internal
    }

    /// Largest Fock support among reachable candidates.
    pub fn support(&self) -> usize {
        self.states
            .iter()
            .flatten()
            .map(DensityMatrix::support)
            .max()
            .unwrap_or(1)
    }
}

/// Child data produced by one expansion.
#[derive(Clone, Debug)]
pub struct ChildData {
    pub states: Vec<Option<DensityMatrix>>,
    pub probs: Vec<f64>,
}

impl ChildData {
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Expands `node` through `step` at setting `tau` into `M` children with
/// `p_c^(k+1) = p_c^(k) · p(μ | c)`.
pub fn expand(node: &TreeNode, step: &MeasurementStep, tau: f64) -> Vec<ChildData> {
    expand_states(&node.states, &node.probs, step, tau)
}

pub(crate) fn expand_states(
    states: &[Option<DensityMatrix>],
    probs: &[f64],
    step: &MeasurementStep,
    tau: f64,
) -> Vec<ChildData> {
    let m = step.outcomes();
    let support = states
        .iter()
        .flatten()
        .map(DensityMatrix::support)
        .max()
        .unwrap_or(1);
    let ops = step.operators(tau, support);
    let mut children: Vec<ChildData> = (0..m)
        .map(|_| ChildData {
            states: Vec::with_capacity(states.len()),
            probs: Vec::with_capacity(states.len()),
        })
        .collect();
    for (state, &p) in states.iter().zip(probs) {
        match state {
            Some(rho) if p > 0.0 => {
                for (child, res) in children.iter_mut().zip(ops.apply(rho)) {
                    match res {
                        StepResult::Reached { state, prob } => {
                            child.states.push(Some(state));
                            child.probs.push(p * prob);
                        }
                        StepResult::Unreachable { .. } => {
                            child.states.push(None);
                            child.probs.push(0.0);
                        }
                    }
                }
            }
            _ => {
                for child in &mut children {
                    child.states.push(None);
                    child.probs.push(0.0);
                }
            }
        }
    }
    children
}

/// Per-child probabilities `p_c · p(μ | c)` without forming the conditional
/// states; indexed `[μ − 1][c]`.
pub fn child_probabilities(node: &TreeNode, step: &MeasurementStep, tau: f64) -> Vec<Vec<f64>> {
    let ops = step.operators(tau, node.support());
    let mut table = vec![vec![0.0; node.probs.len()]; step.outcomes()];
    for (c, (state, &p)) in node.states.iter().zip(&node.probs).enumerate() {
        if let Some(rho) = state {
            if p > 0.0 {
                for (mu0, q) in ops.probabilities(rho).into_iter().enumerate() {
                    table[mu0][c] = p * q.max(0.0);
                }
            }
        }
    }
    table
}

/// Chooses the setting at an internal node.
pub trait NodeOptimizer: Sync {
    fn choose(&self, node: &TreeNode, step: &MeasurementStep) -> f64;
}

impl<F> NodeOptimizer for F
where
    F: Fn(&TreeNode, &MeasurementStep) -> f64 + Sync,
{
    fn choose(&self, node: &TreeNode, step: &MeasurementStep) -> f64 {
        self(node, step)
    }
}

#[derive(Clone, Debug)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    depth: usize,
    outcomes: usize,
    priors: Vec<f64>,
    steps: Vec<MeasurementStep>,
    prune_threshold: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree depth must be at least 1")]
    EmptySteps,
    #[error("steps disagree on outcome count or dimension")]
    InconsistentSteps,
    #[error("pool dimension {pool} does not match step dimension {step}")]
    DimensionMismatch { pool: usize, step: usize },
}

/// Builds the tree level by level. Each node's setting is fixed by
/// `optimizer` before its children are formed; nodes on the same level are
/// independent and are optimized concurrently, then stored in `ν` order.
pub fn build(
    pool: &CandidatePool,
    steps: &[MeasurementStep],
    optimizer: &dyn NodeOptimizer,
    prune_threshold: f64,
) -> Result<DecisionTree, TreeError> {
    let first = steps.first().ok_or(TreeError::EmptySteps)?;
    let outcomes = first.outcomes();
    if steps.iter().any(|s| s.outcomes() != outcomes || s.dim() != first.dim()) {
        return Err(TreeError::InconsistentSteps);
    }
    if pool.dim() != first.dim() {
        return Err(TreeError::DimensionMismatch {
            pool: pool.dim(),
            step: first.dim(),
        });
    }
    let depth = steps.len();
    let root = TreeNode {
        level: 0,
        position: 1,
        states: pool.states().iter().cloned().map(Some).collect(),
        probs: pool.priors().to_vec(),
        tau: None,
        transmission: None,
        kind: NodeKind::Leaf,
        parent: None,
        outcome: None,
        children: Vec::new(),
    };
    let mut nodes = vec![root];
    let mut frontier = vec![0usize];
    for (level, step) in steps.iter().enumerate() {
        let expandable: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&i| {
                let n = &nodes[i];
                n.kind != NodeKind::Dead && n.mass() >= prune_threshold
            })
            .collect();
        for &i in &frontier {
            if !expandable.contains(&i) && nodes[i].kind != NodeKind::Dead {
                nodes[i].kind = NodeKind::Pruned;
            }
        }
        let expanded: Vec<(f64, Vec<ChildData>)> = expandable
            .par_iter()
            .map(|&i| {
                let node = &nodes[i];
                let tau = optimizer.choose(node, step);
                (tau, expand(node, step, tau))
            })
            .collect();
        let mut next = Vec::new();
        for (&i, (tau, children)) in expandable.iter().zip(expanded) {
            let position = nodes[i].position;
            let mut ids = Vec::with_capacity(outcomes);
            for (mu0, child) in children.into_iter().enumerate() {
                let kind = if child.states.iter().all(Option::is_none) {
                    NodeKind::Dead
                } else {
                    NodeKind::Leaf
                };
                ids.push(nodes.len());
                nodes.push(TreeNode {
                    level: level + 1,
                    position: (position - 1) * outcomes + mu0 + 1,
                    states: child.states,
                    probs: child.probs,
                    tau: None,
                    transmission: None,
                    kind,
                    parent: Some(i),
                    outcome: Some(mu0 + 1),
                    children: Vec::new(),
                });
            }
            let node = &mut nodes[i];
            node.tau = Some(tau);
            node.transmission = Some(step.transmission());
            node.kind = NodeKind::Internal;
            node.children = ids.clone();
            next.extend(ids);
        }
        frontier = next;
    }
    Ok(DecisionTree {
        nodes,
        depth,
        outcomes,
        priors: pool.priors().to_vec(),
        steps: steps.to_vec(),
        prune_threshold,
    })
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn candidates(&self) -> usize {
        self.priors.len()
    }

    pub fn steps(&self) -> &[MeasurementStep] {
        &self.steps
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Internal).count()
    }

    /// Node at `(level, position)`, if it was created.
    pub fn node_at(&self, level: usize, position: usize) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.level == level && n.position == position)
    }

    /// Settings along the path to the full-depth leaf `l`, or `None` when the
    /// path stops early.
    pub fn settings_along(&self, branch: &Branch) -> Option<Vec<f64>> {
        let mut id = 0;
        let mut taus = Vec::with_capacity(branch.len());
        for &mu in branch.outcomes() {
            let node = &self.nodes[id];
            if node.kind != NodeKind::Internal {
                return None;
            }
            taus.push(node.tau?);
            id = node.children[mu - 1];
        }
        Some(taus)
    }
}

/// Joint leaf probabilities `p_c(μ_l)` indexed `[c][l − 1]` over all `M^N`
/// full-depth leaves, with the mass stranded in pruned subtrees reported per
/// candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafTable {
    pub priors: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
    pub pruned: Vec<f64>,
    pub depth: usize,
    pub outcomes: usize,
}

impl LeafTable {
    /// Table with priors taken as the row sums; useful for hand-built tables.
    pub fn from_rows(probs: Vec<Vec<f64>>) -> Self {
        let priors = probs.iter().map(|r| r.iter().sum()).collect();
        let leaves = probs.first().map_or(0, Vec::len);
        Self {
            priors,
            probs,
            pruned: Vec::new(),
            depth: 1,
            outcomes: leaves,
        }
    }

    pub fn candidates(&self) -> usize {
        self.probs.len()
    }

    pub fn leaves(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn leaf_column(&self, leaf0: usize) -> Vec<f64> {
        self.probs.iter().map(|row| row[leaf0]).collect()
    }

    pub fn total_pruned(&self) -> f64 {
        self.pruned.iter().sum()
    }
}

pub fn leaf_distributions(tree: &DecisionTree) -> LeafTable {
    let c = tree.candidates();
    let leaves = tree.outcomes.pow(tree.depth as u32);
    let mut probs = vec![vec![0.0; leaves]; c];
    let mut pruned = vec![0.0; c];
    for node in &tree.nodes {
        match node.kind {
            NodeKind::Leaf if node.level == tree.depth => {
                for (row, &p) in probs.iter_mut().zip(&node.probs) {
                    row[node.position - 1] = p;
                }
            }
            NodeKind::Pruned => {
                for (acc, &p) in pruned.iter_mut().zip(&node.probs) {
                    *acc += p;
                }
            }
            _ => {}
        }
    }
    LeafTable {
        priors: tree.priors.clone(),
        probs,
        pruned,
        depth: tree.depth,
        outcomes: tree.outcomes,
    }
}

/// Maximum-likelihood leaf sets `L_c` (0-based leaf indices). A leaf joins
/// `L_c` only if `p_c` beats every other candidate by more than [`TIE_TOL`];
/// otherwise it is inconclusive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafSets {
    pub sets: Vec<Vec<usize>>,
    pub inconclusive: Vec<usize>,
}

pub fn assign_leaf_sets(table: &LeafTable) -> LeafSets {
    let mut sets = vec![Vec::new(); table.candidates()];
    let mut inconclusive = Vec::new();
    for l in 0..table.leaves() {
        let col = table.leaf_column(l);
        let (best, &max) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one candidate");
        let strict = col.iter().enumerate().all(|(c, &p)| c == best || max - p > TIE_TOL);
        if strict {
            sets[best].push(l);
        } else {
            inconclusive.push(l);
        }
    }
    LeafSets { sets, inconclusive }
}
