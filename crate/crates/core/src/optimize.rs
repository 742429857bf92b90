//! Parameter search over the per-node setting `τ`.
//!
//! The greedy builder sweeps a grid at every node, scoring the `M`
//! hypothetical children, and refines the grid until the score settles. The
//! exhaustive builder enumerates every assignment of grid points to internal
//! nodes and keeps the best final score; it is only practical for tiny trees
//! and exists as an oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::MeasurementStep;
use crate::elements::{CandidatePool, ParamRange};
use crate::merit::{discrimination_error, distinguishability, min_to_max, InconclusivePolicy, PairConvention};
use crate::tree::{self, child_probabilities, leaf_distributions, DecisionTree, LeafTable, TreeError, TreeNode};

/// Scores closer than this are considered equal.
pub const SCORE_TIE_TOL: f64 = 1e-12;
/// Default ceiling on the number of assignments the exhaustive search visits.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u128 = 1_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("grid needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("objective {objective} needs exactly two candidates, got {candidates}")]
    ObjectiveNeedsTwo { objective: Objective, candidates: usize },
    #[error("exhaustive search needs {cost} combinations, above the budget of {budget}")]
    BudgetExceeded { cost: SearchCost, budget: u128 },
    #[error("assignment has {got} settings, tree has {expected} internal nodes")]
    AssignmentLength { got: usize, expected: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// `samples` equidistant points on `range`, both endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepGrid {
    range: ParamRange,
    samples: usize,
}

impl SweepGrid {
    pub fn new(range: ParamRange, samples: usize) -> Result<Self, OptimizeError> {
        if samples < 2 {
            return Err(OptimizeError::TooFewSamples(samples));
        }
        Ok(Self { range, samples })
    }

    pub fn range(&self) -> ParamRange {
        self.range
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.range.width() / (self.samples - 1) as f64
    }

    /// Point `i`. Computed from the fraction `i / (S − 1)` so that a refined
    /// grid reproduces the coarse points bit for bit.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.samples {
            return self.range.hi;
        }
        self.range.lo + self.range.width() * (i as f64 / (self.samples - 1) as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.point(i)).collect()
    }

    /// The grid with every interval halved (`S → 2S − 1`); it contains all
    /// current points.
    pub fn refined(&self) -> Self {
        Self {
            range: self.range,
            samples: 2 * self.samples - 1,
        }
    }
}

/// When to stop refining.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinePolicy {
    pub max_rounds: usize,
    pub rel_improvement_floor: f64,
    /// Consecutive rounds below the floor needed to stop early.
    pub patience: usize,
}

impl Default for RefinePolicy {
    fn default() -> Self {
        Self {
            max_rounds: 5,
            rel_improvement_floor: 1e-4,
            patience: 3,
        }
    }
}

/// The quantity maximized. `R` and `E` are minimized by maximizing their
/// negation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Distinguishability,
    MinToMax,
    Error,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Distinguishability => "distinguishability",
            Objective::MinToMax => "min_to_max",
            Objective::Error => "error",
        })
    }
}

impl Objective {
    pub fn check(self, candidates: usize) -> Result<(), OptimizeError> {
        if self != Objective::Distinguishability && candidates != 2 {
            return Err(OptimizeError::ObjectiveNeedsTwo {
                objective: self,
                candidates,
            });
        }
        Ok(())
    }

    /// Best value the score can take.
    pub fn ceiling(self) -> f64 {
        match self {
            Objective::Distinguishability => 1.0,
            Objective::MinToMax | Objective::Error => 0.0,
        }
    }

    /// Score of a leaf table (larger is better). Tables with the wrong
    /// candidate count score `-inf`; [`Objective::check`] rejects them up
    /// front.
    pub fn score(self, table: &LeafTable) -> f64 {
        let r = match self {
            Objective::Distinguishability => distinguishability(table, PairConvention::Ordered),
            Objective::MinToMax => min_to_max(table).map(|r| -r),
            Objective::Error => discrimination_error(table, InconclusivePolicy::CountAsError).map(|e| -e),
        };
        r.unwrap_or(f64::NEG_INFINITY)
    }

    /// One-step score of a node: the children's joint probabilities divided
    /// by the node mass, weighted by the pool priors.
    pub fn score_children(self, children: &[Vec<f64>], priors: &[f64], mass: f64) -> f64 {
        let scale = if mass > 0.0 { 1.0 / mass } else { 0.0 };
        let probs = (0..priors.len())
            .map(|c| children.iter().map(|col| col[c] * scale).collect())
            .collect();
        self.score(&LeafTable {
            priors: priors.to_vec(),
            probs,
            pruned: Vec::new(),
            depth: 1,
            outcomes: children.len(),
        })
    }
}

/// Total order used to pick the winner: higher score, then smaller `|τ|`,
/// then smaller `τ`. Scores and magnitudes within tolerance compare equal.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    let (ta, sa) = a;
    let (tb, sb) = b;
    if (sa - sb).abs() > SCORE_TIE_TOL {
        return sa > sb;
    }
    let (ma, mb) = (ta.abs(), tb.abs());
    if (ma - mb).abs() > SCORE_TIE_TOL * ma.max(mb).max(1.0) {
        return ma < mb;
    }
    ta < tb
}

fn pick(scored: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    let mut iter = scored.into_iter();
    let mut best = iter.next().expect("grid is never empty");
    for cand in iter {
        if better(cand, best) {
            best = cand;
        }
    }
    best
}

/// Scores every grid point concurrently and reduces them in grid order.
pub fn sweep_node(
    node: &TreeNode,
    step: &MeasurementStep,
    grid: &SweepGrid,
    objective: Objective,
    priors: &[f64],
) -> (f64, f64) {
    let mass = node.mass();
    let scored: Vec<(f64, f64)> = grid
        .points()
        .into_par_iter()
        .map(|tau| {
            let children = child_probabilities(node, step, tau);
            (tau, objective.score_children(&children, priors, mass))
        })
        .collect();
    pick(scored)
}

/// Sweeps, then keeps halving the grid spacing. Stops after
/// `policy.max_rounds`, or once the relative gain has stayed below the floor
/// for `policy.patience` rounds in a row (one round if the score already
/// sits at the objective's ceiling). A single flat round is not trusted: when
/// the optimum sits at an odd multiple of 1/2ᵐ of the coarse spacing the
/// halved grids straddle it symmetrically for `m − 1` rounds.
pub fn refine(
    node: &TreeNode,
    step: &MeasurementStep,
    grid: &SweepGrid,
    policy: &RefinePolicy,
    objective: Objective,
    priors: &[f64],
) -> (f64, f64) {
    let mut best = sweep_node(node, step, grid, objective, priors);
    let mut current = *grid;
    let mut flat_rounds = 0;
    for _ in 0..policy.max_rounds {
        current = current.refined();
        let next = sweep_node(node, step, &current, objective, priors);
        let gain = (next.1 - best.1) / best.1.abs().max(f64::MIN_POSITIVE);
        if better(next, best) {
            best = next;
        }
        if gain < policy.rel_improvement_floor {
            flat_rounds += 1;
            let saturated = (objective.ceiling() - best.1).abs() <= SCORE_TIE_TOL;
            if saturated || flat_rounds >= policy.patience.max(1) {
                break;
            }
        } else {
            flat_rounds = 0;
        }
    }
    best
}

/// Settings chosen node by node with [`refine`].
pub fn greedy_build(
    pool: &CandidatePool,
    steps: &[MeasurementStep],
    grid: &SweepGrid,
    policy: &RefinePolicy,
    objective: Objective,
    prune_threshold: f64,
) -> Result<DecisionTree, OptimizeError> {
    objective.check(pool.len())?;
    let priors = pool.priors().to_vec();
    let optimizer =
        move |node: &TreeNode, step: &MeasurementStep| refine(node, step, grid, policy, objective, &priors).0;
    Ok(tree::build(pool, steps, &optimizer, prune_threshold)?)
}

/// Number of internal nodes `(M^N − 1)/(M − 1)` and the resulting count of
/// exhaustive combinations `S^{internal}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchCost {
    pub depth: usize,
    pub outcomes: usize,
    pub samples: usize,
    pub internal_nodes: u128,
    /// `None` when the count overflows 128 bits.
    pub combinations: Option<u128>,
}

impl SearchCost {
    pub fn new(depth: usize, outcomes: usize, samples: usize) -> Self {
        let internal_nodes = (0..depth as u32)
            .try_fold(0u128, |acc, k| (outcomes as u128).checked_pow(k).and_then(|p| acc.checked_add(p)))
            .unwrap_or(u128::MAX);
        let combinations = u32::try_from(internal_nodes)
            .ok()
            .and_then(|n| (samples as u128).checked_pow(n));
        Self {
            depth,
            outcomes,
            samples,
            internal_nodes,
            combinations,
        }
    }

    /// `log10` of the combination count; finite even when it overflows.
    pub fn log10(&self) -> f64 {
        self.internal_nodes as f64 * (self.samples as f64).log10()
    }

    pub fn within(&self, budget: u128) -> bool {
        self.combinations.is_some_and(|c| c <= budget)
    }
}

impl std::fmt::Display for SearchCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.combinations {
            Some(c) => write!(f, "{c}"),
            None => write!(f, "10^{:.1}", self.log10()),
        }
    }
}

/// Settings looked up by node position; internal nodes are numbered in
/// breadth-first order (level, then `ν`).
#[derive(Clone, Debug, PartialEq)]
pub struct FixedAssignment {
    outcomes: usize,
    taus: Vec<f64>,
}

impl FixedAssignment {
    pub fn new(outcomes: usize, depth: usize, taus: Vec<f64>) -> Result<Self, OptimizeError> {
        let expected = SearchCost::new(depth, outcomes, 1).internal_nodes as usize;
        if taus.len() != expected {
            return Err(OptimizeError::AssignmentLength {
                got: taus.len(),
                expected,
            });
        }
        Ok(Self { outcomes, taus })
    }

    pub fn index(&self, level: usize, position: usize) -> usize {
        let before: usize = (0..level).map(|k| self.outcomes.pow(k as u32)).sum();
        before + position - 1
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }
}

impl tree::NodeOptimizer for FixedAssignment {
    fn choose(&self, node: &TreeNode, _step: &MeasurementStep) -> f64 {
        self.taus[self.index(node.level, node.position)]
    }
}

/// Builds the tree for a fixed assignment and scores its leaves.
pub fn evaluate_assignment(
    pool: &CandidatePool,
    steps: &[MeasurementStep],
    assignment: &FixedAssignment,
    objective: Objective,
    prune_threshold: f64,
) -> Result<(DecisionTree, f64), OptimizeError> {
    let tree = tree::build(pool, steps, assignment, prune_threshold)?;
    let score = objective.score(&leaf_distributions(&tree));
    Ok((tree, score))
}

/// The best assignment found by [`exhaustive_build`].
#[derive(Clone, Debug)]
pub struct ExhaustiveResult {
    pub tree: DecisionTree,
    pub assignment: FixedAssignment,
    pub score: f64,
    pub cost: SearchCost,
}

/// Visits every assignment of grid points to internal nodes and keeps the
/// one with the best final leaf score. Exact score ties go to the
/// lexicographically first assignment. Refuses when the combination count
/// exceeds `budget`.
pub fn exhaustive_build(
    pool: &CandidatePool,
    steps: &[MeasurementStep],
    grid: &SweepGrid,
    objective: Objective,
    prune_threshold: f64,
    budget: u128,
) -> Result<ExhaustiveResult, OptimizeError> {
    objective.check(pool.len())?;
    let outcomes = steps.first().ok_or(TreeError::EmptySteps)?.outcomes();
    let depth = steps.len();
    let cost = SearchCost::new(depth, outcomes, grid.samples());
    let total = match cost.combinations {
        Some(c) if c <= budget => c as u64,
        _ => return Err(OptimizeError::BudgetExceeded { cost, budget }),
    };
    let points = grid.points();
    let nodes = cost.internal_nodes as usize;
    let decode = |mut k: u64| -> Vec<f64> {
        // Node 0 is the most significant digit.
        let mut taus = vec![0.0; nodes];
        for slot in taus.iter_mut().rev() {
            *slot = points[(k % points.len() as u64) as usize];
            k /= points.len() as u64;
        }
        taus
    };
    let scores: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|k| {
            let assignment = FixedAssignment::new(outcomes, depth, decode(k)).expect("length matches");
            evaluate_assignment(pool, steps, &assignment, objective, prune_threshold)
                .map(|(_, s)| s)
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let mut best = 0usize;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let assignment = FixedAssignment::new(outcomes, depth, decode(best as u64))?;
    let (tree, score) = evaluate_assignment(pool, steps, &assignment, objective, prune_threshold)?;
    Ok(ExhaustiveResult {
        tree,
        assignment,
        score,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{branch_probability, Branch};
    use crate::elements::{apd, qubit_pool, schedule, UnitaryFamily, UnitaryKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn steps(kind: UnitaryKind, eta: f64, depth: usize) -> Vec<MeasurementStep> {
        let dim = kind.default_dim();
        schedule(depth)
            .unwrap()
            .transmissions()
            .iter()
            .map(|&t| MeasurementStep::new(UnitaryFamily::with_defaults(kind, dim).unwrap(), apd(eta, dim).unwrap(), t).unwrap())
            .collect()
    }

    fn root(pool: &CandidatePool) -> TreeNode {
        TreeNode {
            level: 0,
            position: 1,
            states: pool.states().iter().cloned().map(Some).collect(),
            probs: pool.priors().to_vec(),
            tau: None,
            transmission: None,
            kind: crate::tree::NodeKind::Leaf,
            parent: None,
            outcome: None,
            children: Vec::new(),
        }
    }

    fn rot_grid(samples: usize) -> SweepGrid {
        SweepGrid::new(ParamRange::new(-PI, PI).unwrap(), samples).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = rot_grid(40);
        let pts = g.points();
        assert_eq!(pts.len(), 40);
        assert_eq!(pts[0], -PI);
        assert_eq!(pts[39], PI);
        assert_abs_diff_eq!(g.spacing(), 2.0 * PI / 39.0, epsilon = 1e-15);
        let r = g.refined();
        assert_eq!(r.samples(), 79);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(r.point(2 * i), *p);
        }
        assert!(SweepGrid::new(ParamRange::new(-1.0, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn sweep_examples() {
        let pool = qubit_pool(2, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 1.0, 1);
        let (tau, score) = sweep_node(&root(&pool), &s[0], &rot_grid(41), Objective::Distinguishability, pool.priors());
        assert_abs_diff_eq!(tau, -FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(score, 1.0, epsilon = 1e-12);
        // A constant objective picks the point nearest zero.
        let flat = vec![vec![0.5, 0.5]; 2];
        assert_eq!(pick(rot_grid(40).points().into_iter().map(|t| (t, Objective::Distinguishability.score_children(&flat, &[0.5, 0.5], 1.0)))).0, rot_grid(40).points()[19]);
        let odd = rot_grid(41);
        assert_eq!(pick(odd.points().into_iter().map(|t| (t, 0.3))).0, odd.point(20));
    }

    #[test]
    fn displacement_root_matches_direct_oracle() {
        let pool = qubit_pool(2, 12).unwrap();
        let s = steps(UnitaryKind::Displacement, 1.0, 1);
        let grid = SweepGrid::new(ParamRange::new(-1.0, 1.0).unwrap(), 10).unwrap();
        let (tau, _) = sweep_node(&root(&pool), &s[0], &grid, Objective::Distinguishability, pool.priors());
        // Oracle: outcome probabilities straight from the channel replay.
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for t in grid.points() {
            let mut overlap = 0.0;
            for mu in 1..=2 {
                let b = Branch::new(vec![mu], 2).unwrap();
                let p: Vec<f64> = (0..2)
                    .map(|c| branch_probability(&s, &[t], &b, &pool.states()[c], 0.5).unwrap_or(0.0))
                    .collect();
                overlap += (p[0] * p[1]).sqrt();
            }
            let d = (1.0 - 0.5 * overlap).sqrt();
            if d > best.1 + 1e-12 {
                best = (t, d);
            }
        }
        assert_abs_diff_eq!(tau.abs(), best.0.abs(), epsilon = 1e-12);
        assert_abs_diff_eq!(tau, -7.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn refine_examples() {
        let pool = qubit_pool(2, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 1.0, 1);
        let node = root(&pool);
        let g = rot_grid(40);
        let none = RefinePolicy { max_rounds: 0, ..Default::default() };
        assert_eq!(
            refine(&node, &s[0], &g, &none, Objective::Distinguishability, pool.priors()),
            sweep_node(&node, &s[0], &g, Objective::Distinguishability, pool.priors())
        );
        let (_, coarse) = sweep_node(&node, &s[0], &g, Objective::Distinguishability, pool.priors());
        assert!(coarse < 1.0 - 1e-4);
        let (_, fine) = refine(&node, &s[0], &g, &RefinePolicy::default(), Objective::Distinguishability, pool.priors());
        assert!(fine >= 1.0 - 1e-4, "refined score {fine}");
    }

    #[test]
    fn converged_node_stops_after_one_round() {
        let pool = qubit_pool(2, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 1.0, 1);
        let node = root(&pool);
        let g = rot_grid(41);
        let one = RefinePolicy { max_rounds: 1, ..Default::default() };
        let many = RefinePolicy::default();
        assert_eq!(
            refine(&node, &s[0], &g, &one, Objective::Distinguishability, pool.priors()),
            refine(&node, &s[0], &g, &many, Objective::Distinguishability, pool.priors())
        );
    }

    #[test]
    fn greedy_saturates_at_unit_efficiency() {
        let pool = qubit_pool(2, 2).unwrap();
        for n in 1..=3 {
            let tree = greedy_build(&pool, &steps(UnitaryKind::Rotation, 1.0, n), &rot_grid(40), &RefinePolicy::default(), Objective::Distinguishability, 0.0).unwrap();
            let table = leaf_distributions(&tree);
            assert!(distinguishability(&table, PairConvention::Ordered).unwrap() >= 1.0 - 1e-4);
        }
    }

    #[test]
    fn greedy_single_step_is_one_refine_call() {
        let pool = qubit_pool(2, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 0.9, 1);
        let policy = RefinePolicy::default();
        let tree = greedy_build(&pool, &s, &rot_grid(40), &policy, Objective::Distinguishability, 0.0).unwrap();
        let (tau, _) = refine(&root(&pool), &s[0], &rot_grid(40), &policy, Objective::Distinguishability, pool.priors());
        assert_eq!(tree.root().tau, Some(tau));
    }

    #[test]
    fn costs() {
        assert_eq!(SearchCost::new(3, 2, 10).combinations, Some(10_000_000));
        assert_eq!(SearchCost::new(3, 2, 10).internal_nodes, 7);
        assert_eq!(SearchCost::new(2, 3, 5).combinations, Some(5u128.pow(4)));
        let huge = SearchCost::new(8, 2, 40);
        assert_eq!(huge.combinations, None);
        assert!(!huge.within(u128::MAX));
        assert!(huge.to_string().starts_with("10^"));
        let pool = qubit_pool(2, 2).unwrap();
        let err = exhaustive_build(&pool, &steps(UnitaryKind::Rotation, 0.9, 3), &rot_grid(10), Objective::Distinguishability, 0.0, 1000);
        match err {
            Err(OptimizeError::BudgetExceeded { cost, .. }) => assert_eq!(cost.combinations, Some(10_000_000)),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn exhaustive_single_step_equals_unrefined_greedy() {
        let pool = qubit_pool(2, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 0.8, 1);
        let g = rot_grid(9);
        let ex = exhaustive_build(&pool, &s, &g, Objective::Distinguishability, 0.0, 100).unwrap();
        let none = RefinePolicy { max_rounds: 0, ..Default::default() };
        let gr = greedy_build(&pool, &s, &g, &none, Objective::Distinguishability, 0.0).unwrap();
        assert_abs_diff_eq!(Objective::Distinguishability.score(&leaf_distributions(&gr)), ex.score, epsilon = 1e-12);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        let pool = qubit_pool(2, 2).unwrap();
        for samples in [3, 5, 7] {
            let g = rot_grid(samples);
            let s = steps(UnitaryKind::Rotation, 0.85, 2);
            let ex = exhaustive_build(&pool, &s, &g, Objective::Distinguishability, 0.0, 10_000).unwrap();
            let none = RefinePolicy { max_rounds: 0, ..Default::default() };
            let gr = greedy_build(&pool, &s, &g, &none, Objective::Distinguishability, 0.0).unwrap();
            assert!(Objective::Distinguishability.score(&leaf_distributions(&gr)) <= ex.score + 1e-12);
        }
    }

    #[test]
    fn objective_candidate_count() {
        let pool = qubit_pool(3, 2).unwrap();
        let s = steps(UnitaryKind::Rotation, 0.9, 1);
        assert!(matches!(
            greedy_build(&pool, &s, &rot_grid(5), &RefinePolicy::default(), Objective::Error, 0.0),
            Err(OptimizeError::ObjectiveNeedsTwo { .. })
        ));
        assert!(greedy_build(&pool, &s, &rot_grid(5), &RefinePolicy::default(), Objective::Distinguishability, 0.0).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sweep_is_deterministic_and_scale_free(eta in 0.3f64..1.0, samples in 3usize..30, obj in 0usize..3) {
            let objective = [Objective::Distinguishability, Objective::MinToMax, Objective::Error][obj];
            let pool = qubit_pool(2, 2).unwrap();
            let s = steps(UnitaryKind::Rotation, eta, 2);
            let node = root(&pool);
            let g = rot_grid(samples);
            let a = sweep_node(&node, &s[0], &g, objective, pool.priors());
            let b = sweep_node(&node, &s[0], &g, objective, pool.priors());
            prop_assert_eq!(a, b);
            let mut scaled = node.clone();
            for p in &mut scaled.probs {
                *p *= 0.25;
            }
            let c = sweep_node(&scaled, &s[0], &g, objective, pool.priors());
            prop_assert_eq!(a.0, c.0);
        }

        #[test]
        fn refine_never_loses(eta in 0.3f64..1.0, samples in 3usize..20, rounds in 0usize..4) {
            let pool = qubit_pool(2, 2).unwrap();
            let s = steps(UnitaryKind::Rotation, eta, 2);
            let node = root(&pool);
            let g = rot_grid(samples);
            let policy = RefinePolicy { max_rounds: rounds, ..Default::default() };
            let swept = sweep_node(&node, &s[0], &g, Objective::Distinguishability, pool.priors());
            let refined = refine(&node, &s[0], &g, &policy, Objective::Distinguishability, pool.priors());
            prop_assert!(refined.1 >= swept.1);
        }
    }
}
