//! Figures of merit over leaf tables: distinguishability `D`, mean
//! min-to-max ratio `R`, discrimination error `E`, and state orthogonality.
//!
//! All table-based scores take joint probabilities `p_c(μ_l)`, i.e. rows
//! that already carry the priors.

use serde::{Deserialize, Serialize};

use crate::fock::{ComplexMatrix, DensityMatrix};
use crate::tree::{assign_leaf_sets, leaf_distributions, DecisionTree, LeafSets, LeafTable};

/// How the `c ≠ c'` sum in `D` counts pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairConvention {
    /// Both `(c, c')` and `(c', c)`.
    #[default]
    Ordered,
    Unordered,
}

/// What inconclusive (tied) leaves contribute to `E`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusivePolicy {
    /// Their whole mass counts as error.
    #[default]
    CountAsError,
    /// They are dropped from the error sum.
    Discard,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MeritError {
    #[error("this figure of merit needs exactly two candidates, got {0}")]
    NeedsTwoCandidates(usize),
    #[error("need at least two candidates")]
    TooFewCandidates,
    #[error("rows have unequal lengths")]
    Ragged,
    #[error("class index {class} out of range for {candidates} candidates")]
    BadClass { class: usize, candidates: usize },
}

/// `Σ_l √(p_l q_l)`.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum()
}

fn check_table(table: &LeafTable) -> Result<(), MeritError> {
    if table.candidates() < 2 {
        return Err(MeritError::TooFewCandidates);
    }
    let n = table.leaves();
    if table.probs.iter().any(|r| r.len() != n) || table.priors.len() != table.candidates() {
        return Err(MeritError::Ragged);
    }
    Ok(())
}

/// `D = √(1 − Σ_{c≠c'} p_c⁰ p_{c'}⁰ Σ_l √(p_c(μ_l) p_{c'}(μ_l)))`.
pub fn distinguishability(table: &LeafTable, pairs: PairConvention) -> Result<f64, MeritError> {
    check_table(table)?;
    let c = table.candidates();
    let mut overlap = 0.0;
    for i in 0..c {
        for j in (i + 1)..c {
            overlap += table.priors[i] * table.priors[j] * bhattacharyya(&table.probs[i], &table.probs[j]);
        }
    }
    if pairs == PairConvention::Ordered {
        overlap *= 2.0;
    }
    Ok((1.0 - overlap).clamp(0.0, 1.0).sqrt())
}

/// `R = Σ_l Σ_c p_c(μ_l) · min_c' p_c'(μ_l) / max_c' p_c'(μ_l)`; leaves with
/// zero maximum contribute nothing.
pub fn min_to_max(table: &LeafTable) -> Result<f64, MeritError> {
    check_table(table)?;
    if table.candidates() != 2 {
        return Err(MeritError::NeedsTwoCandidates(table.candidates()));
    }
    let mut r = 0.0;
    for l in 0..table.leaves() {
        let col = table.leaf_column(l);
        let max = col.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        let min = col.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        r += col.iter().sum::<f64>() * min / max;
    }
    Ok(r.clamp(0.0, 1.0))
}

/// Probability of mistaking one candidate for the other under the
/// maximum-likelihood leaf assignment.
pub fn discrimination_error(table: &LeafTable, policy: InconclusivePolicy) -> Result<f64, MeritError> {
    check_table(table)?;
    if table.candidates() != 2 {
        return Err(MeritError::NeedsTwoCandidates(table.candidates()));
    }
    Ok(error_from_sets(table, &assign_leaf_sets(table), policy))
}

fn error_from_sets(table: &LeafTable, sets: &LeafSets, policy: InconclusivePolicy) -> f64 {
    let mut e = 0.0;
    for (c, set) in sets.sets.iter().enumerate() {
        for &l in set {
            for (other, row) in table.probs.iter().enumerate() {
                if other != c {
                    e += row[l];
                }
            }
        }
    }
    if policy == InconclusivePolicy::CountAsError {
        for &l in &sets.inconclusive {
            e += table.leaf_column(l).iter().sum::<f64>();
        }
    }
    e.clamp(0.0, 1.0)
}

/// `Ω = 1 − Tr(ρ₁ρ₂)`.
pub fn orthogonality(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (x, y) = (a.matrix().as_dmatrix(), b.matrix().as_dmatrix());
    // Tr(XY) = Σ_ij X_ij Y_ji without forming the product.
    let overlap: f64 = x.iter().zip(y.transpose().iter()).map(|(p, q)| (p * q).re).sum();
    1.0 - overlap
}

/// `Σ_{l ∈ L_c} $_{μ_l}[ρ_c]`: the unnormalized outputs of the chained
/// superoperators along every branch assigned to class `class` (0-based).
/// Its trace is the probability of correctly identifying that candidate.
pub fn reconstruct_effective_povm(tree: &DecisionTree, class: usize) -> Result<ComplexMatrix, MeritError> {
    let c = tree.candidates();
    if class >= c {
        return Err(MeritError::BadClass { class, candidates: c });
    }
    let table = leaf_distributions(tree);
    let sets = assign_leaf_sets(&table);
    let dim = tree.root().states.iter().flatten().next().map_or(1, DensityMatrix::dim);
    let mut acc = ComplexMatrix::zeros(dim);
    if sets.sets[class].is_empty() {
        log::warn!("candidate {class} owns no leaves; effective operator is zero");
        return Ok(acc);
    }
    let prior = tree.priors()[class];
    for node in tree.nodes() {
        if !(node.is_leaf() && node.level == tree.depth()) || !sets.sets[class].contains(&(node.position - 1)) {
            continue;
        }
        if let Some(state) = &node.states[class] {
            acc = &acc + &state.matrix().scale_real(node.probs[class] / prior);
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeritReport {
    pub d: f64,
    /// Only defined for two candidates.
    pub r: Option<f64>,
    /// Only defined for two candidates.
    pub e: Option<f64>,
    /// `Ω` between every pair of input candidates.
    pub omega: Vec<Vec<f64>>,
    pub pruned_mass: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MeritOptions {
    pub pairs: PairConvention,
    pub inconclusive: InconclusivePolicy,
}

pub fn evaluate_table(table: &LeafTable, opts: MeritOptions) -> Result<MeritReport, MeritError> {
    let d = distinguishability(table, opts.pairs)?;
    let (r, e) = if table.candidates() == 2 {
        (Some(min_to_max(table)?), Some(discrimination_error(table, opts.inconclusive)?))
    } else {
        (None, None)
    };
    Ok(MeritReport {
        d,
        r,
        e,
        omega: Vec::new(),
        pruned_mass: table.total_pruned(),
    })
}

pub fn evaluate(tree: &DecisionTree, opts: MeritOptions) -> Result<MeritReport, MeritError> {
    let mut report = evaluate_table(&leaf_distributions(tree), opts)?;
    let states: Vec<&DensityMatrix> = tree.root().states.iter().flatten().collect();
    report.omega = states
        .iter()
        .map(|a| states.iter().map(|b| orthogonality(a, b)).collect())
        .collect();
    Ok(report)
}
