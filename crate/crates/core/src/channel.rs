//! One partial measurement as a conditional channel on mode 0.
//!
//! The input mode is mixed with an ancilla on a beam splitter, the ancilla is
//! rotated by `A_τ` and then collapsed by `Π_μ`. Tracing the ancilla out gives
//! the Kraus operators `K_{i,j} = ⟨i|(I ⊗ √Π_μ A_τ) B_t|j⟩` and the
//! superoperator `$_μ[ρ] = Σ_{i,n,m} ⟨n|ρ_anc|m⟩ K_{i,n} ρ K_{i,m}†`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::elements::{beam_splitter, ElementError, PovmFamily, UnitaryFamily};
use crate::fock::{ComplexMatrix, DensityMatrix, FockError};

/// Outcomes with conditional probability below this are unreachable.
pub const UNREACHABLE_PROB: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("outcome {mu} outside 1..={outcomes}")]
    BadOutcome { mu: usize, outcomes: usize },
    #[error("state dimension {state} does not match step dimension {step}")]
    DimensionMismatch { state: usize, step: usize },
    #[error("branch of length {branch} against {steps} steps")]
    LengthMismatch { branch: usize, steps: usize },
    #[error("outcome at step {step} is unreachable (p = {prob:e})")]
    Unreachable { step: usize, prob: f64 },
    #[error("ancilla state must be normalized")]
    AncillaNotNormalized,
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Beam splitter, ancilla, tunable unitary and detector for one level.
#[derive(Clone, Debug)]
pub struct MeasurementStep {
    unitary: UnitaryFamily,
    povm: PovmFamily,
    sqrt_povm: Vec<ComplexMatrix>,
    transmission: f64,
    splitter: ComplexMatrix,
    ancilla: DensityMatrix,
    ancilla_support: Vec<usize>,
}

impl MeasurementStep {
    /// Step with the ancilla in vacuum.
    pub fn new(unitary: UnitaryFamily, povm: PovmFamily, transmission: f64) -> Result<Self, ChannelError> {
        let dim = unitary.dim();
        if povm.dim() != dim {
            return Err(ChannelError::DimensionMismatch {
                state: povm.dim(),
                step: dim,
            });
        }
        let splitter = beam_splitter(transmission, dim)?;
        let sqrt_povm = povm.elements().iter().map(ComplexMatrix::psd_sqrt).collect();
        let ancilla = DensityMatrix::fock(0, dim)?;
        Ok(Self {
            unitary,
            povm,
            sqrt_povm,
            transmission,
            splitter,
            ancilla,
            ancilla_support: vec![0],
        })
    }

    pub fn with_ancilla(mut self, ancilla: DensityMatrix) -> Result<Self, ChannelError> {
        if ancilla.dim() != self.dim() {
            return Err(ChannelError::DimensionMismatch {
                state: ancilla.dim(),
                step: self.dim(),
            });
        }
        if ancilla.is_subnormalized() {
            return Err(ChannelError::AncillaNotNormalized);
        }
        self.ancilla_support = (0..ancilla.dim())
            .filter(|&n| ancilla.matrix().get(n, n).re != 0.0)
            .collect();
        self.ancilla = ancilla;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }

    pub fn outcomes(&self) -> usize {
        self.povm.outcomes()
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn unitary(&self) -> &UnitaryFamily {
        &self.unitary
    }

    pub fn povm(&self) -> &PovmFamily {
        &self.povm
    }

    pub fn ancilla(&self) -> &DensityMatrix {
        &self.ancilla
    }

    pub fn splitter(&self) -> &ComplexMatrix {
        &self.splitter
    }

    /// Kraus operators at setting `tau` acting on the first `support` Fock
    /// columns of mode 0.
    pub fn operators(&self, tau: f64, support: usize) -> StepOperators {
        let d = self.dim();
        let s = support.clamp(1, d);
        let a = self.unitary.sample(tau);
        let b = self.splitter.as_dmatrix();
        let mut blocks = Vec::with_capacity(self.outcomes());
        for sqrt_pi in &self.sqrt_povm {
            let x = sqrt_pi.as_dmatrix() * a.as_dmatrix();
            let mut per_anc = Vec::with_capacity(self.ancilla_support.len());
            for &j in &self.ancilla_support {
                // v[(i', a * s + b)] = ⟨a, i'| B |b, j⟩
                let v = DMatrix::from_fn(d, d * s, |ip, col| {
                    let (row0, col0) = (col / s, col % s);
                    b[(row0 * d + ip, col0 * d + j)]
                });
                let y = &x * v;
                let per_i = (0..d)
                    .map(|i| DMatrix::from_fn(d, s, |row0, col0| y[(i, row0 * s + col0)]))
                    .collect();
                per_anc.push(per_i);
            }
            blocks.push(per_anc);
        }
        StepOperators {
            blocks,
            ancilla: self
                .ancilla_support
                .iter()
                .map(|&n| {
                    self.ancilla_support
                        .iter()
                        .map(|&m| self.ancilla.matrix().get(n, m))
                        .collect()
                })
                .collect(),
            dim: d,
            support: s,
        }
    }
}

/// `K_{i,j}` for outcome `mu` (1-based) as a full `d × d` operator on mode 0.
pub fn kraus(step: &MeasurementStep, tau: f64, mu: usize, i: usize, j: usize) -> Result<ComplexMatrix, ChannelError> {
    check_outcome(step, mu)?;
    let d = step.dim();
    if i >= d || j >= d {
        return Err(FockError::DimensionMismatch { left: i.max(j), right: d }.into());
    }
    let x = step.sqrt_povm[mu - 1].as_dmatrix() * step.unitary.sample(tau).as_dmatrix();
    let b = step.splitter.as_dmatrix();
    let m = DMatrix::from_fn(d, d, |a, c| (0..d).map(|ip| x[(i, ip)] * b[(a * d + ip, c * d + j)]).sum());
    Ok(ComplexMatrix::from_dmatrix_unchecked(m))
}

fn check_outcome(step: &MeasurementStep, mu: usize) -> Result<(), ChannelError> {
    if mu == 0 || mu > step.outcomes() {
        return Err(ChannelError::BadOutcome {
            mu,
            outcomes: step.outcomes(),
        });
    }
    Ok(())
}

/// Kraus blocks of one step at a fixed setting, indexed
/// `[μ − 1][ancilla-in][i]`, each `d × support`.
#[derive(Clone, Debug)]
pub struct StepOperators {
    blocks: Vec<Vec<Vec<DMatrix<Complex64>>>>,
    ancilla: Vec<Vec<Complex64>>,
    dim: usize,
    support: usize,
}

/// Result of one outcome of a step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepResult {
    /// Normalized conditional state and the probability of the outcome.
    Reached { state: DensityMatrix, prob: f64 },
    Unreachable { prob: f64 },
}

impl StepResult {
    pub fn prob(&self) -> f64 {
        match self {
            StepResult::Reached { prob, .. } => *prob,
            StepResult::Unreachable { .. } => 0.0,
        }
    }

    pub fn state(&self) -> Option<&DensityMatrix> {
        match self {
            StepResult::Reached { state, .. } => Some(state),
            StepResult::Unreachable { .. } => None,
        }
    }
}

impl StepOperators {
    pub fn outcomes(&self) -> usize {
        self.blocks.len()
    }

    fn head(&self, rho: &DensityMatrix) -> DMatrix<Complex64> {
        assert!(
            rho.support() <= self.support,
            "state support {} exceeds operator support {}",
            rho.support(),
            self.support
        );
        rho.matrix().as_dmatrix().view((0, 0), (self.support, self.support)).into_owned()
    }

    /// Unnormalized `$_μ[ρ]` for outcome index `mu0` (0-based).
    fn unnormalized(&self, mu0: usize, rho_s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let per_anc = &self.blocks[mu0];
        for (n, kn) in per_anc.iter().enumerate() {
            for (m, km) in per_anc.iter().enumerate() {
                let w = self.ancilla[n][m];
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (ki, kmi) in kn.iter().zip(km) {
                    out += (ki * rho_s * kmi.adjoint()) * w;
                }
            }
        }
        out
    }

    /// Conditional state and probability for each outcome.
    pub fn apply(&self, rho: &DensityMatrix) -> Vec<StepResult> {
        let rho_s = self.head(rho);
        (0..self.outcomes())
            .map(|mu0| {
                let out = self.unnormalized(mu0, &rho_s);
                let prob = out.trace().re;
                if !(prob >= UNREACHABLE_PROB) {
                    return StepResult::Unreachable { prob };
                }
                let normalized = ComplexMatrix::from_dmatrix_unchecked(out * Complex64::new(1.0 / prob, 0.0));
                StepResult::Reached {
                    state: DensityMatrix::from_trusted(normalized.hermitian_part()),
                    prob,
                }
            })
            .collect()
    }

    /// Outcome probabilities only.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        let rho_s = self.head(rho);
        (0..self.outcomes())
            .map(|mu0| {
                let per_anc = &self.blocks[mu0];
                let mut p = Complex64::new(0.0, 0.0);
                for (n, kn) in per_anc.iter().enumerate() {
                    for (m, km) in per_anc.iter().enumerate() {
                        let w = self.ancilla[n][m];
                        if w == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for (ki, kmi) in kn.iter().zip(km) {
                            p += (kmi.adjoint() * ki * &rho_s).trace() * w;
                        }
                    }
                }
                p.re
            })
            .collect()
    }
}

/// Apply the step at setting `tau` and keep outcome `mu` (1-based).
pub fn apply_step(step: &MeasurementStep, tau: f64, mu: usize, rho: &DensityMatrix) -> Result<StepResult, ChannelError> {
    check_outcome(step, mu)?;
    if rho.dim() != step.dim() {
        return Err(ChannelError::DimensionMismatch {
            state: rho.dim(),
            step: step.dim(),
        });
    }
    let ops = step.operators(tau, rho.support());
    Ok(ops.apply(rho).swap_remove(mu - 1))
}

/// Sequence of outcomes `μ⁽¹⁾ … μ⁽ᵏ⁾`, each in `1..=M`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    outcomes: Vec<usize>,
    alphabet: usize,
}

impl Branch {
    pub fn new(outcomes: Vec<usize>, alphabet: usize) -> Result<Self, ChannelError> {
        if let Some(&mu) = outcomes.iter().find(|&&mu| mu == 0 || mu > alphabet) {
            return Err(ChannelError::BadOutcome { mu, outcomes: alphabet });
        }
        Ok(Self { outcomes, alphabet })
    }

    /// Inverse of [`Branch::leaf_index`] for a complete branch of `depth`.
    pub fn from_leaf_index(leaf: usize, depth: usize, alphabet: usize) -> Self {
        let mut rest = leaf - 1;
        let mut outcomes = vec![0; depth];
        for slot in outcomes.iter_mut().rev() {
            *slot = rest % alphabet + 1;
            rest /= alphabet;
        }
        Self { outcomes, alphabet }
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// `l = 1 + Σ_j (μ⁽ʲ⁾ − 1) M^(k−j)`; the first outcome is the most
    /// significant digit.
    pub fn leaf_index(&self) -> usize {
        1 + self
            .outcomes
            .iter()
            .fold(0, |acc, &mu| acc * self.alphabet + (mu - 1))
    }

    /// Outcomes printed 0-based, e.g. `0101`.
    pub fn label(&self) -> String {
        let digits = self.outcomes.iter().map(|mu| (mu - 1).to_string());
        if self.alphabet <= 10 {
            digits.collect()
        } else {
            digits.collect::<Vec<_>>().join("-")
        }
    }
}

/// `p_c⁽⁰⁾ · Tr{$⁽ᴺ⁾ ⋯ $⁽¹⁾[ρ]}` along `branch`, with setting `taus[k]` at step `k`.
pub fn branch_probability(
    steps: &[MeasurementStep],
    taus: &[f64],
    branch: &Branch,
    rho: &DensityMatrix,
    prior: f64,
) -> Result<f64, ChannelError> {
    if branch.len() != steps.len() || taus.len() != steps.len() {
        return Err(ChannelError::LengthMismatch {
            branch: branch.len(),
            steps: steps.len(),
        });
    }
    let mut state = rho.clone();
    let mut prob = prior;
    for (k, ((step, &tau), &mu)) in steps.iter().zip(taus).zip(branch.outcomes()).enumerate() {
        match apply_step(step, tau, mu, &state)? {
            StepResult::Reached { state: next, prob: p } => {
                prob *= p;
                state = next;
            }
            StepResult::Unreachable { prob: p } => {
                return Err(ChannelError::Unreachable { step: k + 1, prob: p });
            }
        }
    }
    Ok(prob)
}
