//! Physical building blocks: candidate pools, parametrized unitaries, beam
//! splitters, splitting schedules and detector POVMs.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{ComplexMatrix, DensityMatrix, FockError};
use crate::quadrature::adaptive_simpson;

/// Priors must sum to one within this tolerance.
pub const PRIOR_TOL: f64 = 1e-12;
/// POVM completeness and positivity tolerance.
pub const POVM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("a candidate pool needs at least two states, got {0}")]
    TooFewCandidates(usize),
    #[error("priors sum to {0}, expected 1")]
    PriorsNotNormalized(f64),
    #[error("prior {0} is negative or not finite")]
    BadPrior(f64),
    #[error("{states} states but {priors} priors")]
    PriorCount { states: usize, priors: usize },
    #[error("candidates {0} and {1} are identical")]
    DuplicateCandidates(usize, usize),
    #[error("candidate states have mismatched dimensions")]
    MixedDimensions,
    #[error("Fock dimension {dim} too small (need at least {min})")]
    DimensionTooSmall { dim: usize, min: usize },
    #[error("quantum efficiency {0} outside [0, 1]")]
    BadEfficiency(f64),
    #[error("saturation count must be at least 1")]
    BadSaturation,
    #[error("transmission {0} outside [0, 1]")]
    BadTransmission(f64),
    #[error("splitting depth must be at least 1")]
    BadDepth,
    #[error("POVM element {index} is not positive (eigenvalue {value:e})")]
    NotPositive { index: usize, value: f64 },
    #[error("POVM elements sum to identity only within {0:e}")]
    Incomplete(f64),
    #[error("parameter range [{lo}, {hi}] is empty or not finite")]
    BadRange { lo: f64, hi: f64 },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Candidate states `ρ_c` with priors `p_c`.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    states: Vec<DensityMatrix>,
    priors: Vec<f64>,
}

impl CandidatePool {
    pub fn new(states: Vec<DensityMatrix>, priors: Vec<f64>) -> Result<Self, ElementError> {
        if states.len() < 2 {
            return Err(ElementError::TooFewCandidates(states.len()));
        }
        if states.len() != priors.len() {
            return Err(ElementError::PriorCount {
                states: states.len(),
                priors: priors.len(),
            });
        }
        if let Some(&p) = priors.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(ElementError::BadPrior(p));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(ElementError::PriorsNotNormalized(total));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(ElementError::MixedDimensions);
        }
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if states[i].matrix().max_abs_diff(states[j].matrix()) <= PRIOR_TOL {
                    return Err(ElementError::DuplicateCandidates(i + 1, j + 1));
                }
            }
        }
        Ok(Self { states, priors })
    }

    /// Pure states given as kets, normalized on the way in.
    pub fn from_kets(kets: &[Vec<Complex64>], priors: Vec<f64>) -> Result<Self, ElementError> {
        let states = kets
            .iter()
            .map(|k| DensityMatrix::pure(k))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(states, priors)
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// `C` real qubits spread evenly around the longitudinal great circle of the
/// Bloch sphere, `θ_c = (2c − 1)π / C`, with uniform priors. The qubits live
/// on Fock indices `{0, 1}` of a `dim`-dimensional space.
pub fn qubit_pool(candidates: usize, dim: usize) -> Result<CandidatePool, ElementError> {
    if candidates < 2 {
        return Err(ElementError::TooFewCandidates(candidates));
    }
    if dim < 2 {
        return Err(ElementError::DimensionTooSmall { dim, min: 2 });
    }
    let states = (1..=candidates)
        .map(|c| {
            let theta = (2 * c - 1) as f64 * PI / candidates as f64;
            let (s, co) = (0.5 * theta).sin_cos();
            let block = [[co * co, co * s], [s * co, s * s]];
            let m = ComplexMatrix::from_fn(dim, |i, j| {
                if i < 2 && j < 2 {
                    Complex64::new(block[i][j], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            DensityMatrix::new(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    CandidatePool::new(states, vec![1.0 / candidates as f64; candidates])
}

/// Closed real parameter interval `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ElementError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ElementError::BadRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryKind {
    Rotation,
    Displacement,
    /// The rank-one matrix `[[c², cs], [sc, s²]]`. Not unitary; only kept
    /// for side-by-side comparison with [`UnitaryKind::Rotation`].
    PrintedHadamard,
}

impl UnitaryKind {
    pub fn default_range(self) -> ParamRange {
        match self {
            UnitaryKind::Rotation | UnitaryKind::PrintedHadamard => ParamRange { lo: -PI, hi: PI },
            UnitaryKind::Displacement => ParamRange { lo: -1.0, hi: 1.0 },
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            UnitaryKind::Rotation | UnitaryKind::PrintedHadamard => 40,
            UnitaryKind::Displacement => 10,
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            UnitaryKind::Rotation | UnitaryKind::PrintedHadamard => 2,
            UnitaryKind::Displacement => 12,
        }
    }
}

impl fmt::Display for UnitaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitaryKind::Rotation => "rotation",
            UnitaryKind::Displacement => "displacement",
            UnitaryKind::PrintedHadamard => "printed_hadamard",
        })
    }
}

/// A parametrized map `τ ↦ A_τ` over the range `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryFamily {
    kind: UnitaryKind,
    range: ParamRange,
    dim: usize,
}

impl UnitaryFamily {
    pub fn new(kind: UnitaryKind, range: ParamRange, dim: usize) -> Result<Self, ElementError> {
        if dim < 2 {
            return Err(ElementError::DimensionTooSmall { dim, min: 2 });
        }
        Ok(Self { kind, range, dim })
    }

    pub fn with_defaults(kind: UnitaryKind, dim: usize) -> Result<Self, ElementError> {
        Self::new(kind, kind.default_range(), dim)
    }

    pub fn kind(&self) -> UnitaryKind {
        self.kind
    }

    pub fn range(&self) -> ParamRange {
        self.range
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, tau: f64) -> ComplexMatrix {
        match self.kind {
            UnitaryKind::Rotation => rotation(tau, self.dim),
            UnitaryKind::Displacement => displacement(tau, self.dim),
            UnitaryKind::PrintedHadamard => printed_hadamard(tau, self.dim),
        }
    }
}

/// Real rotation `[[cos τ/2, sin τ/2], [−sin τ/2, cos τ/2]]` on Fock indices
/// `{0, 1}`, identity above.
pub fn rotation(tau: f64, dim: usize) -> ComplexMatrix {
    let (s, c) = (0.5 * tau).sin_cos();
    embed_2x2([[c, s], [-s, c]], dim)
}

/// The singular matrix `[[c², cs], [sc, s²]]`, `c = cos τ/2`, `s = sin τ/2`.
pub fn printed_hadamard(tau: f64, dim: usize) -> ComplexMatrix {
    let (s, c) = (0.5 * tau).sin_cos();
    embed_2x2([[c * c, c * s], [s * c, s * s]], dim)
}

fn embed_2x2(block: [[f64; 2]; 2], dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |i, j| {
        if i < 2 && j < 2 {
            Complex64::new(block[i][j], 0.0)
        } else if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Displacement `exp(τ a† − τ a)` for real amplitude `τ`.
pub fn displacement(tau: f64, dim: usize) -> ComplexMatrix {
    displacement_complex(Complex64::new(tau, 0.0), dim)
}

/// Displacement `exp(α a† − α* a)` truncated to `dim` Fock states, from the
/// closed-form matrix elements
/// `⟨m|D(α)|n⟩ = √(n!/m!) α^(m−n) e^(−|α|²/2) L_n^(m−n)(|α|²)` for `m ≥ n`
/// and the conjugate-symmetric expression for `m < n`.
pub fn displacement_complex(alpha: Complex64, dim: usize) -> ComplexMatrix {
    let x = alpha.norm_sqr();
    let envelope = (-0.5 * x).exp();
    let ln_fact: Vec<f64> = (0..dim)
        .scan(0.0, |acc, n| {
            if n > 0 {
                *acc += (n as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    ComplexMatrix::from_fn(dim, |m, n| {
        let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
        let ratio = (0.5 * (ln_fact[lo] - ln_fact[hi])).exp();
        let lag = laguerre(lo, (hi - lo) as f64, x);
        let base = if m >= n { alpha } else { -alpha.conj() };
        base.powu((hi - lo) as u32) * (ratio * envelope * lag)
    })
}

/// Generalized Laguerre polynomial `L_n^(a)(x)` by upward recurrence.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Two-mode beam splitter on `dim²` (mode 0 slow) with
/// `a₀† ↦ t a₀† + r a₁†`, `a₁† ↦ −r a₀† + t a₁†`, `r = √(1 − t²)`.
/// Output amplitudes that land above the truncation are dropped, so the
/// matrix is exactly unitary on every block of total photon number `< dim`.
pub fn beam_splitter(t: f64, dim: usize) -> Result<ComplexMatrix, ElementError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(ElementError::BadTransmission(t));
    }
    let r = (1.0 - t * t).max(0.0).sqrt();
    let max_n = 2 * dim;
    let mut fact = vec![1.0f64; max_n + 1];
    for n in 1..=max_n {
        fact[n] = fact[n - 1] * n as f64;
    }
    let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);
    let mut m = ComplexMatrix::zeros(dim * dim).into_dmatrix();
    for n0 in 0..dim {
        for n1 in 0..dim {
            let total = n0 + n1;
            let norm = 1.0 / (fact[n0] * fact[n1]).sqrt();
            let col = n0 * dim + n1;
            for p in 0..=n0 {
                let a = binom(n0, p) * t.powi(p as i32) * r.powi((n0 - p) as i32);
                for q in 0..=n1 {
                    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                    let b = sign * binom(n1, q) * r.powi(q as i32) * t.powi((n1 - q) as i32);
                    let out0 = p + q;
                    let out1 = total - out0;
                    if out0 >= dim || out1 >= dim {
                        continue;
                    }
                    let amp = a * b * norm * (fact[out0] * fact[out1]).sqrt();
                    m[(out0 * dim + out1, col)] += Complex64::new(amp, 0.0);
                }
            }
        }
    }
    Ok(ComplexMatrix::from_dmatrix_unchecked(m))
}

/// Per-step transmissions of the cascaded splitter.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitterSchedule {
    transmissions: Vec<f64>,
}

impl SplitterSchedule {
    pub fn new(transmissions: Vec<f64>) -> Result<Self, ElementError> {
        if transmissions.is_empty() {
            return Err(ElementError::BadDepth);
        }
        if let Some(&t) = transmissions.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(ElementError::BadTransmission(t));
        }
        Ok(Self { transmissions })
    }

    pub fn depth(&self) -> usize {
        self.transmissions.len()
    }

    pub fn transmissions(&self) -> &[f64] {
        &self.transmissions
    }
}

/// Equal de-localization over `depth` ancillary modes:
/// `t⁽ᵏ⁾ = √((N − k) / (N − k + 1))`.
pub fn schedule(depth: usize) -> Result<SplitterSchedule, ElementError> {
    if depth < 1 {
        return Err(ElementError::BadDepth);
    }
    let n = depth as f64;
    let ts = (1..=depth)
        .map(|k| {
            let k = k as f64;
            ((n - k) / (n - k + 1.0)).sqrt()
        })
        .collect();
    SplitterSchedule::new(ts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Apd,
    Pnrd,
    Homodyne,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Apd => "apd",
            DetectorKind::Pnrd => "pnrd",
            DetectorKind::Homodyne => "homodyne",
        })
    }
}

/// Ordered detector POVM `{Π_μ}`; element `μ` (1-based) is stored at `μ − 1`.
#[derive(Clone, Debug)]
pub struct PovmFamily {
    elements: Vec<ComplexMatrix>,
    kind: DetectorKind,
    efficiency: f64,
    saturation: Option<usize>,
}

impl PovmFamily {
    /// Checks positivity and completeness before accepting the elements.
    pub fn new(
        elements: Vec<ComplexMatrix>,
        kind: DetectorKind,
        efficiency: f64,
        saturation: Option<usize>,
    ) -> Result<Self, ElementError> {
        let dim = elements.first().map(ComplexMatrix::dim).unwrap_or(0);
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(FockError::DimensionMismatch { left: dim, right: 0 }.into());
        }
        for (index, e) in elements.iter().enumerate() {
            let dev = e.hermiticity_deviation();
            if dev > POVM_TOL {
                return Err(ElementError::NotPositive {
                    index: index + 1,
                    value: -dev,
                });
            }
            if let Some(&value) = e.hermitian_eigenvalues().first() {
                if value < -POVM_TOL {
                    return Err(ElementError::NotPositive {
                        index: index + 1,
                        value,
                    });
                }
            }
        }
        let mut sum = ComplexMatrix::zeros(dim);
        for e in &elements {
            sum = &sum + e;
        }
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if dev > POVM_TOL {
            return Err(ElementError::Incomplete(dev));
        }
        Ok(Self {
            elements,
            kind,
            efficiency,
            saturation,
        })
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// Element for outcome `mu` (1-based).
    pub fn element(&self, mu: usize) -> &ComplexMatrix {
        &self.elements[mu - 1]
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn saturation(&self) -> Option<usize> {
        self.saturation
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

fn check_efficiency(eta: f64) -> Result<(), ElementError> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(ElementError::BadEfficiency(eta))
    }
}

/// On/off click detector: `Π₁ = Σ (1 − η)ⁿ |n⟩⟨n|` (no click), `Π₂ = I − Π₁`.
pub fn apd(eta: f64, dim: usize) -> Result<PovmFamily, ElementError> {
    check_efficiency(eta)?;
    let no_click: Vec<f64> = (0..dim).map(|n| (1.0 - eta).powi(n as i32)).collect();
    let click: Vec<f64> = no_click.iter().map(|p| 1.0 - p).collect();
    PovmFamily::new(
        vec![
            ComplexMatrix::from_real_diagonal(&no_click),
            ComplexMatrix::from_real_diagonal(&click),
        ],
        DetectorKind::Apd,
        eta,
        Some(1),
    )
}

/// Photon-number-resolving detector saturating at `n_s` counts. For
/// `μ ≤ n_s`, `⟨n|Π_μ|n⟩ = η^(μ−1) (1 − η)^(n−μ+1) C(n, μ−1)`; the last
/// element `Π_(n_s+1)` is the complement.
pub fn pnrd(eta: f64, saturation: usize, dim: usize) -> Result<PovmFamily, ElementError> {
    check_efficiency(eta)?;
    if saturation < 1 {
        return Err(ElementError::BadSaturation);
    }
    let mut rest = vec![1.0f64; dim];
    let mut elements = Vec::with_capacity(saturation + 1);
    for mu in 1..=saturation {
        let k = mu - 1;
        let diag: Vec<f64> = (0..dim)
            .map(|n| {
                if n < k {
                    0.0
                } else {
                    eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32) * binomial(n, k)
                }
            })
            .collect();
        for (r, d) in rest.iter_mut().zip(&diag) {
            *r -= d;
        }
        elements.push(ComplexMatrix::from_real_diagonal(&diag));
    }
    elements.push(ComplexMatrix::from_real_diagonal(&rest));
    PovmFamily::new(elements, DetectorKind::Pnrd, eta, Some(saturation))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Homodyne detection binned by the sign of the quadrature: `Π₁` projects
/// onto `x < 0`, `Π₂ = I − Π₁`.
pub fn homodyne_binned(dim: usize) -> Result<PovmFamily, ElementError> {
    let lower = homodyne_lower_bin(dim, 1.0);
    let upper = &ComplexMatrix::identity(dim) - &lower;
    PovmFamily::new(vec![lower, upper], DetectorKind::Homodyne, 1.0, None)
}

/// `⟨n|Π₁|m⟩ = ∫_{−∞}^0 ψ_n(x) ψ_m(x) dx` with the Hermite functions
/// `ψ_n(x) = √λ h_n(λx)`, `h_0 ∝ e^{−x²/2}`. Integrated numerically to well
/// below `1e-10` absolute.
pub fn homodyne_lower_bin(dim: usize, scale: f64) -> ComplexMatrix {
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|n| (n..dim).map(move |m| (n, m))).collect();
    let integrand = |x: f64| {
        let h = hermite_functions(dim, scale * x);
        pairs.iter().map(|&(n, m)| scale * h[n] * h[m]).collect::<Vec<_>>()
    };
    let cutoff = ((2.0 * dim as f64 + 1.0).sqrt() + 10.0) / scale;
    let values = adaptive_simpson(&integrand, -cutoff, 0.0, 1e-14, 50);
    let mut m = ComplexMatrix::zeros(dim).into_dmatrix();
    for (&(n, k), v) in pairs.iter().zip(values) {
        m[(n, k)] = Complex64::new(v, 0.0);
        m[(k, n)] = Complex64::new(v, 0.0);
    }
    ComplexMatrix::from_dmatrix_unchecked(m)
}

/// Normalized Hermite functions `h_0 … h_{count−1}` at `x`.
pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if count > 1 {
        out.push(std::f64::consts::SQRT_2 * x * h0);
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out.truncate(count);
    out
}
