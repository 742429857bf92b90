//! Dense complex linear algebra on a truncated Fock space.
//!
//! Matrices are indexed by Fock number `n, m ∈ {0, …, d-1}`. Two-mode
//! operators use mode 0 as the slow index, i.e. `|n0, n1⟩ ↦ n0 * d + n1`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Largest matrix dimension `tensor` will produce unless told otherwise.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Hermiticity tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue a density matrix may carry.
pub const EIGEN_FLOOR: f64 = -1e-9;
/// Slack above unit trace.
pub const TRACE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("tensor product dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("eigenvalue {value:e} below positivity floor")]
    NegativeEigenvalue { value: f64 },
    #[error("trace {trace} outside the admissible range")]
    BadTrace { trace: f64 },
    #[error("empty matrix")]
    Empty,
}

/// Square complex matrix on a (possibly multi-mode) truncated Fock space.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Result<Self, FockError> {
        if m.nrows() != m.ncols() {
            return Err(FockError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(FockError::Empty);
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FockError::NonFinite);
        }
        Ok(Self(m))
    }

    pub(crate) fn from_dmatrix_unchecked(m: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    /// Diagonal matrix with real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// `|ψ⟩⟨ψ|` for an (unnormalized) ket.
    pub fn ket_bra(ket: &[Complex64]) -> Self {
        let n = ket.len();
        Self(DMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, FockError> {
        self.check_same(rhs)?;
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, FockError> {
        self.check_same(rhs)?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, FockError> {
        self.check_same(rhs)?;
        Ok(Self(&self.0 - &rhs.0))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `A X A†`
    pub fn conjugate_by(&self, a: &Self) -> Result<Self, FockError> {
        self.check_same(a)?;
        Ok(Self(&a.0 * &self.0 * a.0.adjoint()))
    }

    /// Kronecker product with `self` as the slow (mode-0) factor.
    pub fn tensor(&self, rhs: &Self) -> Result<Self, FockError> {
        self.tensor_capped(rhs, DEFAULT_DIM_CAP)
    }

    pub fn tensor_capped(&self, rhs: &Self, cap: usize) -> Result<Self, FockError> {
        let dim = self
            .dim()
            .checked_mul(rhs.dim())
            .ok_or(FockError::DimensionCap {
                dim: usize::MAX,
                cap,
            })?;
        if dim > cap {
            return Err(FockError::DimensionCap { dim, cap });
        }
        Ok(Self(self.0.kronecker(&rhs.0)))
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim(), rhs.dim(), "max_abs_diff on mismatched dims");
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .hermitian_part()
            .0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Square root of a positive-semidefinite Hermitian matrix. Eigenvalues
    /// below zero are clamped to zero.
    pub fn psd_sqrt(&self) -> Self {
        if self.is_real_diagonal() {
            return Self(DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
                if i == j {
                    Complex64::new(self.0[(i, i)].re.max(0.0).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
        let eig = self.hermitian_part().0.symmetric_eigen();
        let roots = DMatrix::from_diagonal(
            &eig.eigenvalues
                .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)),
        );
        let q = &eig.eigenvectors;
        Self(q * roots * q.adjoint())
    }

    pub fn is_real_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let z = self.0[(i, j)];
                z.im == 0.0 && (i == j || z.re == 0.0)
            })
        })
    }

    fn check_same(&self, rhs: &Self) -> Result<(), FockError> {
        if self.dim() != rhs.dim() {
            return Err(FockError::DimensionMismatch {
                left: self.dim(),
                right: rhs.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix::add(self, rhs).expect("dimension mismatch in +")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix::sub(self, rhs).expect("dimension mismatch in -")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs).expect("dimension mismatch in *")
    }
}

/// A density matrix. Conditional states inside a decision tree may be
/// subnormalized; pool states are normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    allow_subnormalized: bool,
}

impl DensityMatrix {
    /// Validates a normalized state: Hermitian, PSD and unit trace.
    pub fn new(mat: ComplexMatrix) -> Result<Self, FockError> {
        Self::validate(&mat, false)?;
        Ok(Self {
            mat,
            allow_subnormalized: false,
        })
    }

    /// Validates a state with trace in `(0, 1]`.
    pub fn new_subnormalized(mat: ComplexMatrix) -> Result<Self, FockError> {
        Self::validate(&mat, true)?;
        Ok(Self {
            mat,
            allow_subnormalized: true,
        })
    }

    /// Pure state from a ket; the ket is normalized first.
    pub fn pure(ket: &[Complex64]) -> Result<Self, FockError> {
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FockError::BadTrace { trace: norm * norm });
        }
        let normalized: Vec<Complex64> = ket.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::ket_bra(&normalized))
    }

    /// Fock state `|n⟩⟨n|` in dimension `dim`.
    pub fn fock(n: usize, dim: usize) -> Result<Self, FockError> {
        let mut ket = vec![Complex64::new(0.0, 0.0); dim];
        *ket.get_mut(n).ok_or(FockError::DimensionMismatch {
            left: n,
            right: dim,
        })? = Complex64::new(1.0, 0.0);
        Self::pure(&ket)
    }

    /// Skips validation; used on the output of trace-preserving maps where
    /// the invariants hold by construction.
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Self {
        Self {
            mat,
            allow_subnormalized: false,
        }
    }

    fn validate(mat: &ComplexMatrix, sub: bool) -> Result<(), FockError> {
        let deviation = mat.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(FockError::NotHermitian { deviation });
        }
        let trace = mat.trace().re;
        let ok = if sub {
            trace > 0.0 && trace <= 1.0 + TRACE_SLACK
        } else {
            (trace - 1.0).abs() <= TRACE_SLACK
        };
        if !ok {
            return Err(FockError::BadTrace { trace });
        }
        if let Some(&min) = mat.hermitian_eigenvalues().first() {
            if min < EIGEN_FLOOR {
                return Err(FockError::NegativeEigenvalue { value: min });
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn is_subnormalized(&self) -> bool {
        self.allow_subnormalized
    }

    /// One past the highest Fock index with nonzero population.
    pub fn support(&self) -> usize {
        let d = self.dim();
        (0..d)
            .rev()
            .find(|&n| self.mat.get(n, n).re != 0.0)
            .map_or(1, |n| n + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus_state() -> DensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(h, 0.0), c(h, 0.0)]).unwrap()
    }

    fn annihilator(dim: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(dim, |i, j| {
            if j == i + 1 {
                c((j as f64).sqrt(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    #[test]
    fn tensor_of_vacua() {
        let v = DensityMatrix::fock(0, 2).unwrap();
        let t = v.matrix().tensor(v.matrix()).unwrap();
        assert_eq!(t.dim(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_eq!(t.get(i, j), c(expected, 0.0));
            }
        }
    }

    #[test]
    fn tensor_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.tensor(&i2).unwrap(), ComplexMatrix::identity(4));
    }

    #[test]
    fn tensor_qubit_with_vacuum() {
        let rho = plus_state();
        let vac = DensityMatrix::fock(0, 2).unwrap();
        let t = rho.matrix().tensor(vac.matrix()).unwrap();
        assert_abs_diff_eq!(t.trace().re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 0).re, 0.5, epsilon = 1e-15);
        // |1,0⟩ sits at index 2 with mode 0 slow.
        assert_abs_diff_eq!(t.get(0, 2).re, 0.5, epsilon = 1e-15);
        assert_eq!(t.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn tensor_cap_is_enforced() {
        let a = ComplexMatrix::identity(10);
        let err = a.tensor_capped(&a, 50).unwrap_err();
        assert_eq!(err, FockError::DimensionCap { dim: 100, cap: 50 });
    }

    #[test]
    fn traces() {
        assert_eq!(ComplexMatrix::identity(2).trace(), c(2.0, 0.0));
        assert_abs_diff_eq!(plus_state().trace(), 1.0, epsilon = 1e-15);
        let a = annihilator(2);
        let n = plus_state().matrix().conjugate_by(&a).unwrap();
        assert_abs_diff_eq!(n.trace().re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ring_identities() {
        let m = plus_state().matrix().clone();
        let i = ComplexMatrix::identity(2);
        assert_eq!(&i * &m, m);
        assert_eq!(&m + &ComplexMatrix::zeros(2), m);
        assert_eq!(ComplexMatrix::identity(3).dagger(), ComplexMatrix::identity(3));
        // A Π A† with A = I is Π
        assert_eq!(m.conjugate_by(&i).unwrap(), m);
        assert!(matches!(
            m.matmul(&ComplexMatrix::identity(3)),
            Err(FockError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn density_rejects_negative_eigenvalue() {
        let m = ComplexMatrix::from_real_diagonal(&[1.001, -1e-3]);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(FockError::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn density_rejects_bad_trace_and_non_hermitian() {
        let m = ComplexMatrix::from_real_diagonal(&[0.5, 0.4]);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(FockError::BadTrace { .. })));
        assert!(DensityMatrix::new_subnormalized(m).is_ok());
        let skew = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => c(1.0, 0.0),
            (0, 1) => c(0.1, 0.0),
            _ => c(0.0, 0.0),
        });
        assert!(matches!(DensityMatrix::new(skew), Err(FockError::NotHermitian { .. })));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = ComplexMatrix::from_fn(3, |i, j| {
            let base = [[2.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 0.7]];
            c(base[i][j], if i < j { 0.05 } else if i > j { -0.05 } else { 0.0 })
        });
        let r = m.psd_sqrt();
        assert!((&r * &r).max_abs_diff(&m) < 1e-12);
        let diag = ComplexMatrix::from_real_diagonal(&[0.25, 0.0, 1.0]);
        assert_eq!(diag.psd_sqrt(), ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 1.0]));
    }

    fn arb_matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
            ComplexMatrix::from_fn(dim, |i, j| {
                let (re, im) = v[i * dim + j];
                c(re, im)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tensor_is_associative(a in arb_matrix(2), b in arb_matrix(3), c3 in arb_matrix(2)) {
            let left = a.tensor(&b).unwrap().tensor(&c3).unwrap();
            let right = a.tensor(&b.tensor(&c3).unwrap()).unwrap();
            prop_assert_eq!(left.dim(), 12);
            prop_assert!(left.max_abs_diff(&right) < 1e-14);
        }

        #[test]
        fn trace_of_tensor_factorizes(a in arb_matrix(3), b in arb_matrix(2)) {
            let lhs = a.tensor(&b).unwrap().trace();
            let rhs = a.trace() * b.trace();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }

        #[test]
        fn dagger_reverses_products(a in arb_matrix(3), b in arb_matrix(3)) {
            prop_assert_eq!(a.dagger().dagger(), a.clone());
            let lhs = (&a * &b).dagger();
            let rhs = &b.dagger() * &a.dagger();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }
}
