//! Dense complex linear algebra for small registers.
//!
//! Basis ordering is `|00>, |01>, |10>, |11>` for two qubits: qubit (spin) 1
//! is the most significant bit of the basis index, and every Kronecker
//! product places its left factor on the more significant qubits.

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for identities that hold in exact arithmetic and only see rounding.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Default tolerance for equivalence checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A square complex matrix acting on a register of qubits.
///
/// The `unitary` flag is metadata: it is set only by constructors that either
/// checked `A^dag A = I` or compose already-unitary factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
    unitary: bool,
}

impl Operator {
    /// Wraps an arbitrary square matrix; the result is not flagged unitary.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        qubits_for_dim(matrix.nrows())?;
        Ok(Operator {
            matrix,
            unitary: false,
        })
    }

    /// Wraps a matrix after checking unitarity to [`EXACT_TOLERANCE`].
    pub fn unitary(matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Operator::new(matrix)?;
        let defect = op.unitarity_defect();
        if defect > EXACT_TOLERANCE {
            return Err(Error::NotUnitary(defect));
        }
        op.unitary = true;
        Ok(op)
    }

    pub(crate) fn from_unitary_unchecked(matrix: DMatrix<C64>) -> Self {
        debug_assert!(matrix.is_square() && matrix.nrows().is_power_of_two());
        Operator {
            matrix,
            unitary: true,
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self::from_unitary_unchecked(DMatrix::identity(dim, dim))
    }

    /// Diagonal operator; flagged unitary when every entry has unit modulus.
    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        let matrix = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        if diag
            .iter()
            .all(|z| (z.norm() - 1.0).abs() <= EXACT_TOLERANCE)
        {
            qubits_for_dim(diag.len())?;
            Ok(Self::from_unitary_unchecked(matrix))
        } else {
            Operator::new(matrix)
        }
    }

    /// Builds a `dim x dim` operator from row-major entries.
    pub fn from_rows(dim: usize, rows: &[C64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: rows.len(),
            });
        }
        Operator::new(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// `max |A^dag A - I|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = self.dim();
        let product = self.matrix.adjoint() * &self.matrix;
        max_abs(&(product - DMatrix::<C64>::identity(dim, dim)))
    }

    /// Conjugate transpose. For a unitary this is the inverse.
    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
            unitary: self.unitary,
        }
    }

    /// Multiplies every entry by `factor`; unitarity survives unit-modulus factors.
    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            matrix: &self.matrix * factor,
            unitary: self.unitary && (factor.norm() - 1.0).abs() <= EXACT_TOLERANCE,
        }
    }

    /// Checked product `self * rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(Operator {
            matrix: &self.matrix * &rhs.matrix,
            unitary: self.unitary && rhs.unitary,
        })
    }

    /// Matrix-vector product `self |psi>`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.dim() != psi.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(StateVector {
            amplitudes: &self.matrix * &psi.amplitudes,
        })
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn is_diagonal(&self) -> bool {
        let dim = self.dim();
        (0..dim).all(|r| (0..dim).all(|c| r == c || self.matrix[(r, c)] == ZERO))
    }
}

impl Mul for &Operator {
    type Output = Operator;

    /// Panics on a dimension mismatch; use [`Operator::compose`] for a checked product.
    fn mul(self, rhs: &Operator) -> Operator {
        self.compose(rhs).expect("operator dimensions differ")
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let z = self.matrix[(r, c)];
                write!(f, "{:>+8.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Kronecker product with `a` on the most significant qubits.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator {
        matrix: a.matrix.kronecker(&b.matrix),
        unitary: a.unitary && b.unitary,
    }
}

/// Applies `u` to `psi`. Alias of [`Operator::apply`].
pub fn apply(u: &Operator, psi: &StateVector) -> Result<StateVector> {
    u.apply(psi)
}

pub fn adjoint(u: &Operator) -> Operator {
    u.adjoint()
}

/// Complex amplitudes over the computational basis of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Accepts amplitudes whose norm is 1 within [`DEFAULT_TOLERANCE`].
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        qubits_for_dim(amplitudes.len())?;
        let amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > DEFAULT_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        qubits_for_dim(amplitudes.len())?;
        let amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::ZeroInput);
        }
        Ok(StateVector {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub(crate) fn from_unchecked(amplitudes: Vec<C64>) -> Self {
        StateVector {
            amplitudes: DVector::from_vec(amplitudes),
        }
    }

    /// Computational basis state `|index>` on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amplitudes = DVector::from_element(dim, ZERO);
        amplitudes[index] = ONE;
        Ok(StateVector { amplitudes })
    }

    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 is always in range")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn scale(&self, factor: C64) -> StateVector {
        StateVector {
            amplitudes: &self.amplitudes * factor,
        }
    }

    /// `|amplitude|^2` per basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn as_dvector(&self) -> &DVector<C64> {
        &self.amplitudes
    }
}

/// Outcome of comparing two objects up to a global phase.
///
/// `global_phase` is the unit-modulus factor `p` with `b ~ p * a`, and
/// `max_residual = max |b - p * a|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseEquivalenceReport {
    pub equivalent: bool,
    pub global_phase: C64,
    pub max_residual: f64,
}

/// Objects that can be compared modulo an overall phase.
pub trait GlobalPhase {
    fn phase_equivalence(&self, other: &Self, tol: f64) -> Result<PhaseEquivalenceReport>;
}

impl GlobalPhase for StateVector {
    /// Aligns on the largest-magnitude amplitude of `self`.
    fn phase_equivalence(&self, other: &Self, tol: f64) -> Result<PhaseEquivalenceReport> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.norm() == 0.0 || other.norm() == 0.0 {
            return Err(Error::ZeroInput);
        }
        let pivot = self
            .amplitudes
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.norm().total_cmp(&y.norm()))
            .map(|(i, _)| i)
            .expect("nonempty state");
        let a = self.amplitudes[pivot];
        let b = other.amplitudes[pivot];
        let global_phase = if b.norm() == 0.0 {
            ONE
        } else {
            (b / b.norm()) / (a / a.norm())
        };
        let max_residual = self.scale(global_phase).max_abs_diff(other);
        Ok(PhaseEquivalenceReport {
            equivalent: max_residual <= tol,
            global_phase,
            max_residual,
        })
    }
}

impl GlobalPhase for Operator {
    /// Estimates the phase as `arg tr(A^dag B)`.
    fn phase_equivalence(&self, other: &Self, tol: f64) -> Result<PhaseEquivalenceReport> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if max_abs(&self.matrix) == 0.0 || max_abs(&other.matrix) == 0.0 {
            return Err(Error::ZeroInput);
        }
        let overlap = (self.matrix.adjoint() * &other.matrix).trace();
        let global_phase = if overlap.norm() == 0.0 {
            ONE
        } else {
            overlap / overlap.norm()
        };
        let max_residual = self.scale(global_phase).max_abs_diff(other);
        Ok(PhaseEquivalenceReport {
            equivalent: max_residual <= tol,
            global_phase,
            max_residual,
        })
    }
}

pub fn equal_up_to_global_phase<T: GlobalPhase>(
    a: &T,
    b: &T,
    tol: f64,
) -> Result<PhaseEquivalenceReport> {
    a.phase_equivalence(b, tol)
}

/// A Hermitian matrix standing for a (possibly unnormalized) density operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Accepts a matrix that is Hermitian within [`EXACT_TOLERANCE`].
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        qubits_for_dim(matrix.nrows())?;
        let defect = max_abs(&(&matrix - matrix.adjoint()));
        if defect > EXACT_TOLERANCE {
            return Err(Error::NotHermitian(defect));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        DensityMatrix {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// `self + c * I`.
    pub fn shifted(&self, c: f64) -> DensityMatrix {
        let dim = self.dim();
        DensityMatrix {
            matrix: &self.matrix + DMatrix::<C64>::identity(dim, dim) * C64::new(c, 0.0),
        }
    }
}

/// `|psi><psi|`.
pub fn to_density(psi: &StateVector) -> DensityMatrix {
    let v = psi.as_dvector();
    DensityMatrix {
        matrix: v * v.adjoint(),
    }
}

/// `u rho u^dag`.
pub fn evolve_density(u: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: rho.dim(),
        });
    }
    let evolved = &u.matrix * &rho.matrix * u.matrix.adjoint();
    // Symmetrize away rounding so Hermiticity holds to the last bit.
    let matrix = (&evolved + evolved.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix { matrix })
}

/// Traceless Hermitian matrix in the NMR deviation convention.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationMatrix {
    inner: DensityMatrix,
}

impl DeviationMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let inner = DensityMatrix::new(matrix)?;
        let tr = inner.trace().norm();
        if tr > EXACT_TOLERANCE {
            return Err(Error::NotTraceless(tr));
        }
        Ok(DeviationMatrix { inner })
    }

    pub fn zeros(n_qubits: usize) -> Self {
        DeviationMatrix {
            inner: DensityMatrix::zeros(n_qubits),
        }
    }

    /// Removes the identity component: `rho - tr(rho)/d * I`.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let shift = -rho.trace().re / rho.dim() as f64;
        DeviationMatrix {
            inner: rho.shifted(shift),
        }
    }

    pub fn as_density(&self) -> &DensityMatrix {
        &self.inner
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.inner.matrix()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.inner.entry(row, col)
    }

    pub fn evolve(&self, u: &Operator) -> Result<DeviationMatrix> {
        Ok(DeviationMatrix {
            inner: evolve_density(u, &self.inner)?,
        })
    }

    pub fn max_abs_diff(&self, other: &DeviationMatrix) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }
}

/// Row-major JSON form `{"rows", "cols", "re", "im"}` shared by the CLI and tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let shape_ok = self.re.len() == self.rows
            && self.im.len() == self.rows
            && self
                .re
                .iter()
                .chain(self.im.iter())
                .all(|row| row.len() == self.cols);
        if !shape_ok {
            return Err(Error::InvalidArgument(format!(
                "matrix json does not have shape {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |r, c| {
            C64::new(self.re[r][c], self.im[r][c])
        }))
    }
}

impl From<&DMatrix<C64>> for MatrixJson {
    fn from(m: &DMatrix<C64>) -> Self {
        let grid = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect())
                .collect()
        };
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            re: grid(|z| z.re),
            im: grid(|z| z.im),
        }
    }
}

impl From<&Operator> for MatrixJson {
    fn from(op: &Operator) -> Self {
        MatrixJson::from(op.matrix())
    }
}

impl From<&DensityMatrix> for MatrixJson {
    fn from(rho: &DensityMatrix) -> Self {
        MatrixJson::from(rho.matrix())
    }
}
