//! Dense complex linear algebra for systems of up to three qubits.
//!
//! Qubits are ordered A, B, C with A the most significant bit, so the index
//! of basis state `|abc⟩` is `4a + 2b + c` and the 8-dimensional space is
//! laid out `|000⟩, |001⟩, |010⟩, …, |111⟩`. The protocol literature lists
//! the same kets in the order `000, 001, 100, 101, 010, 011, 110, 111`;
//! expectation values and traces do not depend on the ordering, so only the
//! standard binary order is used here.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::num::Real;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows of equal length.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Real diagonal matrix.
    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: T) -> Self {
        self.scale(Complex::new(factor, T::zero()))
    }

    /// Matrix product. Panics on incompatible shapes.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `self · v` for a column vector given as a slice.
    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Kronecker product `self ⊗ rhs`; `self` occupies the more significant index.
    pub fn tensor(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Sum of the diagonal. Panics on a non-square matrix.
    pub fn trace(&self) -> Complex<T> {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).fold(Complex::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.is_square() && self.max_abs_diff(&self.dagger()) <= tol
    }

    /// `U†U = I` within `tol`.
    pub fn is_unitary(&self, tol: T) -> bool {
        self.is_square() && self.dagger().matmul(self).max_abs_diff(&Self::identity(self.rows)) <= tol
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    ///
    /// The complex Hermitian `X + iY` is embedded in the real symmetric
    /// `[[X, -Y], [Y, X]]`, whose spectrum is that of the original with every
    /// eigenvalue doubled, and diagonalized with cyclic Jacobi rotations.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        assert!(self.is_square(), "eigenvalues of a non-square matrix");
        let n = self.rows;
        let m = 2 * n;
        let mut a = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self[(i, j)];
                a[i * m + j] = z.re;
                a[(i + n) * m + j + n] = z.re;
                a[i * m + j + n] = -z.im;
                a[(i + n) * m + j] = z.im;
            }
        }
        jacobi_symmetric(&mut a, m);
        let mut eig: Vec<T> = (0..m).map(|i| a[i * m + i]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        eig.into_iter().step_by(2).collect()
    }
}

fn jacobi_symmetric<T: Real>(a: &mut [T], m: usize) {
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[i * m + j] * a[i * m + j]);
        if off <= T::min_positive_value() {
            return;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

pub fn tensor<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a.tensor(b)
}

pub fn dagger<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    m.dagger()
}

pub fn trace<T: Real>(m: &ComplexMatrix<T>) -> Complex<T> {
    m.trace()
}

/// Normalized pure state of `log2(dim)` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// Wraps amplitudes, rejecting non-power-of-two lengths and vectors whose
    /// norm differs from one by more than the algebraic tolerance.
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() {
            return Err(Error::Dimension(format!(
                "state dimension {} is not a power of two",
                amplitudes.len()
            )));
        }
        let v = Self { amplitudes };
        let norm = v.norm();
        if (norm - T::one()).abs() > T::ALGEBRAIC_TOL {
            return Err(Error::NotNormalized(norm.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(v)
    }

    /// Scales `amplitudes` to unit norm. Fails on a zero vector.
    pub fn normalized(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
        if norm <= T::min_positive_value() {
            return Err(Error::NotNormalized(0.0));
        }
        let inv = T::one() / norm;
        Self::new(amplitudes.into_iter().map(|z| z * inv).collect())
    }

    /// Computational basis state `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut amplitudes = vec![Complex::zero(); dim];
        amplitudes[index] = Complex::one();
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(Complex::zero(), |acc, (a, &b)| acc + a.conj() * b)
    }

    /// Applies a unitary. The result is renormalized only through the checks
    /// in [`StateVector::new`], so a non-unitary operator is reported.
    pub fn apply(&self, op: &ComplexMatrix<T>) -> Result<Self> {
        if op.cols() != self.dim() || op.rows() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator {}x{} on state of dimension {}",
                op.rows(),
                op.cols(),
                self.dim()
            )));
        }
        Self::new(op.apply(&self.amplitudes))
    }

    /// `|v⟩⟨v|` as a density matrix.
    pub fn outer(&self) -> DensityMatrix<T> {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix::from_matrix_unchecked(m)
    }
}

pub fn outer<T: Real>(v: &StateVector<T>) -> DensityMatrix<T> {
    v.outer()
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates and wraps `matrix`.
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix produced by a trace-preserving completely positive map
    /// of a valid density matrix. Callers that cannot guarantee that use
    /// [`DensityMatrix::new`].
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix<T>) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    /// Maximally mixed state `I/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let w = T::one() / T::from_usize(dim).expect("dimension fits scalar");
        Self::from_matrix_unchecked(ComplexMatrix::identity(dim).scale_real(w))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn trace(&self) -> Complex<T> {
        self.matrix.trace()
    }

    /// `Tr(op · ρ)`.
    pub fn expectation(&self, op: &ComplexMatrix<T>) -> Complex<T> {
        assert_eq!(op.cols(), self.dim(), "operator dimension mismatch");
        let n = self.dim();
        let mut acc = Complex::zero();
        for i in 0..op.rows() {
            for k in 0..n {
                acc = acc + op[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }

    /// Conjugation `U ρ U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix<T>) -> Self {
        Self::from_matrix_unchecked(u.matmul(&self.matrix).matmul(&u.dagger()))
    }

    /// Hermitian within the algebraic tolerance, trace one within the
    /// algebraic tolerance, and no eigenvalue below `-PSD_TOL`.
    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if !m.is_square() || !m.rows().is_power_of_two() {
            return Err(Error::InvalidDensityMatrix(format!("shape {}x{}", m.rows(), m.cols())));
        }
        let herm = m.max_abs_diff(&m.dagger());
        if herm > T::ALGEBRAIC_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm})")));
        }
        let tr = m.trace();
        if (tr - Complex::one()).norm() > T::ALGEBRAIC_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min_eig = m.hermitian_eigenvalues()[0];
        if min_eig < -T::PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig}")));
        }
        Ok(())
    }
}
