//! Compressed sparse column matrices over real or complex entries.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::LinAlgError;

/// Entry types the sparse kernels work over: `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<f64, Output = Self>
    + Zero
    + One
    + 'static
{
    /// |x|, as the pivoting and norm magnitude.
    fn modulus(self) -> f64;
    /// |x|² without the square root, for magnitude comparisons.
    fn modulus_sq(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn real(self) -> f64;
    fn imag(self) -> f64;
    // Pointwise analytic maps, for function-on-graph algebra.
    fn powf(self, e: f64) -> Self;
    fn exp(self) -> Self;
    fn cos(self) -> Self;
    fn sin(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }

    fn modulus_sq(self) -> f64 {
        self * self
    }

    fn from_real(x: f64) -> Self {
        x
    }

    fn conj(self) -> Self {
        self
    }

    fn real(self) -> f64 {
        self
    }

    fn imag(self) -> f64 {
        0.0
    }

    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn sin(self) -> Self {
        f64::sin(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }

    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn conj(self) -> Self {
        Complex64::conj(&self)
    }

    fn real(self) -> f64 {
        self.re
    }

    fn imag(self) -> f64 {
        self.im
    }

    fn powf(self, e: f64) -> Self {
        Complex64::powf(self, e)
    }

    fn exp(self) -> Self {
        Complex64::exp(self)
    }

    fn cos(self) -> Self {
        Complex64::cos(self)
    }

    fn sin(self) -> Self {
        Complex64::sin(self)
    }

    fn ln(self) -> Self {
        Complex64::ln(self)
    }
}

static NEXT_MATRIX_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MATRIX_ID.fetch_add(1, Ordering::Relaxed)
}

/// Sparse matrix in compressed-column form with sorted row indices.
///
/// Each matrix carries a unique identity and a version counter; every
/// value-mutating method bumps the version. [`super::Factorization`] records
/// both at factor time and validates them at solve time.
#[derive(Debug)]
pub struct SparseMatrix<S> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<S>,
    /// Position in `vals` of the diagonal entry per column (`usize::MAX`
    /// when the entry is not stored). Only meaningful for square matrices.
    diag_pos: Vec<usize>,
    id: u64,
    version: u64,
}

impl<S: Scalar> Clone for SparseMatrix<S> {
    fn clone(&self) -> Self {
        // A clone is a different matrix that may evolve independently, so it
        // gets its own identity; factorizations of the original do not apply.
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            vals: self.vals.clone(),
            diag_pos: self.diag_pos.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl<S: Scalar> SparseMatrix<S> {
    /// Builds from `(row, col, value)` triplets; duplicate positions are
    /// summed. Entries equal to zero are kept in the pattern.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, S)],
    ) -> Result<Self, LinAlgError> {
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(LinAlgError::IndexOutOfBounds {
                    row: i,
                    col: j,
                    nrows,
                    ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].1, triplets[t].0));

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<S> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (i, j, v) = triplets[t];
            if last == Some((j, i)) {
                *vals.last_mut().expect("vals tracks row_idx") += v;
                continue;
            }
            row_idx.push(i);
            vals.push(v);
            col_ptr[j + 1] += 1;
            last = Some((j, i));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut m = SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            vals,
            diag_pos: Vec::new(),
            id: fresh_id(),
            version: 0,
        };
        m.rebuild_diag_cache();
        Ok(m)
    }

    fn rebuild_diag_cache(&mut self) {
        self.diag_pos.clear();
        if self.nrows != self.ncols {
            return;
        }
        self.diag_pos.resize(self.ncols, usize::MAX);
        for j in 0..self.ncols {
            let lo = self.col_ptr[j];
            let hi = self.col_ptr[j + 1];
            if let Ok(k) = self.row_idx[lo..hi].binary_search(&j) {
                self.diag_pos[j] = lo + k;
            }
        }
    }

    /// The identity matrix with a full stored diagonal.
    pub fn identity(n: usize) -> Self {
        let triplets: Vec<(usize, usize, S)> = (0..n).map(|i| (i, i, S::one())).collect();
        Self::from_triplets(n, n, &triplets).expect("identity triplets are in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Unique identity of this matrix object.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Value-mutation counter; every in-place update increments it.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Stored entries of column `j` as `(row, value)` pairs, rows ascending.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&i, &v)| (i, v))
    }

    /// All stored entries as `(row, col, value)`, column-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(i, v)| (i, j, v)))
    }

    /// Value at `(i, j)`; zero when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> S {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => self.vals[lo + k],
            Err(_) => S::zero(),
        }
    }

    /// `y = A·x`.
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![S::zero(); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.vals[p] * xj;
            }
        }
        y
    }

    /// Maximum absolute row sum ‖A‖_∞.
    pub fn infinity_norm(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.nrows];
        for p in 0..self.vals.len() {
            row_sums[self.row_idx[p]] += self.vals[p].modulus();
        }
        row_sums.iter().fold(0.0, |m, &s| m.max(s))
    }

    /// True when both matrices store exactly the same positions.
    pub fn same_pattern(&self, other: &SparseMatrix<S>) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    /// Overwrites the values from a matrix with the identical pattern.
    pub fn copy_values_from(&mut self, other: &SparseMatrix<S>) -> Result<(), LinAlgError> {
        if !self.same_pattern(other) {
            return Err(LinAlgError::PatternMismatch);
        }
        self.vals.copy_from_slice(&other.vals);
        self.version += 1;
        Ok(())
    }

    /// Adds `d[i]` to entry `(i, i)`; every diagonal entry must be stored.
    pub fn add_to_diagonal(&mut self, d: &[S]) -> Result<(), LinAlgError> {
        if self.nrows != self.ncols || d.len() != self.ncols {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.ncols,
                got: d.len(),
            });
        }
        if let Some(col) = self.diag_pos.iter().position(|&p| p == usize::MAX) {
            return Err(LinAlgError::MissingDiagonal { col });
        }
        for (j, &p) in self.diag_pos.iter().enumerate() {
            self.vals[p] += d[j];
        }
        self.version += 1;
        Ok(())
    }

    /// Multiplies every stored value by `s`.
    pub fn scale(&mut self, s: S) {
        for v in &mut self.vals {
            *v *= s;
        }
        self.version += 1;
    }

    /// Dense copy, for small-matrix cross-checks.
    pub fn to_dense(&self) -> nalgebra::DMatrix<S>
    where
        S: nalgebra::Scalar,
    {
        let mut m = nalgebra::DMatrix::from_element(self.nrows, self.ncols, S::zero());
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }
}

impl SparseMatrix<f64> {
    /// `shift·I + scale·A` over complex entries, keeping A's pattern (A must
    /// store its full diagonal). Used to form the time-stepping matrices.
    pub fn complex_affine(
        &self,
        scale: Complex64,
        shift: Complex64,
    ) -> Result<SparseMatrix<Complex64>, LinAlgError> {
        if self.nrows != self.ncols {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.nrows,
                got: self.ncols,
            });
        }
        let mut m = self.map(|v| scale * v);
        m.add_to_diagonal(&vec![shift; self.ncols])?;
        Ok(m)
    }

    /// Entry-wise map into a complex matrix with the same pattern.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> SparseMatrix<Complex64> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            vals: self.vals.iter().map(|&v| f(v)).collect(),
            diag_pos: self.diag_pos.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}
