//! Compressed sparse row storage and SPD linear solves.

use std::io::{self, Write};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Systems above this size go to preconditioned conjugate gradients.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("conjugate gradient stalled after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Square or rectangular matrix in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed in the
    /// order given, so a fixed triplet order yields bitwise-identical output.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Iterates the stored entries of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        DVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Cholesky-based definiteness check on the dense copy.
    pub fn is_positive_definite(&self) -> bool {
        self.nrows == self.ncols && Cholesky::new(self.to_dense()).is_some()
    }

    /// Writes one `row col value` line per stored entry (zero-based indices).
    pub fn write_coordinates<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }

    /// `alpha * self + beta * other` for matrices of equal shape.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets: Vec<_> = self
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        SparseMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }
}

/// Factorized SPD operator: dense Cholesky for small systems, Jacobi
/// preconditioned CG otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(Cholesky<f64, Dyn>),
    Iterative { matrix: SparseMatrix, inv_diag: Vec<f64> },
}

impl SpdSolver {
    pub fn new(matrix: &SparseMatrix) -> Result<Self, LinalgError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.nrows() <= DIRECT_SOLVE_LIMIT {
            Cholesky::new(matrix.to_dense())
                .map(SpdSolver::Direct)
                .ok_or(LinalgError::NotPositiveDefinite)
        } else {
            let diag = matrix.diagonal();
            if diag.iter().any(|&d| d <= 0.0) {
                return Err(LinalgError::NotPositiveDefinite);
            }
            Ok(SpdSolver::Iterative {
                matrix: matrix.clone(),
                inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Direct(c) => c.l_dirty().nrows(),
            SpdSolver::Iterative { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if rhs.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), got: rhs.len() });
        }
        match self {
            SpdSolver::Direct(c) => Ok(c.solve(rhs)),
            SpdSolver::Iterative { matrix, inv_diag } => {
                conjugate_gradient(matrix, inv_diag, rhs, 1e-14, 10 * matrix.nrows() + 100)
            }
        }
    }
}

/// Jacobi-preconditioned CG; stops when ‖r‖ ≤ tol·‖b‖.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    inv_diag: &[f64],
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, LinalgError> {
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z = r.component_mul(&DVector::from_column_slice(inv_diag));
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let step = rz / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let res = r.norm();
        if res <= tol * b_norm {
            return Ok(x);
        }
        if it + 1 == max_iter {
            return Err(LinalgError::NoConvergence { iterations: max_iter, residual: res / b_norm });
        }
        z = r.component_mul(&DVector::from_column_slice(inv_diag));
        let rz_next = r.dot(&z);
        p = &z + (rz_next / rz) * &p;
        rz = rz_next;
    }
    Ok(x)
}

/// Max absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}
