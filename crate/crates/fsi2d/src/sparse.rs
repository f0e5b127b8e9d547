//! Sparse matrices (compressed sparse column) and the direct LU solver used by
//! every linear solve in the crate.
//!
//! The nonlinear systems are assembled into a [`SparseMatrix`] whose sparsity
//! pattern is fixed per mesh, so the fill-reducing ordering and symbolic
//! factorization are computed once and reused across Newton iterations and
//! time steps; only the numeric factorization is redone when values change.
//! Factorization is delegated to `faer`'s sparse LU (unsymmetric, with partial
//! pivoting), which is well suited to the saddle-point structure of the
//! coupled velocity/pressure/stress systems here.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("index ({row}, {col}) is outside the matrix sparsity pattern")]
    OutOfPattern { row: usize, col: usize },
    #[error("symbolic factorization failed: {0}")]
    Symbolic(String),
    #[error("numeric LU factorization failed (matrix is singular or nearly so)")]
    Factorization,
    #[error("matrix has not been factorized")]
    NotFactorized,
}

/// Square CSC matrix with a frozen sparsity pattern.
#[derive(Clone)]
pub struct SparseMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the pattern from (row, col) index pairs; duplicates are merged.
    /// Every diagonal entry is always included so constrained rows can be
    /// replaced by identity rows without structural changes.
    pub fn from_pairs(n: usize, pairs: &mut Vec<(usize, usize)>) -> Self {
        pairs.reserve(n);
        for i in 0..n {
            pairs.push((i, i));
        }
        // sort column-major, rows ascending inside each column
        pairs.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        pairs.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(_, c) in pairs.iter() {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = pairs.iter().map(|&(r, _)| r).collect();
        let nnz = row_idx.len();
        SparseMatrix {
            n,
            col_ptr,
            row_idx,
            vals: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn clear(&mut self) {
        self.vals.fill(0.0);
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi]
            .binary_search(&row)
            .ok()
            .map(|k| lo + k)
    }

    /// Adds `v` to entry (row, col). The entry must exist in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        match self.slot(row, col) {
            Some(k) => self.vals[k] += v,
            None => panic!("entry ({row}, {col}) outside sparsity pattern"),
        }
    }

    /// Sets entry (row, col), which must exist in the pattern.
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        match self.slot(row, col) {
            Some(k) => self.vals[k] = v,
            None => panic!("entry ({row}, {col}) outside sparsity pattern"),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map(|k| self.vals[k]).unwrap_or(0.0)
    }

    /// y = A x (for tests and residual checks).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.vals[k] * xc;
            }
        }
        y
    }

    /// Dense copy, for small test systems only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                d[self.row_idx[k]][c] = self.vals[k];
            }
        }
        d
    }
}

/// Direct solver wrapping `faer`'s sparse LU with symbolic reuse.
pub struct LuSolver {
    sym_mat: SymbolicSparseColMat<usize>,
    sym_lu: SymbolicLu<usize>,
    factors: Option<Lu<usize, f64>>,
}

impl LuSolver {
    /// Analyzes the pattern of `mat` (fill-reducing ordering + symbolic
    /// factorization). Call once per sparsity pattern.
    pub fn analyze(mat: &SparseMatrix) -> Result<Self, SparseError> {
        let sym_mat = SymbolicSparseColMat::<usize>::new_checked(
            mat.n,
            mat.n,
            mat.col_ptr.clone(),
            None,
            mat.row_idx.clone(),
        );
        let sym_lu = SymbolicLu::try_new(sym_mat.as_ref())
            .map_err(|e| SparseError::Symbolic(format!("{e:?}")))?;
        Ok(LuSolver {
            sym_mat,
            sym_lu,
            factors: None,
        })
    }

    /// Numeric factorization of `mat`, which must share the analyzed pattern.
    pub fn factor(&mut self, mat: &SparseMatrix) -> Result<(), SparseError> {
        assert_eq!(mat.nnz(), self.sym_mat.as_ref().row_idx().len());
        let view = SparseColMatRef::new(self.sym_mat.as_ref(), &mat.vals);
        // the backend panics on an exactly zero pivot instead of returning an
        // error; catch it so callers see a recoverable failure either way
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            Lu::try_new_with_symbolic(self.sym_lu.clone(), view)
        }))
        .map_err(|_| SparseError::Factorization)?
        .map_err(|_| SparseError::Factorization)?;
        // reject factorizations that merely "succeeded" structurally but are
        // numerically unusable
        let mut probe = vec![1.0; mat.n];
        let mut m = faer::MatMut::from_column_major_slice_mut(&mut probe, mat.n, 1);
        lu.solve_in_place(m.as_mut());
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::Factorization);
        }
        self.factors = Some(lu);
        Ok(())
    }

    /// Solves A x = rhs in place using the last factorization.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), SparseError> {
        let lu = self.factors.as_ref().ok_or(SparseError::NotFactorized)?;
        let n = rhs.len();
        let mut m = faer::MatMut::from_column_major_slice_mut(rhs, n, 1);
        lu.solve_in_place(m.as_mut());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern_3x3() -> SparseMatrix {
        let mut pairs = vec![(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)];
        SparseMatrix::from_pairs(3, &mut pairs)
    }

    #[test]
    fn pattern_dedup_and_diagonal() {
        let mut pairs = vec![(0, 1), (0, 1), (2, 0)];
        let m = SparseMatrix::from_pairs(3, &mut pairs);
        // 2 unique off-diagonal + 3 diagonal
        assert_eq!(m.nnz(), 5);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn add_and_mul() {
        let mut m = pattern_3x3();
        m.add(0, 0, 2.0);
        m.add(0, 1, -1.0);
        m.add(1, 0, -1.0);
        m.add(1, 1, 2.0);
        m.add(1, 2, -1.0);
        m.add(2, 1, -1.0);
        m.add(2, 2, 2.0);
        let y = m.mul_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
    }

    #[test]
    #[should_panic]
    fn add_outside_pattern_panics() {
        let mut m = pattern_3x3();
        m.add(2, 0, 1.0);
    }

    #[test]
    fn lu_solves_poisson_chain() {
        // 1D Laplacian with Dirichlet ends, solution x_i = i
        let n = 50;
        let mut pairs = Vec::new();
        for i in 1..n - 1 {
            pairs.push((i, i - 1));
            pairs.push((i, i + 1));
        }
        let mut m = SparseMatrix::from_pairs(n, &mut pairs);
        m.set(0, 0, 1.0);
        m.set(n - 1, n - 1, 1.0);
        for i in 1..n - 1 {
            m.set(i, i - 1, -1.0);
            m.set(i, i, 2.0);
            m.set(i, i + 1, -1.0);
        }
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = (n - 1) as f64;
        let mut solver = LuSolver::analyze(&m).unwrap();
        solver.factor(&m).unwrap();
        solver.solve_in_place(&mut rhs).unwrap();
        for (i, v) in rhs.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-10, "x[{i}] = {v}");
        }
    }

    #[test]
    fn lu_refactor_same_pattern() {
        let mut pairs = vec![(0, 1), (1, 0)];
        let mut m = SparseMatrix::from_pairs(2, &mut pairs);
        m.set(0, 0, 4.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 3.0);
        let mut solver = LuSolver::analyze(&m).unwrap();
        solver.factor(&m).unwrap();
        let mut x = vec![5.0, 4.0];
        solver.solve_in_place(&mut x).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        // change values, refactor without re-analysis
        m.set(0, 0, 2.0);
        solver.factor(&m).unwrap();
        let mut y = vec![3.0, 4.0];
        solver.solve_in_place(&mut y).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_error() {
        let mut pairs = vec![(0, 1), (1, 0)];
        let mut m = SparseMatrix::from_pairs(2, &mut pairs);
        m.set(0, 0, 1.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 1.0);
        let mut solver = LuSolver::analyze(&m).unwrap();
        assert!(solver.factor(&m).is_err());
    }
}
