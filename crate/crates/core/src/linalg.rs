//! Sparse and dense linear algebra used throughout the crate.
//!
//! Sparse matrices are stored in CSR format over a shared, immutable
//! sparsity pattern so that matrices assembled for different parameters can
//! be vectorized consistently. Factorizations are delegated to `faer`.

use std::collections::BTreeSet;
use std::sync::Arc;

use faer::linalg::triangular_solve;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Result, RomError};

pub type DMat = Mat<f64>;

/// Relative residual above which a sparse solve is refined.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn from_row_sets(ncols: usize, rows: &[BTreeSet<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows {
            col_idx.extend(r.iter().copied());
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { nrows: rows.len(), ncols, row_ptr, col_idx }
    }

    pub fn identity(n: usize) -> Self {
        SparsityPattern { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect() }
    }

    pub fn dense(nrows: usize, ncols: usize) -> Self {
        let rows: Vec<BTreeSet<usize>> = (0..nrows).map(|_| (0..ncols).collect()).collect();
        Self::from_row_sets(ncols, &rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.row_ptr[row]..self.row_ptr[row + 1]
    }

    /// Storage position of entry `(row, col)`, if structurally nonzero.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let r = self.row_range(row);
        self.col_idx[r.clone()].binary_search(&col).ok().map(|k| r.start + k)
    }

    /// Row and column of the entry stored at position `k`.
    pub fn entry(&self, k: usize) -> (usize, usize) {
        let row = self.row_ptr.partition_point(|&p| p <= k) - 1;
        (row, self.col_idx[k])
    }
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn from_values(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(RomError::DimensionMismatch(format!(
                "{} values for a pattern with {} nonzeros",
                values.len(),
                pattern.nnz()
            )));
        }
        Ok(CsrMatrix { pattern, values })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { pattern: Arc::new(SparsityPattern::identity(n)), values: vec![1.0; n] }
    }

    pub fn from_dense(m: MatRef<'_, f64>) -> Self {
        let rows: Vec<BTreeSet<usize>> =
            (0..m.nrows()).map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).collect()).collect();
        let pattern = Arc::new(SparsityPattern::from_row_sets(m.ncols(), &rows));
        let mut values = Vec::with_capacity(pattern.nnz());
        for (i, r) in rows.iter().enumerate() {
            for &j in r {
                values.push(m[(i, j)]);
            }
        }
        CsrMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "mul_vec dimension mismatch");
        let p = &self.pattern;
        (0..p.nrows)
            .map(|i| p.row_range(i).map(|k| self.values[k] * x[p.col_idx[k]]).sum())
            .collect()
    }

    pub fn mul_vec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows(), "mul_vec_transpose dimension mismatch");
        let p = &self.pattern;
        let mut out = vec![0.0; p.ncols];
        for (i, &yi) in y.iter().enumerate() {
            for k in p.row_range(i) {
                out[p.col_idx[k]] += self.values[k] * yi;
            }
        }
        out
    }

    /// `self * b` for a dense `b`.
    pub fn mul_dense(&self, b: MatRef<'_, f64>) -> DMat {
        assert_eq!(b.nrows(), self.ncols(), "mul_dense dimension mismatch");
        let p = &self.pattern;
        let mut out = Mat::zeros(p.nrows, b.ncols());
        for j in 0..b.ncols() {
            for i in 0..p.nrows {
                let mut s = 0.0;
                for k in p.row_range(i) {
                    s += self.values[k] * b[(p.col_idx[k], j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// `selfᵀ * b` for a dense `b`.
    pub fn mul_dense_transpose(&self, b: MatRef<'_, f64>) -> DMat {
        assert_eq!(b.nrows(), self.nrows(), "mul_dense_transpose dimension mismatch");
        let p = &self.pattern;
        let mut out = Mat::zeros(p.ncols, b.ncols());
        for j in 0..b.ncols() {
            for i in 0..p.nrows {
                let bij = b[(i, j)];
                if bij == 0.0 {
                    continue;
                }
                for k in p.row_range(i) {
                    out[(p.col_idx[k], j)] += self.values[k] * bij;
                }
            }
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn to_dense(&self) -> DMat {
        let p = &self.pattern;
        let mut m = Mat::zeros(p.nrows, p.ncols);
        for i in 0..p.nrows {
            for k in p.row_range(i) {
                m[(i, p.col_idx[k])] += self.values[k];
            }
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let p = &self.pattern;
        let mut trip = Vec::with_capacity(p.nnz());
        for i in 0..p.nrows {
            for k in p.row_range(i) {
                trip.push(Triplet::new(i, p.col_idx[k], self.values[k]));
            }
        }
        SparseColMat::try_new_from_triplets(p.nrows, p.ncols, &trip)
            .map_err(|e| RomError::InvalidArgument(format!("sparse conversion failed: {e:?}")))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let p = &self.pattern;
        if p.nrows != p.ncols {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..p.nrows).all(|i| p.row_range(i).all(|k| (self.values[k] - self.get(p.col_idx[k], i)).abs() <= rel_tol * scale))
    }

    /// Dense `self` restricted to selected rows and columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMat {
        let mut col_pos = vec![usize::MAX; self.ncols()];
        for (c, &j) in cols.iter().enumerate() {
            col_pos[j] = c;
        }
        let mut m = Mat::zeros(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for k in self.pattern.row_range(i) {
                let c = col_pos[self.pattern.col_idx[k]];
                if c != usize::MAX {
                    m[(r, c)] += self.values[k];
                }
            }
        }
        m
    }
}

/// Accumulates triplets and solves the resulting square system with sparse LU.
#[derive(Default, Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder { n, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.entries.push(Triplet::new(row, col, v));
        }
    }

    /// Adds `scale * m` with row/column offsets.
    pub fn add_csr(&mut self, m: &CsrMatrix, row_off: usize, col_off: usize, scale: f64, transpose: bool) {
        let p = m.pattern();
        for i in 0..p.nrows() {
            for k in p.row_range(i) {
                let j = p.col_idx()[k];
                let (r, c) = if transpose { (j, i) } else { (i, j) };
                self.push(r + row_off, c + col_off, scale * m.values()[k]);
            }
        }
    }

    pub fn build(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| RomError::InvalidArgument(format!("sparse assembly failed: {e:?}")))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }
}

/// Sparse LU factorization with residual-checked solves.
pub struct SparseLu {
    matrix: SparseColMat<usize, f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(matrix: SparseColMat<usize, f64>) -> Result<Self> {
        let lu = matrix.sp_lu().map_err(|e| RomError::Singular(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { matrix, lu })
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        Self::new(a.to_faer()?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let xm = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        let ax = &self.matrix * &xm;
        (0..b.len()).map(|i| b[i] - ax[(i, 0)]).collect()
    }

    /// Solves `A x = b`; refines up to three times and fails on a persistent
    /// residual or non-finite output.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bnorm = norm2(b);
        let mut x = self.raw_solve(b);
        if bnorm == 0.0 {
            return Ok(x);
        }
        for _ in 0..4 {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(RomError::Singular("sparse solve produced non-finite values".into()));
            }
            let r = self.residual(&x, b);
            if norm2(&r) <= RESIDUAL_TOL * bnorm {
                return Ok(x);
            }
            let dx = self.raw_solve(&r);
            axpy(1.0, &dx, &mut x);
        }
        let rel = norm2(&self.residual(&x, b)) / bnorm;
        if rel <= RESIDUAL_TOL {
            Ok(x)
        } else {
            Err(RomError::Singular(format!("sparse solve residual {rel:e}")))
        }
    }
}

pub fn solve_sparse(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SparseLu::from_csr(a)?.solve(b)
}

/// Dense Cholesky factor `X = L Lᵀ`; the TPOD whitening factor is `H = Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: DMat,
}

impl CholeskyFactor {
    pub fn new(x: &CsrMatrix) -> Result<Self> {
        Self::from_dense(x.to_dense().as_ref())
    }

    pub fn from_dense(x: MatRef<'_, f64>) -> Result<Self> {
        let llt = x.llt(Side::Lower).map_err(|e| RomError::NotSpd(format!("{e:?}")))?;
        let l = llt.L().to_owned();
        let min_diag = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_diag > 0.0) {
            return Err(RomError::NotSpd(format!("nonpositive pivot {min_diag:e}")));
        }
        Ok(CholeskyFactor { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> MatRef<'_, f64> {
        self.l.as_ref()
    }

    /// `H v = Lᵀ v`.
    pub fn apply_h(&self, v: MatRef<'_, f64>) -> DMat {
        self.l.transpose() * v
    }

    /// `H⁻¹ v = L⁻ᵀ v`.
    pub fn solve_h(&self, v: MatRef<'_, f64>) -> DMat {
        let mut out = v.to_owned();
        triangular_solve::solve_upper_triangular_in_place(self.l.transpose(), out.as_mut(), Par::Seq);
        out
    }

    /// `X⁻¹ v`.
    pub fn solve(&self, v: MatRef<'_, f64>) -> DMat {
        let mut out = v.to_owned();
        triangular_solve::solve_lower_triangular_in_place(self.l.as_ref(), out.as_mut(), Par::Seq);
        triangular_solve::solve_upper_triangular_in_place(self.l.transpose(), out.as_mut(), Par::Seq);
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn column(m: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> DMat {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn col_vector(v: &[f64]) -> DMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn frobenius_sq(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s
}

/// Solves a dense square system with partial-pivot LU and checks the residual.
pub fn solve_dense(a: MatRef<'_, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(RomError::DimensionMismatch(format!("dense solve {}x{} with rhs {}", n, a.ncols(), b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = a.partial_piv_lu();
    let x = lu.solve(&col_vector(b));
    let xv = column(x.as_ref(), 0);
    if xv.iter().any(|v| !v.is_finite()) {
        return Err(RomError::Singular("dense solve produced non-finite values".into()));
    }
    Ok(xv)
}

/// Singular values of a dense matrix in descending order.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let s = a.singular_values().map_err(|e| RomError::Singular(format!("svd failed: {e:?}")))?;
    Ok(s)
}

/// Smallest-to-largest singular value ratio used as a condition estimate.
pub fn condition_estimate(a: MatRef<'_, f64>) -> Result<f64> {
    let s = singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        _ => Ok(f64::INFINITY),
    }
}
