//! Compressed sparse row storage for symmetric and general matrices.

use nalgebra::DMatrix;

use super::LinalgError;

/// General sparse matrix in CSR layout with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in &row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    /// Wraps raw CSR arrays; column indices must be sorted within rows.
    pub fn from_raw(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(indptr.len(), nrows + 1);
        assert_eq!(indices.len(), values.len());
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = self * x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y += selfᵀ * x`
    pub fn tr_mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = self.get(j, i);
                if (v - w).abs() > tol * v.abs().max(w.abs()) {
                    return false;
                }
            }
        }
        true
    }

    /// Sub-block selecting `rows` and `cols` (both given as index lists into self).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                let k = col_map[c];
                if k != usize::MAX {
                    t.push((ri, k, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &t)
    }
}

/// Symmetric sparse matrix with full (both-triangle) storage.
///
/// Both triangles are kept so products and principal sub-blocks are cheap;
/// the constructor enforces exact symmetry of the stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparseMatrix {
    inner: CsrMatrix,
}

impl SymSparseMatrix {
    /// Builds from triplets of the full matrix. Returns an error when the
    /// assembled values are not symmetric to relative `1e-12`.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let inner = CsrMatrix::from_triplets(n, n, triplets);
        if !inner.is_symmetric(1e-12) {
            return Err(LinalgError::NotSymmetric);
        }
        Ok(Self::symmetrized(inner))
    }

    /// Builds from triplets of the upper (or lower) triangle; each off-diagonal
    /// entry is mirrored.
    pub fn from_triangle(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self { inner: CsrMatrix::from_triplets(n, n, &full) }
    }

    /// Wraps a CSR matrix, averaging it with its transpose so the stored
    /// values are exactly symmetric.
    pub fn symmetrized(m: CsrMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut t = Vec::with_capacity(2 * m.nnz());
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((i, j, 0.5 * v));
                t.push((j, i, 0.5 * v));
            }
        }
        Self { inner: CsrMatrix::from_triplets(n, n, &t) }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        Self::symmetrized(CsrMatrix::from_dense(m))
    }

    /// Wraps a CSR matrix whose values the caller guarantees to be symmetric.
    pub fn from_csr_unchecked(m: CsrMatrix) -> Self {
        debug_assert!(m.is_symmetric(1e-12));
        Self { inner: m }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triangle(n, &t)
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.inner.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.mul_vec(x)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.mul_vec_into(x, y)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.inner.to_dense()
    }

    /// Principal sub-matrix on the index set `idx`.
    pub fn principal(&self, idx: &[usize]) -> SymSparseMatrix {
        Self { inner: self.inner.submatrix(idx, idx) }
    }

    /// Entries of the upper triangle `(i, j, v)` with `i <= j`, row-major.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for i in 0..self.n() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= i {
                    t.push((i, j, v));
                }
            }
        }
        t
    }

    /// Returns `alpha * self`.
    pub fn scaled(&self, alpha: f64) -> SymSparseMatrix {
        let mut inner = self.inner.clone();
        for v in inner.values.iter_mut() {
            *v *= alpha;
        }
        Self { inner }
    }

    /// Adjacency lists (off-diagonal structure) for ordering.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n())
            .map(|i| self.row(i).0.iter().copied().filter(|&j| j != i).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn asymmetric_triplets_rejected() {
        let r = SymSparseMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0)]);
        assert!(matches!(r, Err(LinalgError::NotSymmetric)));
    }

    #[test]
    fn triangle_is_mirrored() {
        let m = SymSparseMatrix::from_triangle(3, &[(0, 0, 2.0), (0, 2, -1.0), (2, 2, 2.0)]);
        assert_eq!(m.get(2, 0), -1.0);
        assert_eq!(m.mul_vec(&[1.0, 0.0, 1.0]), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn principal_block() {
        let d = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 5.0, 2.0, 0.0, 2.0, 6.0]);
        let m = SymSparseMatrix::from_dense(&d);
        let p = m.principal(&[2, 1]);
        assert_eq!(p.to_dense(), DMatrix::from_row_slice(2, 2, &[6.0, 2.0, 2.0, 5.0]));
    }
}
