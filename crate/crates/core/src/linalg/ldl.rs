//! Sparse LDLᵀ factorization of symmetric positive definite matrices.
//!
//! Up-looking factorization driven by the elimination tree, applied to the
//! matrix permuted with [`minimum_degree`](super::ordering::minimum_degree).

use super::ordering::{invert, minimum_degree};
use super::sparse::SymSparseMatrix;
use super::LinalgError;

/// Pivots at or below this fraction of the original diagonal entry are
/// reported as loss of positive definiteness.
const PIVOT_REL_TOL: f64 = 1e-12;

/// Factorization `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl SparseLdl {
    /// Factors an SPD matrix with a fill-reducing ordering.
    pub fn factor_spd(a: &SymSparseMatrix) -> Result<Self, LinalgError> {
        let perm = minimum_degree(&a.adjacency());
        Self::factor_with_ordering(a, perm)
    }

    /// Factors with a caller-provided elimination order.
    pub fn factor_with_ordering(a: &SymSparseMatrix, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.n();
        let pinv = invert(&perm);
        // Upper triangle of the permuted matrix, stored by columns:
        // column k holds (i, v) with i <= k.
        let mut cp = vec![0usize; n + 1];
        for new_i in 0..n {
            let (cols, _) = a.row(perm[new_i]);
            for &c in cols {
                let new_j = pinv[c];
                if new_i <= new_j {
                    cp[new_j + 1] += 1;
                }
            }
        }
        for k in 0..n {
            cp[k + 1] += cp[k];
        }
        let mut next = cp.clone();
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![0.0; cp[n]];
        for new_i in 0..n {
            let (cols, vals) = a.row(perm[new_i]);
            for (&c, &v) in cols.iter().zip(vals) {
                let new_j = pinv[c];
                if new_i <= new_j {
                    let k = next[new_j];
                    ci[k] = new_i;
                    cx[k] = v;
                    next[new_j] += 1;
                }
            }
        }

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];

        // Numeric.
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut fill = vec![0usize; n];
        for k in 0..n {
            y[k] = 0.0;
            let mut top = n;
            flag[k] = k;
            fill[k] = 0;
            let mut diag_orig = 0.0;
            for p in cp[k]..cp[k + 1] {
                let mut i = ci[p];
                y[i] += cx[p];
                if i == k {
                    diag_orig = cx[p];
                    continue;
                }
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + fill[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                fill[i] += 1;
            }
            let scale = diag_orig.abs();
            if !(d[k] > PIVOT_REL_TOL * scale) || !d[k].is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: perm[k], value: d[k] });
            }
        }
        Ok(Self { n, perm, lp, li, lx, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal factor entries.
    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Inertia of an SPD factorization: `(positive, negative, zero)`.
    pub fn inertia(&self) -> (usize, usize, usize) {
        (self.n, 0, 0)
    }
}
