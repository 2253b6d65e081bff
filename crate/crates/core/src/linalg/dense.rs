//! Dense symmetric kernels: eigendecomposition, PSD pseudoinverse, reduced QR
//! of row blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::LinalgError;

/// Symmetric eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct DenseEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

/// Full spectrum of a symmetric matrix, largest eigenvalue first.
pub fn dense_sym_eig(m: &DMatrix<f64>) -> DenseEig {
    assert_eq!(m.nrows(), m.ncols(), "dense_sym_eig needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return DenseEig { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    DenseEig { values, vectors }
}

/// Default relative drop tolerance for [`pseudoinverse_psd`].
pub const DEFAULT_PINV_DROP_TOL: f64 = 1e-8;

/// Moore–Penrose pseudoinverse of a symmetric PSD matrix. Eigenvalues not
/// exceeding `drop_tol * λ_max` are treated as zero.
pub fn pseudoinverse_psd(m: &DMatrix<f64>, drop_tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = dense_sym_eig(m);
    let lmax = eig.values[0];
    if !(lmax > 0.0) {
        return Err(LinalgError::ZeroMatrix);
    }
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.values[k];
        if lam <= drop_tol * lmax {
            break;
        }
        let v = eig.vectors.column(k);
        out += (&v * v.transpose()) / lam;
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Default relative rank tolerance for [`reduced_qr_rows`].
pub const DEFAULT_QR_RANK_TOL: f64 = 1e-10;

/// Orthonormalizes the rows of `rows` with a column-pivoted Gram–Schmidt
/// (two passes per vector). Rows whose remaining norm drops to
/// `tol * max_row_norm` are discarded. Returns the orthonormal rows and the
/// effective rank.
pub fn reduced_qr_rows(rows: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let max_norm = (0..rows.nrows()).map(|i| rows.row(i).norm()).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return (DMatrix::zeros(0, rows.ncols()), 0);
    }
    reduced_qr_rows_abs(rows, tol * max_norm)
}

/// As [`reduced_qr_rows`] with an absolute drop threshold.
pub fn reduced_qr_rows_abs(rows: &DMatrix<f64>, threshold: f64) -> (DMatrix<f64>, usize) {
    let (k, n) = rows.shape();
    let mut work: Vec<DVector<f64>> = (0..k).map(|i| rows.row(i).transpose()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alive: Vec<bool> = vec![true; k];
    loop {
        // pivot: largest remaining norm
        let mut best: Option<(usize, f64)> = None;
        for i in 0..k {
            if !alive[i] {
                continue;
            }
            let nrm = work[i].norm();
            if best.map_or(true, |(_, b)| nrm > b) {
                best = Some((i, nrm));
            }
        }
        let Some((piv, nrm)) = best else { break };
        if nrm <= threshold {
            break;
        }
        alive[piv] = false;
        let mut q = work[piv].clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&q);
                q.axpy(-c, b, 1.0);
            }
        }
        let qn = q.norm();
        if qn <= threshold {
            continue;
        }
        q /= qn;
        for i in 0..k {
            if alive[i] {
                let c = q.dot(&work[i]);
                work[i].axpy(-c, &q, 1.0);
            }
        }
        basis.push(q);
    }
    let r = basis.len();
    let mut out = DMatrix::zeros(r, n);
    for (i, b) in basis.iter().enumerate() {
        out.set_row(i, &b.transpose());
    }
    (out, r)
}

/// Numerical rank of a matrix from its Gram spectrum.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let g = if m.nrows() >= m.ncols() { m.transpose() * m } else { m * m.transpose() };
    let eig = dense_sym_eig(&g);
    let top = eig.values[0];
    if top <= 0.0 {
        return 0;
    }
    eig.values.iter().filter(|&&v| v > rel_tol * rel_tol * top).count()
}

/// Cholesky factor of a dense SPD matrix, with a typed error.
pub fn dense_cholesky(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, LinalgError> {
    nalgebra::Cholesky::new(m.clone()).ok_or(LinalgError::NotPositiveDefinite { pivot: 0, value: f64::NAN })
}
