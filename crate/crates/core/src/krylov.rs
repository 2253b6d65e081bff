//! Preconditioned conjugate gradients with a Lanczos condition estimate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dense_sym_eig, dot, norm2, SymSparseMatrix};
use crate::precond::Hierarchy;

/// A symmetric linear operator.
pub trait Operator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl Operator for SymSparseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
    }
}

impl Operator for Hierarchy {
    fn dim(&self) -> usize {
        Hierarchy::dim(self)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        Hierarchy::apply(self, x)
    }
}

impl Operator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
    }
}

/// The identity operator.
pub struct Identity(pub usize);

impl Operator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KrylovError {
    #[error("non-positive curvature {curvature:e} at iteration {iteration}")]
    IndefiniteDetected { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgOptions {
    pub rtol: f64,
    pub max_iters: usize,
    /// Measure the residual as `sqrt(rᵀM r)` instead of `‖r‖`.
    #[serde(default)]
    pub preconditioned_norm: bool,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, max_iters: 1000, preconditioned_norm: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual norms (see [`PcgOptions::preconditioned_norm`]),
    /// starting with the initial residual.
    pub residuals: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub cond: f64,
    pub converged: bool,
}

impl PcgResult {
    /// Residual history as `iteration,relative_residual` CSV.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relative_residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            s.push_str(&format!("{i},{r:.6e}\n"));
        }
        s
    }
}

/// Solves `A x = b` from `x = 0`. Stops when the relative residual (by default
/// `‖b − A x‖ / ‖b‖`) reaches `rtol`; on hitting `max_iters` returns the last
/// iterate with `converged = false`.
pub fn pcg(a: &dyn Operator, m: &dyn Operator, b: &[f64], opts: PcgOptions) -> Result<PcgResult, KrylovError> {
    let n = a.dim();
    if b.len() != n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: b.len() });
    }
    if m.dim() != n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: m.dim() });
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut residuals = vec![1.0];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    if bnorm == 0.0 {
        residuals[0] = 0.0;
        return Ok(PcgResult { x, iterations: 0, residuals, alphas, betas, cond: 1.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iters {
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !(rz > 0.0) {
            return Err(KrylovError::IndefiniteDetected { iteration: it, curvature: pap.min(rz) });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        alphas.push(alpha);
        it += 1;
        z = m.apply(&r);
        let rz_new = dot(&r, &z);
        let rel = if opts.preconditioned_norm { (rz_new.max(0.0) / rz0).sqrt() } else { norm2(&r) / bnorm };
        residuals.push(rel);
        if rel <= opts.rtol {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let cond = lanczos_condition(&alphas, &betas);
    Ok(PcgResult { x, iterations: it, residuals, alphas, betas, cond, converged })
}

/// Lanczos tridiagonal of a PCG run with `k` steps.
pub fn lanczos_tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    t
}

/// Ratio of the extreme eigenvalues of the PCG tridiagonal.
pub fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> f64 {
    if alphas.is_empty() {
        return 1.0;
    }
    let eig = dense_sym_eig(&lanczos_tridiagonal(alphas, betas));
    let hi = eig.values[0];
    let lo = eig.values[eig.values.len() - 1];
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    (hi / lo).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn identity_one_step() {
        let b = vec![1.0, 2.0, 3.0];
        let r = pcg(&Identity(3), &Identity(3), &b, PcgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.cond - 1.0).abs() < 1e-12);
        assert_eq!(r.x, b);
    }

    #[test]
    fn diagonal_condition() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = diag(&d);
        let b = vec![1.0; 10];
        let r = pcg(&a, &Identity(10), &b, PcgOptions { rtol: 1e-14, max_iters: 10, ..Default::default() }).unwrap();
        assert_eq!(r.iterations, 10);
        assert!((r.cond - 10.0).abs() < 1e-6);
    }

    #[test]
    fn two_by_two_exact() {
        let a = diag(&[1.0, 100.0]);
        let r = pcg(&a, &Identity(2), &[1.0, 1.0], PcgOptions::default()).unwrap();
        assert!((r.cond - 100.0).abs() < 1e-8);
    }

    #[test]
    fn exact_preconditioner() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let m = a.clone().try_inverse().unwrap();
        let r = pcg(&a, &m, &[1.0, -1.0, 2.0], PcgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn indefinite_detected() {
        let a = diag(&[1.0, -1.0]);
        let e = pcg(&a, &Identity(2), &[0.0, 1.0], PcgOptions::default()).unwrap_err();
        assert!(matches!(e, KrylovError::IndefiniteDetected { .. }));
    }

    #[test]
    fn max_iterations_flagged() {
        let d: Vec<f64> = (1..=20).map(|i| (i * i) as f64).collect();
        let r = pcg(&diag(&d), &Identity(20), &vec![1.0; 20], PcgOptions { rtol: 1e-12, max_iters: 3, ..Default::default() }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn preconditioned_norm_stops() {
        let d: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let opts = PcgOptions { rtol: 1e-10, preconditioned_norm: true, ..Default::default() };
        let r = pcg(&diag(&d), &Identity(20), &vec![1.0; 20], opts).unwrap();
        assert!(r.converged);
        assert!(*r.residuals.last().unwrap() <= 1e-10);
    }
}
