//! Block LOBPCG for the largest eigenpairs of `A x = λ B x`, with `A`, `B`
//! symmetric positive semidefinite, run inside a subspace given by a
//! projector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AdaptiveError;
use crate::linalg::dense_sym_eig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobpcgOptions {
    pub block: usize,
    pub max_iters: usize,
    /// Relative residual `‖r‖_M / (|λ| ‖x‖_B)` with `r = (A−λB)x` and `M`
    /// the preconditioner, or `‖r‖ / (|λ| ‖Bx‖)` without one.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LobpcgResult {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// `B`-orthonormal Ritz vectors (columns).
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Operators of the pencil; `project` maps onto the admissible subspace and
/// must commute with `a`, `b` and `precond` on it.
pub struct Pencil<'a> {
    pub n: usize,
    pub a: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub b: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub precond: Option<&'a (dyn Fn(&[f64]) -> Vec<f64> + Sync)>,
    pub project: Option<&'a (dyn Fn(&[f64]) -> Vec<f64> + Sync)>,
}

fn apply_cols(f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync), x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        out.set_column(j, &DVector::from_vec(f(&col)));
    }
    out
}

fn hcat(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(n, cols);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(p);
        c += p.ncols();
    }
    out
}

/// Rayleigh–Ritz on the span of `s`: returns the top `k` Ritz values and the
/// coefficient matrix, or `None` when the basis is numerically degenerate.
fn rayleigh_ritz(s: &DMatrix<f64>, as_: &DMatrix<f64>, bs: &DMatrix<f64>, k: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let gb = s.transpose() * bs;
    let gb = (&gb + gb.transpose()) * 0.5;
    let ga = s.transpose() * as_;
    let ga = (&ga + ga.transpose()) * 0.5;
    // diagonal scaling, then drop directions of tiny B-norm
    let d: Vec<f64> = (0..gb.nrows()).map(|i| if gb[(i, i)] > 0.0 { 1.0 / gb[(i, i)].sqrt() } else { 0.0 }).collect();
    let dm = DMatrix::from_diagonal(&DVector::from_vec(d));
    let gbs = &dm * gb * &dm;
    let eig = dense_sym_eig(&gbs);
    let top = eig.values[0];
    if !(top > 0.0) {
        return None;
    }
    let keep: Vec<usize> = (0..gbs.nrows()).filter(|&i| eig.values[i] > 1e-10 * top).collect();
    if keep.len() < k {
        return None;
    }
    let t = DMatrix::from_fn(gbs.nrows(), keep.len(), |i, j| eig.vectors[(i, keep[j])] / eig.values[keep[j]].sqrt());
    let t = &dm * t;
    let h = t.transpose() * ga * &t;
    let h = (&h + h.transpose()) * 0.5;
    let he = dense_sym_eig(&h);
    let vals: Vec<f64> = (0..k).map(|i| he.values[i]).collect();
    let coeff = t * he.vectors.columns(0, k);
    Some((vals, coeff))
}

/// Largest `block` eigenpairs. Iterates stay in the range of `project`.
pub fn lobpcg(p: &Pencil, opts: LobpcgOptions) -> Result<LobpcgResult, AdaptiveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _attempt in 0..2 {
        if let Some(r) = lobpcg_once(p, opts, &mut rng) {
            return Ok(r);
        }
    }
    Err(AdaptiveError::Breakdown)
}

fn lobpcg_once(p: &Pencil, opts: LobpcgOptions, rng: &mut ChaCha8Rng) -> Option<LobpcgResult> {
    let n = p.n;
    let m = opts.block;
    let proj = |x: &DMatrix<f64>| match p.project {
        Some(f) => apply_cols(f, x),
        None => x.clone(),
    };
    let x0 = proj(&DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() - 0.5));
    let (ax0, bx0) = (apply_cols(p.a, &x0), apply_cols(p.b, &x0));
    let (mut lam, c) = rayleigh_ritz(&x0, &ax0, &bx0, m)?;
    let mut x = &x0 * &c;
    let mut ax = &ax0 * &c;
    let mut bx = &bx0 * &c;
    let mut pdir: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut iterations = 0;
    loop {
        let r = &ax - &bx * DMatrix::from_diagonal(&DVector::from_column_slice(&lam));
        let mr = match p.precond {
            Some(f) => apply_cols(f, &r),
            None => r.clone(),
        };
        let lam_floor = lam[0].abs() * 1e-12;
        let res: Vec<f64> = (0..m)
            .map(|j| {
                let xb = x.column(j).dot(&bx.column(j)).max(0.0).sqrt();
                let num = match p.precond {
                    Some(_) => r.column(j).dot(&mr.column(j)).abs().sqrt(),
                    None => r.column(j).norm(),
                };
                let den = lam[j].abs().max(lam_floor) * match p.precond {
                    Some(_) => xb,
                    None => bx.column(j).norm(),
                };
                if den > 0.0 { num / den } else { 0.0 }
            })
            .collect();
        let active: Vec<usize> = (0..m).filter(|&j| res[j] > opts.tol).collect();
        if active.is_empty() || iterations >= opts.max_iters {
            return Some(LobpcgResult {
                values: lam,
                vectors: x,
                residuals: res,
                iterations,
                converged: active.is_empty(),
            });
        }
        iterations += 1;
        let w = DMatrix::from_fn(n, active.len(), |i, j| mr[(i, active[j])]);
        let w = proj(&w);
        let (aw, bw) = (apply_cols(p.a, &w), apply_cols(p.b, &w));
        let (s, as_, bs) = match &pdir {
            Some((pp, ap, bp)) => (hcat(&[&x, &w, pp]), hcat(&[&ax, &aw, ap]), hcat(&[&bx, &bw, bp])),
            None => (hcat(&[&x, &w]), hcat(&[&ax, &aw]), hcat(&[&bx, &bw])),
        };
        let (s, as_, bs, vals, c) = match rayleigh_ritz(&s, &as_, &bs, m) {
            Some((v, c)) => (s, as_, bs, v, c),
            // degenerate search space: retry without the previous directions
            None => {
                let s2 = hcat(&[&x, &w]);
                let as2 = hcat(&[&ax, &aw]);
                let bs2 = hcat(&[&bx, &bw]);
                let (v, c) = rayleigh_ritz(&s2, &as2, &bs2, m)?;
                (s2, as2, bs2, v, c)
            }
        };
        let rest = s.ncols() - m;
        let cp = c.rows(m, rest).into_owned();
        let pp = s.columns(m, rest) * &cp;
        let ap = as_.columns(m, rest) * &cp;
        let bp = bs.columns(m, rest) * &cp;
        x = &s * &c;
        ax = &as_ * &c;
        bx = &bs * &c;
        pdir = Some((pp, ap, bp));
        lam = vals;
    }
}

/// Largest `k` eigenpairs of the pencil restricted to the columns of an
/// orthonormal basis `u`, computed densely.
pub fn dense_pencil(p: &Pencil, u: &DMatrix<f64>, k: usize) -> Result<LobpcgResult, AdaptiveError> {
    let au = apply_cols(p.a, u);
    let bu = apply_cols(p.b, u);
    let r = u.ncols();
    if r == 0 {
        return Ok(LobpcgResult {
            values: Vec::new(),
            vectors: DMatrix::zeros(p.n, 0),
            residuals: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let (vals, c) = rayleigh_ritz(u, &au, &bu, k.min(r)).ok_or(AdaptiveError::Breakdown)?;
    let vectors = u * &c;
    Ok(LobpcgResult { residuals: vec![0.0; vals.len()], values: vals, vectors, iterations: 0, converged: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::generalized_eig;

    fn mat_fn(m: DMatrix<f64>) -> impl Fn(&[f64]) -> Vec<f64> + Sync {
        move |x| (&m * DVector::from_column_slice(x)).iter().copied().collect()
    }

    #[test]
    fn diagonal_pencil() {
        let a = mat_fn(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 3.0, 2.0, 1.0])));
        let b = mat_fn(DMatrix::identity(4, 4));
        let p = Pencil { n: 4, a: &a, b: &b, precond: None, project: None };
        let r = lobpcg(&p, LobpcgOptions { block: 2, max_iters: 50, tol: 1e-10, seed: 1 }).unwrap();
        assert!((r.values[0] - 4.0).abs() < 1e-10 && (r.values[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn identical_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = DMatrix::from_fn(20, 20, |_, _| rng.random::<f64>());
        let spd = &g * g.transpose() + DMatrix::identity(20, 20);
        let a = mat_fn(spd.clone());
        let b = mat_fn(spd);
        let p = Pencil { n: 20, a: &a, b: &b, precond: None, project: None };
        let r = lobpcg(&p, LobpcgOptions { block: 3, max_iters: 20, tol: 1e-10, seed: 3 }).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn random_pencil_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let h = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let am = &g * g.transpose();
        let bm = &h * h.transpose() + DMatrix::identity(n, n) * (n as f64);
        let (dense, _) = generalized_eig(&am, &bm);
        let a = mat_fn(am);
        let b = mat_fn(bm);
        let p = Pencil { n, a: &a, b: &b, precond: None, project: None };
        let r = lobpcg(&p, LobpcgOptions { block: 5, max_iters: 300, tol: 1e-10, seed: 7 }).unwrap();
        for i in 0..5 {
            assert!((r.values[i] - dense[i]).abs() <= 1e-8 * dense[0], "{} vs {}", r.values[i], dense[i]);
        }
    }
}
