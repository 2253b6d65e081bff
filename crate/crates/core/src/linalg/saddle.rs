//! Saddle-point systems `[[K, Cᵀ], [C, 0]]`.
//!
//! [`factor_saddle`] is a general dense symmetric-indefinite LDLᵀ with
//! Bunch–Kaufman pivoting. [`SaddleSolver`] is the structured solver used per
//! substructure: it works with the augmented matrix `K + ρCᵀC`, which stays
//! sparse and SPD whenever the constraints remove the kernel of `K`.

use nalgebra::{DMatrix, DVector};

use super::ldl::SparseLdl;
use super::sparse::SymSparseMatrix;
use super::LinalgError;

const BK_ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(f64),
    /// 2×2 block `[[a, b], [b, c]]`; occupies two consecutive steps.
    Two(f64, f64, f64),
}

/// `P M Pᵀ = L D Lᵀ` with 1×1 and 2×2 diagonal blocks.
#[derive(Debug, Clone)]
pub struct DenseLdlt {
    n: usize,
    perm: Vec<usize>,
    l: DMatrix<f64>,
    blocks: Vec<(usize, Pivot)>,
}

/// Factors a symmetric (possibly indefinite) matrix with Bunch–Kaufman
/// pivoting. Returns [`LinalgError::Singular`] when a pivot vanishes.
pub fn factor_saddle(m: &SymSparseMatrix) -> Result<DenseLdlt, LinalgError> {
    DenseLdlt::factor(&m.to_dense())
}

impl DenseLdlt {
    pub fn factor(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let n = m.nrows();
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut blocks = Vec::new();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * scale;

        let swap = |a: &mut DMatrix<f64>, l: &mut DMatrix<f64>, perm: &mut Vec<usize>, k: usize, i: usize, j: usize| {
            if i == j {
                return;
            }
            a.swap_rows(i, j);
            a.swap_columns(i, j);
            perm.swap(i, j);
            // already computed columns of L (< k) follow the row swap
            for c in 0..k {
                let t = l[(i, c)];
                l[(i, c)] = l[(j, c)];
                l[(j, c)] = t;
            }
        };

        let mut k = 0;
        while k < n {
            let akk = a[(k, k)].abs();
            let (mut r, mut lambda) = (k, 0.0);
            for i in k + 1..n {
                if a[(i, k)].abs() > lambda {
                    lambda = a[(i, k)].abs();
                    r = i;
                }
            }
            if akk.max(lambda) <= tiny {
                return Err(LinalgError::Singular { pivot: k });
            }
            let two_by_two;
            if akk >= BK_ALPHA * lambda {
                two_by_two = false;
            } else {
                let mut sigma = 0.0f64;
                for j in k..n {
                    if j != r {
                        sigma = sigma.max(a[(r, j)].abs());
                    }
                }
                if akk * sigma >= BK_ALPHA * lambda * lambda {
                    two_by_two = false;
                } else if a[(r, r)].abs() >= BK_ALPHA * sigma {
                    swap(&mut a, &mut l, &mut perm, k, k, r);
                    two_by_two = false;
                } else {
                    swap(&mut a, &mut l, &mut perm, k, k + 1, r);
                    two_by_two = true;
                }
            }
            if !two_by_two {
                let d = a[(k, k)];
                if d.abs() <= tiny {
                    return Err(LinalgError::Singular { pivot: k });
                }
                for i in k + 1..n {
                    l[(i, k)] = a[(i, k)] / d;
                }
                for j in k + 1..n {
                    let ljd = l[(j, k)] * d;
                    if ljd == 0.0 {
                        continue;
                    }
                    for i in k + 1..n {
                        a[(i, j)] -= l[(i, k)] * ljd;
                    }
                }
                blocks.push((k, Pivot::One(d)));
                k += 1;
            } else {
                let (p, q, s) = (a[(k, k)], a[(k + 1, k)], a[(k + 1, k + 1)]);
                let det = p * s - q * q;
                if det.abs() <= tiny * tiny {
                    return Err(LinalgError::Singular { pivot: k });
                }
                for i in k + 2..n {
                    let (x, y) = (a[(i, k)], a[(i, k + 1)]);
                    l[(i, k)] = (x * s - y * q) / det;
                    l[(i, k + 1)] = (y * p - x * q) / det;
                }
                for j in k + 2..n {
                    let (xj, yj) = (a[(j, k)], a[(j, k + 1)]);
                    for i in k + 2..n {
                        a[(i, j)] -= l[(i, k)] * xj + l[(i, k + 1)] * yj;
                    }
                }
                blocks.push((k, Pivot::Two(p, q, s)));
                k += 2;
            }
        }
        Ok(Self { n, perm, l, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.l[(i, j)] * xj;
                }
            }
        }
        for &(k, piv) in &self.blocks {
            match piv {
                Pivot::One(d) => x[k] /= d,
                Pivot::Two(p, q, s) => {
                    let det = p * s - q * q;
                    let (u, v) = (x[k], x[k + 1]);
                    x[k] = (s * u - q * v) / det;
                    x[k + 1] = (p * v - q * u) / det;
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for i in j + 1..n {
                s -= self.l[(i, j)] * x[i];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.perm[k]] = x[k];
        }
        out
    }

    /// `(positive, negative, zero)` eigenvalue counts.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let (mut pos, mut neg) = (0, 0);
        for &(_, piv) in &self.blocks {
            match piv {
                Pivot::One(d) => {
                    if d > 0.0 {
                        pos += 1
                    } else {
                        neg += 1
                    }
                }
                Pivot::Two(p, q, s) => {
                    let det = p * s - q * q;
                    if det < 0.0 {
                        pos += 1;
                        neg += 1;
                    } else if p + s > 0.0 {
                        pos += 2;
                    } else {
                        neg += 2;
                    }
                }
            }
        }
        (pos, neg, self.n - pos - neg)
    }
}

/// Structured solver for `[[K, Cᵀ], [C, 0]] [x; μ] = [f; g]` where `K` is a
/// sparse symmetric PSD matrix and `C` a dense full-row-rank block.
///
/// With `K_ρ = K + ρCᵀC`, `Y = K_ρ⁻¹Cᵀ` and `S = C Y`:
/// `μ = S⁻¹(C K_ρ⁻¹(f + ρCᵀg) − g)` and `x = K_ρ⁻¹(f + ρCᵀg) − Y μ`.
#[derive(Debug, Clone)]
pub struct SaddleSolver {
    n: usize,
    rho: f64,
    c: DMatrix<f64>,
    kfac: SparseLdl,
    y: DMatrix<f64>,
    schur: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SaddleSolver {
    /// `c` has one row per constraint over the `n` columns of `k`.
    pub fn new(k: &SymSparseMatrix, c: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let n = k.n();
        if c.ncols() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: c.ncols() });
        }
        let diag = k.diag();
        let rho = if n == 0 { 1.0 } else { diag.iter().sum::<f64>() / n as f64 };
        let rho = if rho > 0.0 { rho } else { 1.0 };
        let kr = augmented(k, c, rho);
        let kfac = SparseLdl::factor_spd(&kr)?;
        let nc = c.nrows();
        let mut y = DMatrix::zeros(n, nc);
        for j in 0..nc {
            let col: Vec<f64> = c.row(j).iter().copied().collect();
            let sol = kfac.solve(&col);
            y.set_column(j, &DVector::from_vec(sol));
        }
        let s = c * &y;
        let s = (&s + s.transpose()) * 0.5;
        let schur = nalgebra::Cholesky::new(s).ok_or(LinalgError::Singular { pivot: n })?;
        Ok(Self { n, rho, c: c.clone(), kfac, y, schur })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_constraints(&self) -> usize {
        self.c.nrows()
    }

    /// Solves the saddle system; returns `(x, μ)`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(f.len(), self.n);
        assert_eq!(g.len(), self.c.nrows());
        let mut rhs = f.to_vec();
        if g.iter().any(|&v| v != 0.0) {
            let ctg = self.c.tr_mul(&DVector::from_column_slice(g));
            for (r, v) in rhs.iter_mut().zip(ctg.iter()) {
                *r += self.rho * v;
            }
        }
        let mut x = self.kfac.solve(&rhs);
        if self.c.nrows() == 0 {
            return (x, Vec::new());
        }
        let cx = &self.c * DVector::from_column_slice(&x);
        let resid = cx - DVector::from_column_slice(g);
        let mu = self.schur.solve(&resid);
        let corr = &self.y * &mu;
        for (xi, ci) in x.iter_mut().zip(corr.iter()) {
            *xi -= ci;
        }
        (x, mu.iter().copied().collect())
    }

    /// Primal block of the solve with zero constraint values.
    pub fn solve_homogeneous(&self, f: &[f64]) -> Vec<f64> {
        let g = vec![0.0; self.c.nrows()];
        self.solve(f, &g).0
    }

    /// Energy-minimal functions with unit constraint values: `Ψ = Y S⁻¹`,
    /// and the Lagrange block `μ = ρI − S⁻¹`.
    pub fn unit_responses(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let nc = self.c.nrows();
        let sinv = self.schur.inverse();
        let psi = &self.y * &sinv;
        let mu = DMatrix::<f64>::identity(nc, nc) * self.rho - sinv;
        (psi, mu)
    }

    /// Inertia of the saddle matrix: `n` positive, `n_c` negative.
    pub fn inertia(&self) -> (usize, usize, usize) {
        (self.n, self.c.nrows(), 0)
    }
}

/// `K + ρ CᵀC` as a sparse symmetric matrix.
fn augmented(k: &SymSparseMatrix, c: &DMatrix<f64>, rho: f64) -> SymSparseMatrix {
    let mut t = k.upper_triplets();
    for r in 0..c.nrows() {
        let support: Vec<(usize, f64)> =
            (0..c.ncols()).filter(|&j| c[(r, j)] != 0.0).map(|j| (j, c[(r, j)])).collect();
        for (a, &(i, vi)) in support.iter().enumerate() {
            for &(j, vj) in &support[a..] {
                t.push((i, j, rho * vi * vj));
            }
        }
    }
    SymSparseMatrix::from_triangle(k.n(), &t)
}
